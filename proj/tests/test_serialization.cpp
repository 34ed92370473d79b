#include <doctest.h>

#include "helpers.hpp"
#include "tmc/errors.hpp"
#include "tmc/serialization.hpp"

using namespace tmc;

namespace {

// The reference example trip: 5 miles to work at 7:00, traveler 25-34,
// female, Bachelor's, one vehicle, $100,000-$199,999.
TripRecord example_trip() {
    TripRecord r;
    r.record_id = 1;
    r.age_band = "25-34";
    r.gender = "Female";
    r.education = "Bachelor degree";
    r.income_band = "$100,000-$199,999";
    r.household_vehicles = 1;
    r.trip_distance_miles = 5;
    r.start_time_hours = 7.0;
    r.trip_purpose = "Work";
    r.mode = TripMode::Drive;
    return r;
}

const std::string kExampleText =
    "The trip distance is 5 miles, and trip purpose is work. Trip starts at 7:00. "
    "Traveler is 25-34 years old, female, with a Bachelor's degree. Her household owns "
    "1 vehicle, and the household income is $100,000-$199,999.";

}  // namespace

TEST_CASE("serialize_trip: renders the reference sentences verbatim") {
    Document query = serialize_trip(example_trip(), false);
    CHECK(query.text == kExampleText);
    CHECK_FALSE(query.mode.has_value());

    Document labeled = serialize_trip(example_trip(), true);
    CHECK(labeled.text == kExampleText + " Trip mode is Drive.");
    CHECK(labeled.mode == TripMode::Drive);
    CHECK(labeled.doc_id == 1);
}

TEST_CASE("serialize_trip: label flag changes exactly one trailing sentence") {
    Dataset ds = generate_synthetic(50, SyntheticProfile::Marginal, 21);
    for (const auto& r : ds.records) {
        std::string masked = serialize_trip(r, false).text;
        std::string labeled = serialize_trip(r, true).text;
        std::string expected_suffix = " Trip mode is " + std::string(to_string(*r.mode)) + ".";
        CHECK(labeled == masked + expected_suffix);
    }
}

TEST_CASE("serialize_trip: deterministic") {
    TripRecord r = generate_synthetic(10, SyntheticProfile::Marginal, 2).records[7];
    CHECK(serialize_trip(r, true).text == serialize_trip(r, true).text);
}

TEST_CASE("serialize_trip: singular and fractional number forms") {
    TripRecord r = example_trip();
    r.trip_distance_miles = 1.0;
    r.household_vehicles = 0;
    std::string text = serialize_trip(r, false).text;
    CHECK(text.find("The trip distance is 1 mile,") == 0);
    CHECK(text.find("owns 0 vehicles") != std::string::npos);

    r.trip_distance_miles = 2.3;
    r.household_vehicles = 2;
    text = serialize_trip(r, false).text;
    CHECK(text.find("The trip distance is 2.3 miles,") == 0);
    CHECK(text.find("owns 2 vehicles") != std::string::npos);
}

TEST_CASE("serialize_trip: time rendering H:MM") {
    TripRecord r = example_trip();
    r.start_time_hours = 0.5;
    CHECK(serialize_trip(r, false).text.find("Trip starts at 0:30.") != std::string::npos);
    r.start_time_hours = 23.0 + 59.0 / 60.0;
    CHECK(serialize_trip(r, false).text.find("Trip starts at 23:59.") != std::string::npos);
    r.start_time_hours = 9 + 5.0 / 60.0;
    CHECK(serialize_trip(r, false).text.find("Trip starts at 9:05.") != std::string::npos);
}

TEST_CASE("serialize_trip: pronouns follow gender") {
    TripRecord r = example_trip();
    r.gender = "Male";
    CHECK(serialize_trip(r, false).text.find("male, with") != std::string::npos);
    CHECK(serialize_trip(r, false).text.find("His household owns") != std::string::npos);
    r.gender = "Non-binary";
    CHECK(serialize_trip(r, false).text.find("non-binary, with") != std::string::npos);
    CHECK(serialize_trip(r, false).text.find("Their household owns") != std::string::npos);
}

TEST_CASE("serialize_trip: errors") {
    TripRecord r = example_trip();
    r.mode.reset();
    CHECK_THROWS_AS(serialize_trip(r, true), DataError);  // label requested, no mode
    r = example_trip();
    r.age_band = "26-35";
    CHECK_THROWS_AS(serialize_trip(r, false), DataError);
}

TEST_CASE("parse_document: the reference example round-trips") {
    TripRecord r = example_trip();
    TripRecord masked = r;
    masked.mode.reset();
    CHECK(parse_document(serialize_trip(r, false).text, r.record_id) == masked);
    CHECK(parse_document(serialize_trip(r, true).text, r.record_id) == r);
}

TEST_CASE("parse_document: round-trips 200 random records exactly") {
    Dataset ds = generate_synthetic(200, SyntheticProfile::Marginal, 33);
    for (const auto& r : ds.records) {
        CHECK(parse_document(serialize_trip(r, true).text, r.record_id) == r);
        TripRecord masked = r;
        masked.mode.reset();
        CHECK(parse_document(serialize_trip(r, false).text, r.record_id) == masked);
    }
}

TEST_CASE("parse_document: every vocabulary value round-trips") {
    TripRecord r = example_trip();
    for (auto age : kAgeBands) {
        r.age_band = age;
        CHECK(parse_document(serialize_trip(r, true).text, r.record_id) == r);
    }
    for (auto edu : kEducationLevels) {
        r.education = edu;
        CHECK(parse_document(serialize_trip(r, true).text, r.record_id) == r);
    }
    for (auto income : kIncomeBands) {
        r.income_band = income;
        CHECK(parse_document(serialize_trip(r, true).text, r.record_id) == r);
    }
    for (auto purpose : kTripPurposes) {
        r.trip_purpose = purpose;
        CHECK(parse_document(serialize_trip(r, true).text, r.record_id) == r);
    }
    for (auto gender : kGenders) {
        r.gender = gender;
        CHECK(parse_document(serialize_trip(r, true).text, r.record_id) == r);
    }
    for (TripMode mode : kModeOrder) {
        r.mode = mode;
        CHECK(parse_document(serialize_trip(r, true).text, r.record_id) == r);
    }
}

TEST_CASE("parse_document: rejects text outside the template grammar") {
    CHECK_THROWS_AS(parse_document("hello world"), DataError);
    CHECK_THROWS_AS(parse_document(""), DataError);
    CHECK_THROWS_AS(parse_document(kExampleText + " Trip mode is Jetpack."), DataError);
    CHECK_THROWS_AS(parse_document(kExampleText + " Trip mode is Drive. extra"), DataError);
    // Pronoun inconsistent with gender.
    std::string twisted = kExampleText;
    twisted.replace(twisted.find("Her household"), 3, "His");
    CHECK_THROWS_AS(parse_document(twisted), DataError);
}

TEST_CASE("corpus: lookup and jsonl round-trip") {
    tmc::test::TempDir dir("corpus");
    Dataset ds = generate_synthetic(20, SyntheticProfile::Marginal, 44);
    ds.name = "unit";
    Corpus corpus(serialize_dataset(ds, true));
    CHECK(corpus.size() == 20);
    CHECK(corpus.at(1).doc_id == 1);
    CHECK(corpus.find(999) == nullptr);
    CHECK_THROWS_AS(corpus.at(999), DataError);

    corpus.save_jsonl(dir.file("corpus.jsonl"));
    Corpus loaded = Corpus::load_jsonl(dir.file("corpus.jsonl"));
    REQUIRE(loaded.size() == corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        CHECK(loaded.docs()[i].doc_id == corpus.docs()[i].doc_id);
        CHECK(loaded.docs()[i].text == corpus.docs()[i].text);
        CHECK(loaded.docs()[i].mode == corpus.docs()[i].mode);
        CHECK(loaded.docs()[i].source_dataset == corpus.docs()[i].source_dataset);
    }

    std::vector<Document> dup = {corpus.docs()[0], corpus.docs()[0]};
    CHECK_THROWS_AS(Corpus{dup}, DataError);
}
