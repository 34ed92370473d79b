#include "tmc/serialization.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "tmc/errors.hpp"

namespace tmc {

namespace {

// Wording for every enum value is frozen here; embeddings are only
// comparable while these stay byte-stable (see kTemplateVersion). Every
// value of a field renders to the same number of word tokens (education 3,
// income 1, purpose 1, age band 3), which keeps document vectors
// norm-comparable under the bag-of-words embedder.
std::string_view education_phrase(std::string_view level) {
    if (level == "Less than high school") return "a grade-school education";
    if (level == "High school") return "a high-school education";
    if (level == "Some college") return "a partial-college education";
    if (level == "Vocational/technical training") return "a vocational/technical education";
    if (level == "Associates degree") return "an Associate's degree";
    if (level == "Bachelor degree") return "a Bachelor's degree";
    if (level == "Graduate degree") return "a Graduate degree";
    throw DataError("no template wording for education: " + std::string(level));
}

std::string_view purpose_phrase(std::string_view purpose) {
    if (purpose == "Home") return "home";
    if (purpose == "Work") return "work";
    if (purpose == "Social/Recreation") return "social/recreation";
    if (purpose == "Shopping") return "shopping";
    if (purpose == "Meal") return "meal";
    if (purpose == "Business/Errand") return "business/errand";
    if (purpose == "Escort") return "escort";
    if (purpose == "Overnight") return "overnight";
    if (purpose == "School") return "school";
    if (purpose == "Change mode") return "mode-change";
    throw DataError("no template wording for purpose: " + std::string(purpose));
}

std::string_view pronoun(std::string_view gender) {
    if (gender == "Female") return "Her";
    if (gender == "Male") return "His";
    if (gender == "Non-binary") return "Their";
    throw DataError("no pronoun for gender: " + std::string(gender));
}

std::string lowercase(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string income_phrase(std::string_view band) {
    if (band == "Under $25,000") return "$0-$24,999";
    if (band == "$200,000 or more") return "$200,000+";
    return std::string(band);
}

std::string age_phrase(std::string_view band) {
    if (band == "75 or older") return "75 or older";
    return std::string(band) + " years old";
}

// Whole values render without a decimal point ("5 miles", "1 vehicle"),
// everything else to one decimal. to_chars keeps the decimal separator
// independent of the process locale.
std::string count_to_string(double value) {
    double rounded = std::round(value);
    char buf[32];
    if (std::abs(value - rounded) < 1e-9) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), rounded,
                                       std::chars_format::fixed, 0);
        return std::string(buf, ptr);
    }
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, 1);
    return std::string(buf, ptr);
}

std::string time_to_string(double hours) {
    int hh = static_cast<int>(std::floor(hours));
    int mm = static_cast<int>(std::round((hours - hh) * 60.0));
    if (mm == 60) {
        mm = 0;
        hh = (hh + 1) % 24;
    }
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%d:%02d", hh, mm);
    return buf;
}

// Cursor over the document text with exact-literal expectations; any
// mismatch is a template-grammar error.
class TextCursor {
public:
    explicit TextCursor(const std::string& text) : text_(text) {}

    void expect(std::string_view literal) {
        if (text_.compare(pos_, literal.size(), literal) != 0)
            throw DataError("document does not match template near offset " +
                            std::to_string(pos_) + ": expected \"" + std::string(literal) + "\"");
        pos_ += literal.size();
    }

    std::string read_until(std::string_view delimiter) {
        auto at = text_.find(delimiter, pos_);
        if (at == std::string::npos)
            throw DataError("document does not match template: missing \"" +
                            std::string(delimiter) + "\"");
        std::string out = text_.substr(pos_, at - pos_);
        pos_ = at;
        return out;
    }

    bool at_end() const { return pos_ == text_.size(); }
    bool starts_with(std::string_view literal) const {
        return text_.compare(pos_, literal.size(), literal) == 0;
    }

private:
    const std::string& text_;
    std::size_t pos_ = 0;
};

double parse_number(const std::string& text, const char* what) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw DataError(std::string("document does not match template: bad ") + what + " \"" +
                        text + "\"");
    return value;
}

double parse_time(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 3 != text.size())
        throw DataError("document does not match template: bad time \"" + text + "\"");
    int hh = 0, mm = 0;
    auto r1 = std::from_chars(text.data(), text.data() + colon, hh);
    auto r2 = std::from_chars(text.data() + colon + 1, text.data() + text.size(), mm);
    if (r1.ec != std::errc{} || r2.ec != std::errc{} || r1.ptr != text.data() + colon ||
        r2.ptr != text.data() + text.size() || hh < 0 || hh > 23 || mm < 0 || mm > 59)
        throw DataError("document does not match template: bad time \"" + text + "\"");
    return hh + mm / 60.0;
}

template <std::size_t N>
std::string match_lowercased(const std::array<std::string_view, N>& vocab, const std::string& text,
                             const char* what) {
    for (auto v : vocab) {
        if (lowercase(v) == text) return std::string(v);
    }
    throw DataError(std::string("document does not match template: unknown ") + what + " \"" +
                    text + "\"");
}

}  // namespace

Document serialize_trip(const TripRecord& record, bool include_label) {
    std::string problem = validate(record);
    if (!problem.empty())
        throw DataError("serialize_trip: invalid record " + std::to_string(record.record_id) +
                        ": " + problem);
    if (include_label && !record.mode)
        throw DataError("serialize_trip: include_label requires a mode on record " +
                        std::to_string(record.record_id));

    std::string distance = count_to_string(record.trip_distance_miles);
    std::string vehicles = count_to_string(record.household_vehicles);

    std::string text;
    text += "The trip distance is " + distance + (distance == "1" ? " mile" : " miles") +
            ", and trip purpose is " + std::string(purpose_phrase(record.trip_purpose)) + ".";
    text += " Trip starts at " + time_to_string(record.start_time_hours) + ".";
    text += " Traveler is " + age_phrase(record.age_band) + ", " + lowercase(record.gender) +
            ", with " + std::string(education_phrase(record.education)) + ".";
    text += " " + std::string(pronoun(record.gender)) + " household owns " + vehicles +
            (vehicles == "1" ? " vehicle" : " vehicles") + ", and the household income is " +
            income_phrase(record.income_band) + ".";
    if (include_label) text += " Trip mode is " + std::string(to_string(*record.mode)) + ".";

    Document doc;
    doc.doc_id = record.record_id;
    doc.text = std::move(text);
    if (include_label) doc.mode = record.mode;
    return doc;
}

std::vector<Document> serialize_dataset(const Dataset& dataset, bool include_label) {
    std::vector<Document> docs;
    docs.reserve(dataset.records.size());
    for (const auto& r : dataset.records) {
        Document d = serialize_trip(r, include_label);
        d.source_dataset = dataset.name;
        docs.push_back(std::move(d));
    }
    return docs;
}

TripRecord parse_document(const std::string& text, std::int64_t record_id) {
    TextCursor cur(text);
    TripRecord r;
    r.record_id = record_id;

    cur.expect("The trip distance is ");
    std::string distance = cur.read_until(" mile");
    r.trip_distance_miles = parse_number(distance, "distance");
    cur.expect(distance == "1" ? " mile" : " miles");
    cur.expect(", and trip purpose is ");
    std::string purpose = cur.read_until(".");
    bool purpose_known = false;
    for (auto value : kTripPurposes) {
        if (purpose_phrase(value) == purpose) {
            r.trip_purpose = std::string(value);
            purpose_known = true;
            break;
        }
    }
    if (!purpose_known)
        throw DataError("document does not match template: unknown purpose \"" + purpose + "\"");
    cur.expect(". Trip starts at ");
    r.start_time_hours = parse_time(cur.read_until("."));
    cur.expect(". Traveler is ");

    std::string age = cur.read_until(", ");
    if (age != "75 or older") {
        const std::string suffix = " years old";
        if (age.size() <= suffix.size() || age.compare(age.size() - suffix.size(), suffix.size(), suffix) != 0)
            throw DataError("document does not match template: bad age \"" + age + "\"");
        age.resize(age.size() - suffix.size());
    }
    bool age_known = std::find(kAgeBands.begin(), kAgeBands.end(), age) != kAgeBands.end();
    if (!age_known) throw DataError("document does not match template: unknown age band \"" + age + "\"");
    r.age_band = age;

    cur.expect(", ");
    r.gender = match_lowercased(kGenders, cur.read_until(", with "), "gender");
    cur.expect(", with ");

    std::string edu = cur.read_until(". ");
    bool edu_known = false;
    for (auto level : kEducationLevels) {
        if (education_phrase(level) == edu) {
            r.education = std::string(level);
            edu_known = true;
            break;
        }
    }
    if (!edu_known) throw DataError("document does not match template: unknown education \"" + edu + "\"");

    cur.expect(". ");
    cur.expect(pronoun(r.gender));
    cur.expect(" household owns ");
    std::string vehicles = cur.read_until(" vehicle");
    r.household_vehicles = parse_number(vehicles, "vehicle count");
    cur.expect(vehicles == "1" ? " vehicle" : " vehicles");
    cur.expect(", and the household income is ");

    std::string income = cur.read_until(".");
    bool income_known = false;
    for (auto band : kIncomeBands) {
        if (income_phrase(band) == income) {
            r.income_band = std::string(band);
            income_known = true;
            break;
        }
    }
    if (!income_known) throw DataError("document does not match template: unknown income \"" + income + "\"");
    cur.expect(".");

    if (!cur.at_end()) {
        cur.expect(" Trip mode is ");
        std::string mode = cur.read_until(".");
        auto parsed = mode_from_string(mode);
        if (!parsed) throw DataError("document does not match template: unknown mode \"" + mode + "\"");
        r.mode = parsed;
        cur.expect(".");
        if (!cur.at_end()) throw DataError("document does not match template: trailing text");
    }

    std::string problem = validate(r);
    if (!problem.empty()) throw DataError("parsed document fails validation: " + problem);
    return r;
}

Corpus::Corpus(std::vector<Document> docs) : docs_(std::move(docs)) {
    by_id_.reserve(docs_.size());
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        auto [it, inserted] = by_id_.emplace(docs_[i].doc_id, i);
        if (!inserted)
            throw DataError("corpus: duplicate doc_id " + std::to_string(docs_[i].doc_id));
    }
}

const Document* Corpus::find(std::int64_t doc_id) const {
    auto it = by_id_.find(doc_id);
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

const Document& Corpus::at(std::int64_t doc_id) const {
    const Document* doc = find(doc_id);
    if (!doc) throw DataError("corpus: no document with doc_id " + std::to_string(doc_id));
    return *doc;
}

void Corpus::save_jsonl(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (const auto& d : docs_) {
        nlohmann::json j;
        j["doc_id"] = d.doc_id;
        j["text"] = d.text;
        j["mode"] = d.mode ? nlohmann::json(std::string(to_string(*d.mode))) : nlohmann::json();
        j["source_dataset"] = d.source_dataset;
        out << j.dump() << "\n";
    }
}

Corpus Corpus::load_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    std::vector<Document> docs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DataError("corpus jsonl: bad line in " + path);
        Document d;
        d.doc_id = j.at("doc_id").get<std::int64_t>();
        d.text = j.at("text").get<std::string>();
        if (!j.at("mode").is_null()) {
            auto mode = mode_from_string(j.at("mode").get<std::string>());
            if (!mode) throw DataError("corpus jsonl: unknown mode in " + path);
            d.mode = mode;
        }
        d.source_dataset = j.value("source_dataset", "");
        docs.push_back(std::move(d));
    }
    return Corpus(std::move(docs));
}

}  // namespace tmc
