#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tmc {

// The four-alternative choice set. The declaration order is the canonical
// ordering used everywhere deterministic iteration over modes is needed.
enum class TripMode : std::uint8_t { Drive = 0, Walk = 1, Transit = 2, BikeMicromobility = 3 };

inline constexpr std::array<TripMode, 4> kModeOrder = {
    TripMode::Drive, TripMode::Walk, TripMode::Transit, TripMode::BikeMicromobility};
inline constexpr int kNumModes = 4;

std::string_view to_string(TripMode mode);
std::optional<TripMode> mode_from_string(std::string_view text);
inline int mode_index(TripMode mode) { return static_cast<int>(mode); }

// Closed vocabularies for the categorical fields. Any value outside these
// lists fails validation.
inline constexpr std::array<std::string_view, 7> kAgeBands = {
    "18-24", "25-34", "35-44", "45-54", "55-64", "65-74", "75 or older"};
inline constexpr std::array<std::string_view, 3> kGenders = {"Male", "Female", "Non-binary"};
inline constexpr std::array<std::string_view, 7> kEducationLevels = {
    "Less than high school", "High school",         "Some college",
    "Vocational/technical training", "Associates degree", "Bachelor degree",
    "Graduate degree"};
inline constexpr std::array<std::string_view, 6> kIncomeBands = {
    "Under $25,000",     "$25,000-$49,999",   "$50,000-$74,999",
    "$75,000-$99,999",   "$100,000-$199,999", "$200,000 or more"};
inline constexpr std::array<std::string_view, 10> kTripPurposes = {
    "Home",   "Work",  "Social/Recreation", "Shopping", "Meal",
    "Business/Errand", "Escort", "Overnight", "School", "Change mode"};

// One survey trip. `mode` is present on training records and absent on
// masked query-side test records.
struct TripRecord {
    std::int64_t record_id = -1;
    std::string age_band;
    std::string gender;
    std::string education;
    std::string income_band;
    double household_vehicles = 0.0;
    double trip_distance_miles = 0.0;
    double start_time_hours = 0.0;
    std::string trip_purpose;
    std::optional<TripMode> mode;

    bool operator==(const TripRecord&) const = default;
};

// Empty string when valid, else a description of the first violation.
std::string validate(const TripRecord& record);

struct Dataset {
    std::string name;
    std::string source;
    std::vector<TripRecord> records;
};

// Maps the canonical field names onto the CSV columns of a particular survey
// export. Defaults match the documented canonical header.
struct ColumnMap {
    std::string record_id = "record_id";
    std::string age = "age";
    std::string gender = "gender";
    std::string education = "education";
    std::string income = "income";
    std::string vehicles = "vehicles";
    std::string distance = "distance_miles";
    std::string start_time = "start_time";
    std::string purpose = "purpose";
    std::string mode = "mode";
};

struct LoadResult {
    Dataset dataset;
    std::size_t dropped_rows = 0;
};

// Reads a survey CSV, dropping (and counting) rows with missing or
// unparseable key fields. The mode column may be empty per row (masked
// queries); all other fields are required.
LoadResult load_csv(const std::string& path, const ColumnMap& columns = {});

void write_csv(const Dataset& dataset, const std::string& path);

using TruthEntry = std::pair<std::int64_t, TripMode>;

struct SplitResult {
    Dataset train;        // labeled
    Dataset test;         // masked: mode removed from every record
    std::vector<TruthEntry> truth;  // held-back test labels
};

// Deterministic 80/20-style split. Test size is floor(n * test_fraction).
// Requires every record to be labeled (the held-back truth table needs
// them). With `stratified`, per-class quotas use largest-remainder rounding
// so the total still equals floor(n * test_fraction).
SplitResult split(const Dataset& dataset, double test_fraction, std::uint64_t seed,
                  bool stratified = false);

void write_truth_csv(const std::vector<TruthEntry>& truth, const std::string& path);
std::vector<TruthEntry> load_truth_csv(const std::string& path);

enum class SyntheticProfile { Marginal, Separable };

SyntheticProfile profile_from_string(std::string_view name);

// In the separable profile the label is a deterministic function of
// distance and vehicle count, so an ideal classifier reaches 100%.
TripMode separable_rule(double distance_miles, double vehicles);

Dataset generate_synthetic(std::size_t n, SyntheticProfile profile, std::uint64_t seed);

}  // namespace tmc
