#include "tmc/trip_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "tmc/csv.hpp"
#include "tmc/errors.hpp"
#include "tmc/random.hpp"

namespace tmc {

namespace {

template <std::size_t N>
bool in_vocab(const std::array<std::string_view, N>& vocab, std::string_view value) {
    return std::find(vocab.begin(), vocab.end(), value) != vocab.end();
}

std::optional<double> parse_double(const std::string& text) {
    if (text.empty()) return std::nullopt;
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return value;
}

std::optional<std::int64_t> parse_int(const std::string& text) {
    if (text.empty()) return std::nullopt;
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

std::string num_to_string(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(TripMode mode) {
    switch (mode) {
        case TripMode::Drive: return "Drive";
        case TripMode::Walk: return "Walk";
        case TripMode::Transit: return "Transit";
        case TripMode::BikeMicromobility: return "Bike/Micromobility";
    }
    return "Drive";
}

std::optional<TripMode> mode_from_string(std::string_view text) {
    for (TripMode m : kModeOrder) {
        if (text == to_string(m)) return m;
    }
    return std::nullopt;
}

std::string validate(const TripRecord& r) {
    if (!in_vocab(kAgeBands, r.age_band)) return "unknown age band: " + r.age_band;
    if (!in_vocab(kGenders, r.gender)) return "unknown gender: " + r.gender;
    if (!in_vocab(kEducationLevels, r.education)) return "unknown education: " + r.education;
    if (!in_vocab(kIncomeBands, r.income_band)) return "unknown income band: " + r.income_band;
    if (!in_vocab(kTripPurposes, r.trip_purpose)) return "unknown purpose: " + r.trip_purpose;
    if (!(r.household_vehicles >= 0.0) || !std::isfinite(r.household_vehicles))
        return "household_vehicles must be >= 0";
    if (!(r.trip_distance_miles >= 0.0) || !std::isfinite(r.trip_distance_miles))
        return "trip_distance_miles must be >= 0";
    if (!(r.start_time_hours >= 0.0 && r.start_time_hours < 24.0))
        return "start_time_hours must be in [0, 24)";
    return "";
}

LoadResult load_csv(const std::string& path, const ColumnMap& columns) {
    CsvTable table = read_csv(path);

    auto col = [&](const std::string& name) {
        int idx = table.column(name);
        if (idx < 0) throw DataError("csv: missing mapped column: " + name);
        return idx;
    };
    const int c_id = col(columns.record_id);
    const int c_age = col(columns.age);
    const int c_gender = col(columns.gender);
    const int c_edu = col(columns.education);
    const int c_income = col(columns.income);
    const int c_veh = col(columns.vehicles);
    const int c_dist = col(columns.distance);
    const int c_time = col(columns.start_time);
    const int c_purpose = col(columns.purpose);
    const int c_mode = col(columns.mode);

    LoadResult result;
    result.dataset.name = path;
    result.dataset.source = path;
    std::unordered_set<std::int64_t> seen_ids;

    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) {
            ++result.dropped_rows;
            continue;
        }
        TripRecord r;
        auto id = parse_int(row[c_id]);
        auto veh = parse_double(row[c_veh]);
        auto dist = parse_double(row[c_dist]);
        auto time = parse_double(row[c_time]);
        if (!id || !veh || !dist || !time) {
            ++result.dropped_rows;
            continue;
        }
        r.record_id = *id;
        r.age_band = row[c_age];
        r.gender = row[c_gender];
        r.education = row[c_edu];
        r.income_band = row[c_income];
        r.household_vehicles = *veh;
        r.trip_distance_miles = *dist;
        r.start_time_hours = *time;
        r.trip_purpose = row[c_purpose];
        if (!row[c_mode].empty()) {
            auto mode = mode_from_string(row[c_mode]);
            if (!mode) {
                ++result.dropped_rows;
                continue;
            }
            r.mode = mode;
        }
        if (!validate(r).empty() || seen_ids.count(r.record_id)) {
            ++result.dropped_rows;
            continue;
        }
        seen_ids.insert(r.record_id);
        result.dataset.records.push_back(std::move(r));
    }

    if (result.dataset.records.empty()) throw DataError("csv: zero valid rows in " + path);
    return result;
}

void write_csv(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "record_id,age,gender,education,income,vehicles,distance_miles,start_time,purpose,mode\n";
    for (const auto& r : dataset.records) {
        std::vector<std::string> fields = {
            std::to_string(r.record_id),
            r.age_band,
            r.gender,
            r.education,
            r.income_band,
            num_to_string(r.household_vehicles),
            num_to_string(r.trip_distance_miles),
            num_to_string(r.start_time_hours),
            r.trip_purpose,
            r.mode ? std::string(to_string(*r.mode)) : std::string(),
        };
        out << csv_join(fields) << "\n";
    }
}

SplitResult split(const Dataset& dataset, double test_fraction, std::uint64_t seed,
                  bool stratified) {
    if (dataset.records.empty()) throw DataError("split: empty dataset");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("split: test_fraction must be in (0,1)");
    for (const auto& r : dataset.records) {
        if (!r.mode) throw DataError("split: unlabeled record " + std::to_string(r.record_id));
    }

    const std::size_t n = dataset.records.size();
    const auto test_n = static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction));
    if (test_n == 0) throw ConfigError("split: test set would be empty");
    if (test_n == n) throw ConfigError("split: train set would be empty");

    Rng rng(seed);
    std::unordered_set<std::size_t> test_idx;

    if (!stratified) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        test_idx.insert(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_n));
    } else {
        std::array<std::vector<std::size_t>, kNumModes> by_class;
        for (std::size_t i = 0; i < n; ++i)
            by_class[mode_index(*dataset.records[i].mode)].push_back(i);

        std::array<std::size_t, kNumModes> quota{};
        std::array<double, kNumModes> frac{};
        std::size_t assigned = 0;
        for (int c = 0; c < kNumModes; ++c) {
            double exact = static_cast<double>(by_class[c].size()) * test_fraction;
            quota[c] = static_cast<std::size_t>(std::floor(exact));
            frac[c] = exact - std::floor(exact);
            assigned += quota[c];
        }
        // Largest-remainder top-up so the global count matches floor(n*f).
        std::array<int, kNumModes> order = {0, 1, 2, 3};
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return frac[a] > frac[b]; });
        for (int k = 0; assigned < test_n; ++k) {
            int c = order[static_cast<std::size_t>(k) % kNumModes];
            if (quota[c] < by_class[c].size()) {
                ++quota[c];
                ++assigned;
            }
        }
        for (int c = 0; c < kNumModes; ++c) {
            rng.shuffle(by_class[c]);
            for (std::size_t k = 0; k < quota[c]; ++k) test_idx.insert(by_class[c][k]);
        }
    }

    SplitResult result;
    result.train.name = dataset.name + "/train";
    result.train.source = dataset.source;
    result.test.name = dataset.name + "/test";
    result.test.source = dataset.source;
    for (std::size_t i = 0; i < n; ++i) {
        const TripRecord& r = dataset.records[i];
        if (test_idx.count(i)) {
            TripRecord masked = r;
            masked.mode.reset();
            result.test.records.push_back(std::move(masked));
            result.truth.emplace_back(r.record_id, *r.mode);
        } else {
            result.train.records.push_back(r);
        }
    }
    return result;
}

void write_truth_csv(const std::vector<TruthEntry>& truth, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "record_id,mode\n";
    for (const auto& [id, mode] : truth)
        out << id << "," << csv_escape(std::string(to_string(mode))) << "\n";
}

std::vector<TruthEntry> load_truth_csv(const std::string& path) {
    CsvTable table = read_csv(path);
    int c_id = table.column("record_id");
    int c_mode = table.column("mode");
    if (c_id < 0 || c_mode < 0) throw DataError("truth csv: need record_id,mode columns");
    std::vector<TruthEntry> truth;
    for (const auto& row : table.rows) {
        auto id = parse_int(row[c_id]);
        auto mode = mode_from_string(row[c_mode]);
        if (!id || !mode) throw DataError("truth csv: bad row in " + path);
        truth.emplace_back(*id, *mode);
    }
    return truth;
}

SyntheticProfile profile_from_string(std::string_view name) {
    if (name == "marginal") return SyntheticProfile::Marginal;
    if (name == "separable") return SyntheticProfile::Separable;
    throw ConfigError("unknown synthetic profile: " + std::string(name));
}

TripMode separable_rule(double distance_miles, double vehicles) {
    if (distance_miles < 0.8) return TripMode::Walk;
    if (vehicles >= 1.0) return TripMode::Drive;
    if (distance_miles > 3.0) return TripMode::Transit;
    return TripMode::BikeMicromobility;
}

namespace {

// Survey marginal frequencies used by the generator.
constexpr std::array<double, 4> kModeShares = {44.64, 36.21, 13.31, 5.83};
constexpr std::array<double, 7> kAgeShares = {10.12, 30.80, 26.59, 12.57, 9.69, 7.87, 2.35};
constexpr std::array<double, 3> kGenderShares = {44.29, 53.74, 1.97};
constexpr std::array<double, 7> kEducationShares = {0.88, 5.30, 8.39, 0.49, 4.50, 44.22, 36.21};
constexpr std::array<double, 6> kIncomeShares = {6.39, 15.70, 11.77, 16.33, 29.79, 20.02};
constexpr std::array<double, 10> kPurposeShares = {37.72, 13.70, 16.26, 11.98,
                                                   7.69,  4.92,  4.60,  2.39, 0.63, 0.11};

// Household vehicle counts: mean 1.03, SD ~0.79.
constexpr std::array<double, 4> kVehicleCounts = {0, 1, 2, 3};
constexpr std::array<double, 4> kVehicleShares = {0.25, 0.52, 0.18, 0.05};

// Trip distance, marginal profile: lognormal matched to mean 2.28, SD 2.33.
constexpr double kDistanceLogMu = 0.466610;
constexpr double kDistanceLogSigma = 0.845653;

// Trip distance, separable profile: one support point inside each zone of
// the label rule (d < 0.8, 0.8 <= d <= 3, d > 3), with masses solved so the
// mean is 2.28 and the SD 2.33. The wide gaps between zones keep the label
// function margin-separated, which pins the classification ceiling at 100%
// for this profile, and the repeated distance values make same-zone
// neighbors exact token matches for the serialized text.
constexpr std::array<double, 3> kSeparableDistances = {0.1, 2.9, 8.9};
constexpr std::array<double, 3> kSeparableDistanceShares = {0.38688, 0.53590, 0.07722};

// Vehicle ownership per distance zone, separable profile. Short trips skew
// to zero-vehicle households, the way urban survey extracts do; the
// zone-weighted mixture reproduces the marginal counts above (mean 1.03,
// SD 0.79).
constexpr std::array<std::array<double, 4>, 3> kSeparableVehicleSharesByZone = {{
    {0.550000, 0.312000, 0.108000, 0.030000},  // d = 0.1
    {0.038200, 0.666800, 0.230900, 0.064100},  // d = 2.9
    {0.216600, 0.543200, 0.188000, 0.052200},  // d = 8.9
}};

// Start time of day: mean 14.08, SD 4.32.
constexpr double kStartTimeMean = 14.08;
constexpr double kStartTimeSd = 4.32;

double quantize_tenths(double value) { return std::round(value * 10.0) / 10.0; }

double sample_start_time(Rng& rng) {
    double t = rng.normal(kStartTimeMean, kStartTimeSd);
    t = std::clamp(t, 0.0, 23.0 + 59.0 / 60.0);
    // Whole minutes, so serialized H:MM round-trips exactly.
    int hh = static_cast<int>(t);
    int mm = static_cast<int>(std::round((t - hh) * 60.0));
    if (mm == 60) {
        mm = 0;
        hh = std::min(hh + 1, 23);
    }
    return hh + mm / 60.0;
}

double sample_marginal_distance(Rng& rng) {
    double d = std::exp(kDistanceLogMu + kDistanceLogSigma * rng.normal());
    d = quantize_tenths(d);
    return std::max(d, 0.1);
}

}  // namespace

Dataset generate_synthetic(std::size_t n, SyntheticProfile profile, std::uint64_t seed) {
    if (n < 4) throw ConfigError("generate_synthetic: n must be >= 4");

    Dataset ds;
    ds.name = profile == SyntheticProfile::Marginal ? "synthetic-marginal" : "synthetic-separable";
    ds.source = "synthetic";
    ds.records.reserve(n);

    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        TripRecord r;
        r.record_id = static_cast<std::int64_t>(i + 1);
        r.age_band = kAgeBands[rng.categorical(kAgeShares)];
        r.gender = kGenders[rng.categorical(kGenderShares)];
        r.education = kEducationLevels[rng.categorical(kEducationShares)];
        r.income_band = kIncomeBands[rng.categorical(kIncomeShares)];
        r.trip_purpose = kTripPurposes[rng.categorical(kPurposeShares)];
        r.start_time_hours = sample_start_time(rng);

        if (profile == SyntheticProfile::Marginal) {
            r.household_vehicles = kVehicleCounts[rng.categorical(kVehicleShares)];
            r.trip_distance_miles = sample_marginal_distance(rng);
            r.mode = kModeOrder[rng.categorical(kModeShares)];
        } else {
            std::size_t zone = rng.categorical(kSeparableDistanceShares);
            r.trip_distance_miles = kSeparableDistances[zone];
            r.household_vehicles =
                kVehicleCounts[rng.categorical(kSeparableVehicleSharesByZone[zone])];
            r.mode = separable_rule(r.trip_distance_miles, r.household_vehicles);
        }
        ds.records.push_back(std::move(r));
    }
    return ds;
}

}  // namespace tmc
