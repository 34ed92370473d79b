#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tmc/embedding.hpp"
#include "tmc/trip_data.hpp"
#include "tmc/vector_index.hpp"

namespace tmc::test {

// Scratch directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("tmc_" + tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        if (keep_) return;
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    // Leave the directory behind (artifacts shared across test cases).
    void keep() { keep_ = true; }

private:
    std::filesystem::path path_;
    bool keep_ = false;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

// ---------------------------------------------------------------------------
// Independent oracles. These deliberately do not call the library search or
// scoring paths they are used to check.
// ---------------------------------------------------------------------------

struct NaiveHit {
    std::int64_t doc_id;
    double score;
    TripMode mode;
};

// Brute-force cosine scan with its own arithmetic and a stable sort.
inline std::vector<NaiveHit> naive_scan(const std::vector<VectorIndex::Entry>& entries,
                                        const std::vector<float>& query, std::size_t k) {
    std::vector<NaiveHit> hits;
    for (const auto& e : entries) {
        double dot = 0.0, qq = 0.0, ee = 0.0;
        for (std::size_t i = 0; i < query.size(); ++i) {
            dot += double(query[i]) * double(e.vector[i]);
            qq += double(query[i]) * double(query[i]);
            ee += double(e.vector[i]) * double(e.vector[i]);
        }
        hits.push_back(NaiveHit{e.doc_id, dot / (std::sqrt(qq) * std::sqrt(ee)), e.mode});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const NaiveHit& a, const NaiveHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

// Random unit vector from a seeded engine.
inline EmbeddingVector random_unit_vector(std::mt19937_64& eng, int dim) {
    EmbeddingVector v(static_cast<std::size_t>(dim));
    double norm2 = 0.0;
    for (auto& x : v) {
        // Box-Muller from raw bits keeps this independent of libstdc++
        // distribution internals.
        double u1 = ((eng() >> 11) + 0.5) * 0x1.0p-53;
        double u2 = ((eng() >> 11) + 0.5) * 0x1.0p-53;
        double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
        x = static_cast<float>(g);
        norm2 += g * g;
    }
    double norm = std::sqrt(norm2);
    for (auto& x : v) x = static_cast<float>(x / norm);
    return v;
}

inline VectorIndex random_index(std::mt19937_64& eng, std::size_t n, int dim) {
    std::vector<VectorIndex::Entry> entries;
    entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        VectorIndex::Entry e;
        e.doc_id = static_cast<std::int64_t>(i + 1);
        e.mode = kModeOrder[eng() % kNumModes];
        e.vector = random_unit_vector(eng, dim);
        entries.push_back(std::move(e));
    }
    return VectorIndex(std::move(entries), dim, "test-template", "test-embedder");
}

// Field-space distance used by the 1-NN ceiling oracle (survey SD scales).
inline double field_distance(const TripRecord& a, const TripRecord& b) {
    double d = 0.0;
    d += a.age_band != b.age_band ? 1.0 : 0.0;
    d += a.gender != b.gender ? 1.0 : 0.0;
    d += a.education != b.education ? 1.0 : 0.0;
    d += a.income_band != b.income_band ? 1.0 : 0.0;
    d += a.trip_purpose != b.trip_purpose ? 1.0 : 0.0;
    d += std::abs(a.trip_distance_miles - b.trip_distance_miles) / 2.33;
    d += std::abs(a.start_time_hours - b.start_time_hours) / 4.32;
    d += std::abs(a.household_vehicles - b.household_vehicles) / 0.78;
    return d;
}

inline double one_nn_accuracy(const Dataset& train, const Dataset& queries,
                              const std::vector<TruthEntry>& truth) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < queries.records.size(); ++i) {
        const TripRecord& q = queries.records[i];
        double best = std::numeric_limits<double>::infinity();
        TripMode best_mode = TripMode::Drive;
        for (const auto& t : train.records) {
            double d = field_distance(q, t);
            if (d < best) {
                best = d;
                best_mode = *t.mode;
            }
        }
        TripMode want = TripMode::Drive;
        for (const auto& [id, mode] : truth) {
            if (id == q.record_id) {
                want = mode;
                break;
            }
        }
        if (best_mode == want) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(queries.records.size());
}

}  // namespace tmc::test
