#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tmc/llm_gateway.hpp"
#include "tmc/trip_data.hpp"

namespace tmc {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    // Set when the precision (or recall) denominator was empty and the
    // zero convention applied.
    bool zero_division = false;
};

struct MetricsReport {
    double accuracy = 0.0;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;  // equals accuracy for single-label multiclass
    double weighted_f1 = 0.0;
    std::array<ClassMetrics, kNumModes> per_class{};
    // rows = true mode, cols = predicted mode, canonical order
    std::array<std::array<std::size_t, kNumModes>, kNumModes> confusion{};
    std::size_t n = 0;
    std::size_t fallback_count = 0;

    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
    std::string to_text() const;
    std::string to_csv() const;
};

using TruthTable = std::map<std::int64_t, TripMode>;

TruthTable truth_table(const std::vector<TruthEntry>& entries);

// Per-class one-vs-rest precision/recall/F1 with true-class supports as
// weights. Every prediction id must be present in truth; duplicates and
// empty input are errors.
MetricsReport score(const std::vector<Prediction>& predictions, const TruthTable& truth);

struct ComparisonRow {
    std::string name;  // e.g. "oracle/balanced_rerank"
    MetricsReport report;
};

// Side-by-side table over several runs, best value per metric flagged.
struct ComparisonTable {
    std::vector<ComparisonRow> rows;

    std::string to_text() const;
    std::string to_csv() const;
    nlohmann::json to_json() const;
};

ComparisonTable compare(std::vector<ComparisonRow> rows);

}  // namespace tmc
