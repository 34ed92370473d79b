#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tmc/embedding.hpp"
#include "tmc/evaluation.hpp"
#include "tmc/llm_gateway.hpp"
#include "tmc/mnl.hpp"
#include "tmc/retrieval.hpp"
#include "tmc/trip_data.hpp"

namespace tmc {

// One experiment run: where the data lives, how to embed, retrieve and
// predict, and where artifacts go. Loadable from a JSON config file; CLI
// flags override individual fields.
struct RunConfig {
    std::string train_csv;
    std::string test_csv;
    std::string truth_csv;
    std::string out_dir = "run";
    std::uint64_t seed = 42;
    double test_fraction = 0.2;
    bool stratified = false;
    int max_inflight = 4;
    ColumnMap columns;
    EmbedderConfig embedder;
    StrategyConfig strategy;
    LlmBackendConfig llm;

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_json_file(const std::string& path);
    nlohmann::json to_json() const;

    // Throws ConfigError on inconsistent settings (e.g. k > k_prime).
    void validate() const;

    std::string index_path() const { return out_dir + "/index.bin"; }
    std::string corpus_path() const { return out_dir + "/corpus.jsonl"; }
    std::string predictions_path() const { return out_dir + "/predictions.jsonl"; }
};

void save_config_snapshot(const RunConfig& config);

// synth: writes a labeled synthetic dataset CSV.
Dataset run_synth(std::size_t n, SyntheticProfile profile, std::uint64_t seed,
                  const std::string& out_csv);

struct IngestResult {
    std::size_t loaded = 0;
    std::size_t dropped = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

// ingest: load + clean a survey CSV, split train/test with label masking,
// write train.csv/test.csv/truth.csv under out_dir. With as_test the whole
// file becomes masked queries + truth (external generalization sets).
// id_offset shifts every record_id, which keeps external id spaces disjoint
// from the indexed corpus.
IngestResult run_ingest(const RunConfig& config, const std::string& raw_csv, bool as_test,
                        std::int64_t id_offset = 0);

struct IndexStats {
    std::size_t entries = 0;
    std::array<std::size_t, kNumModes> class_histogram{};
};

// index: serialize the train split with labels, embed, persist index +
// corpus. Refuses to index any record whose id appears in the truth table
// (train/test leakage guard).
IndexStats run_index(const RunConfig& config);

struct PredictStats {
    std::size_t total_queries = 0;
    std::size_t completed = 0;
    std::size_t resumed_from = 0;
    std::size_t fallbacks = 0;
};

// predict: one Prediction per test trip with full retrieval audit,
// appended to predictions.jsonl in query order. Resumable: already
// completed ids are skipped. max_new limits how many new predictions are
// produced (-1 = no limit), which is also how the resume test interrupts a
// run cleanly.
PredictStats run_predict(const RunConfig& config, long max_new = -1);

// evaluate: score predictions against the truth table and write
// report.json/.csv/.txt under out_dir.
MetricsReport run_evaluate(const RunConfig& config);

// compare: side-by-side table over several report.json files.
ComparisonTable run_compare(const std::vector<std::pair<std::string, std::string>>& named_paths,
                            const std::string& out_prefix);

struct MnlRunResult {
    MnlFitInfo fit;
    MetricsReport report;
    double train_accuracy = 0.0;
};

// mnl: fit the baseline on the train split, score it on the test queries.
MnlRunResult run_mnl(const RunConfig& config, const MnlConfig& mnl_config = {});

std::vector<Prediction> load_predictions(const std::string& path);

}  // namespace tmc
