#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tmc/errors.hpp"
#include "tmc/runner.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string strategy;
    std::string backend;
    std::string model;
    std::string out_dir;
    int k = 0;
    int k_prime = 0;
    std::uint64_t seed = 0;
    int max_inflight = 0;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
    sub->add_option("--config", flags.config_path, "JSON run config file");
    sub->add_option("--strategy", flags.strategy,
                    "basic|balanced|rerank|balanced_rerank|zero_shot");
    sub->add_option("--backend", flags.backend, "remote|mock|oracle");
    sub->add_option("--model", flags.model, "LLM model name");
    sub->add_option("--k", flags.k, "final context size");
    sub->add_option("--k-prime", flags.k_prime, "candidate pool size for re-ranked strategies");
    sub->add_option("--seed", flags.seed, "random seed");
    sub->add_option("--max-inflight", flags.max_inflight, "prediction parallelism cap");
    sub->add_option("--out", flags.out_dir, "artifact directory for this run");
}

tmc::RunConfig make_config(const CLI::App* sub, const CommonFlags& flags) {
    tmc::RunConfig cfg = flags.config_path.empty()
                             ? tmc::RunConfig{}
                             : tmc::RunConfig::from_json_file(flags.config_path);
    if (sub->count("--strategy")) cfg.strategy.strategy = tmc::strategy_from_string(flags.strategy);
    if (sub->count("--backend")) cfg.llm.backend = tmc::llm_backend_from_string(flags.backend);
    if (sub->count("--model")) cfg.llm.model_name = flags.model;
    if (sub->count("--k")) cfg.strategy.k = flags.k;
    if (sub->count("--k-prime")) cfg.strategy.k_prime = flags.k_prime;
    if (sub->count("--seed")) cfg.seed = flags.seed;
    if (sub->count("--max-inflight")) cfg.max_inflight = flags.max_inflight;
    if (sub->count("--out")) cfg.out_dir = flags.out_dir;
    cfg.validate();
    return cfg;
}

void print_histogram(const tmc::IndexStats& stats) {
    std::cout << "indexed " << stats.entries << " documents\n";
    for (int c = 0; c < tmc::kNumModes; ++c) {
        std::cout << "  " << tmc::to_string(tmc::kModeOrder[c]) << ": "
                  << stats.class_histogram[c] << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Travel mode choice prediction with retrieval-augmented LLM pipelines"};
    app.require_subcommand(1);

    CommonFlags flags;

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic survey dataset");
    std::size_t synth_n = 1000;
    std::string synth_profile = "marginal";
    std::string synth_out = "synthetic.csv";
    synth->add_option("--n", synth_n, "number of records")->required();
    synth->add_option("--profile", synth_profile, "marginal|separable");
    synth->add_option("--out-csv", synth_out, "output CSV path");
    add_common(synth, flags);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "clean and split a survey CSV");
    std::string ingest_raw;
    double ingest_fraction = 0.2;
    bool ingest_stratified = false;
    bool ingest_as_test = false;
    ingest->add_option("--raw", ingest_raw, "raw survey CSV")->required();
    ingest->add_option("--test-fraction", ingest_fraction, "test share, in (0,1)");
    ingest->add_flag("--stratified", ingest_stratified, "stratify the split by mode");
    ingest->add_flag("--as-test", ingest_as_test,
                     "treat the whole file as an external test set (masked queries + truth)");
    std::int64_t ingest_id_offset = 0;
    ingest->add_option("--id-offset", ingest_id_offset,
                       "shift record ids (keeps external id spaces disjoint from the index)");
    add_common(ingest, flags);

    // index
    auto* index = app.add_subcommand("index", "embed the train split and build the vector index");
    std::string index_train, index_truth;
    index->add_option("--train", index_train, "train CSV (labeled)");
    index->add_option("--truth", index_truth, "truth CSV used for the leakage guard");
    add_common(index, flags);

    // predict
    auto* predict = app.add_subcommand("predict", "run retrieval + LLM prediction over queries");
    std::string predict_test;
    long predict_limit = -1;
    predict->add_option("--test", predict_test, "masked query CSV");
    predict->add_option("--limit", predict_limit, "stop after this many new predictions");
    add_common(predict, flags);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score predictions against the truth table");
    std::string eval_truth;
    evaluate->add_option("--truth", eval_truth, "truth CSV");
    add_common(evaluate, flags);

    // compare
    auto* cmp = app.add_subcommand("compare", "tabulate several report.json files");
    std::vector<std::string> cmp_reports;
    std::string cmp_out = "comparison";
    cmp->add_option("reports", cmp_reports, "report.json paths (or name=path pairs)")->required();
    cmp->add_option("--out-prefix", cmp_out, "output prefix for .txt/.csv/.json");

    // mnl
    auto* mnl = app.add_subcommand("mnl", "fit and evaluate the multinomial logit baseline");
    std::string mnl_train, mnl_test, mnl_truth;
    tmc::MnlConfig mnl_config;
    mnl->add_option("--train", mnl_train, "train CSV (labeled)");
    mnl->add_option("--test", mnl_test, "masked query CSV");
    mnl->add_option("--truth", mnl_truth, "truth CSV");
    mnl->add_option("--lr", mnl_config.learning_rate, "learning rate");
    mnl->add_option("--l2", mnl_config.l2_strength, "L2 strength");
    mnl->add_option("--epochs", mnl_config.max_epochs, "max epochs");
    add_common(mnl, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth) {
            tmc::RunConfig cfg = make_config(synth, flags);
            tmc::Dataset ds = tmc::run_synth(synth_n, tmc::profile_from_string(synth_profile),
                                             synth->count("--seed") ? cfg.seed : 42, synth_out);
            std::cout << "wrote " << ds.records.size() << " records to " << synth_out << "\n";
        } else if (*ingest) {
            tmc::RunConfig cfg = make_config(ingest, flags);
            if (ingest->count("--test-fraction")) cfg.test_fraction = ingest_fraction;
            cfg.stratified = ingest_stratified;
            tmc::IngestResult r = tmc::run_ingest(cfg, ingest_raw, ingest_as_test, ingest_id_offset);
            std::cout << "loaded " << r.loaded << " records (" << r.dropped << " dropped)\n";
            if (ingest_as_test) {
                std::cout << "external test set: " << r.test_size << " masked queries\n";
            } else {
                std::cout << "train " << r.train_size << ", test " << r.test_size << "\n";
            }
            std::cout << "artifacts in " << cfg.out_dir << "\n";
        } else if (*index) {
            tmc::RunConfig cfg = make_config(index, flags);
            if (index->count("--train")) cfg.train_csv = index_train;
            if (index->count("--truth")) cfg.truth_csv = index_truth;
            tmc::save_config_snapshot(cfg);
            print_histogram(tmc::run_index(cfg));
        } else if (*predict) {
            tmc::RunConfig cfg = make_config(predict, flags);
            if (predict->count("--test")) cfg.test_csv = predict_test;
            tmc::save_config_snapshot(cfg);
            tmc::PredictStats stats = tmc::run_predict(cfg, predict_limit);
            std::cout << "predicted " << stats.completed << " of " << stats.total_queries
                      << " queries (" << stats.resumed_from << " already done, "
                      << stats.fallbacks << " fallbacks)\n";
        } else if (*evaluate) {
            tmc::RunConfig cfg = make_config(evaluate, flags);
            if (evaluate->count("--truth")) cfg.truth_csv = eval_truth;
            tmc::MetricsReport report = tmc::run_evaluate(cfg);
            std::cout << report.to_text();
        } else if (*cmp) {
            std::vector<std::pair<std::string, std::string>> named;
            for (const auto& entry : cmp_reports) {
                auto eq = entry.find('=');
                if (eq == std::string::npos) {
                    named.emplace_back(entry, entry);
                } else {
                    named.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
                }
            }
            tmc::ComparisonTable table = tmc::run_compare(named, cmp_out);
            std::cout << table.to_text();
        } else if (*mnl) {
            tmc::RunConfig cfg = make_config(mnl, flags);
            if (mnl->count("--train")) cfg.train_csv = mnl_train;
            if (mnl->count("--test")) cfg.test_csv = mnl_test;
            if (mnl->count("--truth")) cfg.truth_csv = mnl_truth;
            tmc::MnlRunResult r = tmc::run_mnl(cfg, mnl_config);
            std::cout << "mnl: " << r.fit.epochs << " epochs, train accuracy "
                      << r.train_accuracy << "\n";
            std::cout << r.report.to_text();
        }
    } catch (const tmc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const tmc::BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 2;
    } catch (const tmc::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
