#include "tmc/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "tmc/errors.hpp"
#include "tmc/serialization.hpp"
#include "tmc/vector_index.hpp"

namespace fs = std::filesystem;

namespace tmc {

namespace {

EmbedderBackend embedder_backend_from_string(const std::string& name) {
    if (name == "local-hash") return EmbedderBackend::LocalHash;
    if (name == "remote") return EmbedderBackend::Remote;
    throw ConfigError("unknown embedder backend: " + name);
}

std::string embedder_backend_to_string(EmbedderBackend backend) {
    return backend == EmbedderBackend::LocalHash ? "local-hash" : "remote";
}

RerankerKind reranker_from_string(const std::string& name) {
    if (name == "reference") return RerankerKind::Reference;
    if (name == "remote") return RerankerKind::Remote;
    if (name == "identity") return RerankerKind::Identity;
    throw ConfigError("unknown reranker: " + name);
}

std::string reranker_to_string(RerankerKind kind) {
    switch (kind) {
        case RerankerKind::Reference: return "reference";
        case RerankerKind::Remote: return "remote";
        case RerankerKind::Identity: return "identity";
    }
    return "reference";
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << content;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    c.train_csv = j.value("train_csv", c.train_csv);
    c.test_csv = j.value("test_csv", c.test_csv);
    c.truth_csv = j.value("truth_csv", c.truth_csv);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.seed = j.value("seed", c.seed);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.stratified = j.value("stratified", c.stratified);
    c.max_inflight = j.value("max_inflight", c.max_inflight);

    if (j.contains("columns")) {
        const auto& cols = j["columns"];
        c.columns.record_id = cols.value("record_id", c.columns.record_id);
        c.columns.age = cols.value("age", c.columns.age);
        c.columns.gender = cols.value("gender", c.columns.gender);
        c.columns.education = cols.value("education", c.columns.education);
        c.columns.income = cols.value("income", c.columns.income);
        c.columns.vehicles = cols.value("vehicles", c.columns.vehicles);
        c.columns.distance = cols.value("distance", c.columns.distance);
        c.columns.start_time = cols.value("start_time", c.columns.start_time);
        c.columns.purpose = cols.value("purpose", c.columns.purpose);
        c.columns.mode = cols.value("mode", c.columns.mode);
    }
    if (j.contains("embedder")) {
        const auto& e = j["embedder"];
        c.embedder.backend =
            embedder_backend_from_string(e.value("backend", std::string("local-hash")));
        c.embedder.model_name = e.value("model_name", c.embedder.model_name);
        c.embedder.dim = e.value("dim", c.embedder.dim);
        c.embedder.endpoint = e.value("endpoint", c.embedder.endpoint);
        c.embedder.batch_size = e.value("batch_size", c.embedder.batch_size);
        c.embedder.api_key_env = e.value("api_key_env", c.embedder.api_key_env);
        c.embedder.max_retries = e.value("max_retries", c.embedder.max_retries);
        c.embedder.retry_backoff_ms = e.value("retry_backoff_ms", c.embedder.retry_backoff_ms);
    }
    if (j.contains("strategy")) {
        const auto& s = j["strategy"];
        c.strategy.strategy = strategy_from_string(s.value("strategy", std::string("basic")));
        c.strategy.k = s.value("k", c.strategy.k);
        c.strategy.k_prime = s.value("k_prime", c.strategy.k_prime);
        c.strategy.reranker = reranker_from_string(s.value("reranker", std::string("reference")));
        c.strategy.rerank_endpoint = s.value("rerank_endpoint", c.strategy.rerank_endpoint);
        c.strategy.rerank_model = s.value("rerank_model", c.strategy.rerank_model);
        c.strategy.rerank_api_key_env =
            s.value("rerank_api_key_env", c.strategy.rerank_api_key_env);
    }
    if (j.contains("llm")) {
        const auto& l = j["llm"];
        c.llm.backend = llm_backend_from_string(l.value("backend", std::string("oracle")));
        c.llm.model_name = l.value("model_name", c.llm.model_name);
        c.llm.endpoint = l.value("endpoint", c.llm.endpoint);
        c.llm.temperature = l.value("temperature", c.llm.temperature);
        if (l.contains("include_temperature") && !l["include_temperature"].is_null())
            c.llm.include_temperature = l["include_temperature"].get<bool>();
        c.llm.max_retries = l.value("max_retries", c.llm.max_retries);
        c.llm.retry_backoff_ms = l.value("retry_backoff_ms", c.llm.retry_backoff_ms);
        c.llm.cache_path = l.value("cache_path", c.llm.cache_path);
        c.llm.api_key_env = l.value("api_key_env", c.llm.api_key_env);
        c.llm.mock_strict = l.value("mock_strict", c.llm.mock_strict);
        c.llm.mock_script_path = l.value("mock_script", c.llm.mock_script_path);
    }
    c.validate();
    return c;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
    return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["train_csv"] = train_csv;
    j["test_csv"] = test_csv;
    j["truth_csv"] = truth_csv;
    j["out_dir"] = out_dir;
    j["seed"] = seed;
    j["test_fraction"] = test_fraction;
    j["stratified"] = stratified;
    j["max_inflight"] = max_inflight;
    j["columns"] = {{"record_id", columns.record_id}, {"age", columns.age},
                    {"gender", columns.gender},       {"education", columns.education},
                    {"income", columns.income},       {"vehicles", columns.vehicles},
                    {"distance", columns.distance},   {"start_time", columns.start_time},
                    {"purpose", columns.purpose},     {"mode", columns.mode}};
    j["embedder"] = {{"backend", embedder_backend_to_string(embedder.backend)},
                     {"model_name", embedder.model_name},
                     {"dim", embedder.dim},
                     {"endpoint", embedder.endpoint},
                     {"batch_size", embedder.batch_size},
                     {"api_key_env", embedder.api_key_env}};
    j["strategy"] = {{"strategy", std::string(to_string(strategy.strategy))},
                     {"k", strategy.k},
                     {"k_prime", strategy.k_prime},
                     {"reranker", reranker_to_string(strategy.reranker)},
                     {"rerank_endpoint", strategy.rerank_endpoint},
                     {"rerank_model", strategy.rerank_model},
                     {"rerank_api_key_env", strategy.rerank_api_key_env}};
    j["llm"] = {{"backend", std::string(to_string(llm.backend))},
                {"model_name", llm.model_name},
                {"endpoint", llm.endpoint},
                {"temperature", llm.temperature},
                {"include_temperature",
                 llm.include_temperature ? nlohmann::json(*llm.include_temperature)
                                         : nlohmann::json()},
                {"max_retries", llm.max_retries},
                {"cache_path", llm.cache_path},
                {"api_key_env", llm.api_key_env},
                {"mock_strict", llm.mock_strict},
                {"mock_script", llm.mock_script_path}};
    return j;
}

void RunConfig::validate() const {
    if (strategy.k < 1) throw ConfigError("strategy.k must be >= 1");
    if (strategy.k > strategy.k_prime)
        throw ConfigError("strategy config inconsistent: k > k_prime");
    if (max_inflight < 1) throw ConfigError("max_inflight must be >= 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("test_fraction must be in (0,1)");
    if (llm.temperature < 0.0) throw ConfigError("temperature must be >= 0");
    if (embedder.batch_size < 1) throw ConfigError("embedder batch_size must be >= 1");
}

void save_config_snapshot(const RunConfig& config) {
    fs::create_directories(config.out_dir);
    write_text_file(config.out_dir + "/config_snapshot.json", config.to_json().dump(2) + "\n");
}

Dataset run_synth(std::size_t n, SyntheticProfile profile, std::uint64_t seed,
                  const std::string& out_csv) {
    Dataset ds = generate_synthetic(n, profile, seed);
    if (!out_csv.empty()) {
        if (fs::path(out_csv).has_parent_path())
            fs::create_directories(fs::path(out_csv).parent_path());
        write_csv(ds, out_csv);
    }
    return ds;
}

IngestResult run_ingest(const RunConfig& config, const std::string& raw_csv, bool as_test,
                        std::int64_t id_offset) {
    fs::create_directories(config.out_dir);
    LoadResult loaded = load_csv(raw_csv, config.columns);
    if (id_offset != 0) {
        for (auto& r : loaded.dataset.records) r.record_id += id_offset;
    }

    IngestResult result;
    result.loaded = loaded.dataset.records.size();
    result.dropped = loaded.dropped_rows;

    if (as_test) {
        // External evaluation set: everything becomes a masked query.
        Dataset queries;
        queries.name = loaded.dataset.name + "/external-test";
        queries.source = loaded.dataset.source;
        std::vector<TruthEntry> truth;
        for (const auto& r : loaded.dataset.records) {
            if (!r.mode)
                throw DataError("ingest --as-test: record " + std::to_string(r.record_id) +
                                " is unlabeled; cannot build a truth table");
            TripRecord masked = r;
            masked.mode.reset();
            queries.records.push_back(std::move(masked));
            truth.emplace_back(r.record_id, *r.mode);
        }
        write_csv(queries, config.out_dir + "/test.csv");
        write_truth_csv(truth, config.out_dir + "/truth.csv");
        result.test_size = queries.records.size();
        return result;
    }

    SplitResult parts = split(loaded.dataset, config.test_fraction, config.seed, config.stratified);
    write_csv(parts.train, config.out_dir + "/train.csv");
    write_csv(parts.test, config.out_dir + "/test.csv");
    write_truth_csv(parts.truth, config.out_dir + "/truth.csv");
    result.train_size = parts.train.records.size();
    result.test_size = parts.test.records.size();
    return result;
}

IndexStats run_index(const RunConfig& config) {
    fs::create_directories(config.out_dir);
    LoadResult loaded = load_csv(config.train_csv, config.columns);
    for (const auto& r : loaded.dataset.records) {
        if (!r.mode)
            throw DataError("index: unlabeled training record " + std::to_string(r.record_id));
    }

    // Leakage guard: refuse to index anything that belongs to the test set.
    if (!config.truth_csv.empty() && fs::exists(config.truth_csv)) {
        std::set<std::int64_t> test_ids;
        for (const auto& [id, mode] : load_truth_csv(config.truth_csv)) test_ids.insert(id);
        for (const auto& r : loaded.dataset.records) {
            if (test_ids.count(r.record_id))
                throw DataError("index: training CSV contains test-split record " +
                                std::to_string(r.record_id) + " (leakage guard)");
        }
    }

    std::vector<Document> docs = serialize_dataset(loaded.dataset, /*include_label=*/true);
    std::vector<std::string> texts;
    texts.reserve(docs.size());
    for (const auto& d : docs) texts.push_back(d.text);

    auto embedder = make_embedder(config.embedder);
    std::vector<EmbeddingVector> vectors = embedder->embed_batch(texts);

    VectorIndex index = VectorIndex::build(docs, vectors, embedder->dim(),
                                           std::string(kTemplateVersion), embedder->fingerprint());
    index.save(config.index_path());
    Corpus(docs).save_jsonl(config.corpus_path());

    IndexStats stats;
    stats.entries = index.size();
    for (int c = 0; c < kNumModes; ++c)
        stats.class_histogram[c] = index.class_count(kModeOrder[c]);
    return stats;
}

std::vector<Prediction> load_predictions(const std::string& path) {
    std::vector<Prediction> predictions;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open predictions: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DataError("predictions: corrupt line in " + path);
        predictions.push_back(Prediction::from_json(j));
    }
    return predictions;
}

namespace {

// Re-reads an interrupted predictions file, dropping a torn trailing line,
// and returns the ids already completed (file is rewritten when a torn
// line had to be removed).
std::set<std::int64_t> recover_predictions(const std::string& path) {
    std::set<std::int64_t> done;
    if (!fs::exists(path)) return done;
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    std::string good;
    std::size_t pos = 0;
    while (pos < content.size()) {
        auto eol = content.find('\n', pos);
        if (eol == std::string::npos) break;  // no newline: torn tail
        std::string line = content.substr(pos, eol - pos);
        if (!line.empty()) {
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("query_doc_id")) break;
            done.insert(j["query_doc_id"].get<std::int64_t>());
        }
        good += line;
        good += "\n";
        pos = eol + 1;
    }
    if (good.size() != content.size()) write_text_file(path, good);
    return done;
}

}  // namespace

PredictStats run_predict(const RunConfig& config, long max_new) {
    fs::create_directories(config.out_dir);
    auto embedder = make_embedder(config.embedder);

    VectorIndex index = VectorIndex::load(config.index_path());
    index.require_compatible(embedder->dim(), kTemplateVersion, embedder->fingerprint());
    Corpus corpus = Corpus::load_jsonl(config.corpus_path());
    for (const auto& e : index.entries()) {
        if (!corpus.find(e.doc_id))
            throw DataError("predict: index entry " + std::to_string(e.doc_id) +
                            " missing from corpus store");
    }

    LoadResult loaded = load_csv(config.test_csv, config.columns);
    for (const auto& r : loaded.dataset.records) {
        if (r.mode)
            throw DataError("predict: test record " + std::to_string(r.record_id) +
                            " carries a mode label; queries must be masked");
    }

    // Leakage guard: the knowledge base and the query set must be disjoint.
    for (const auto& r : loaded.dataset.records) {
        if (index.contains(r.record_id))
            throw DataError("predict: query id " + std::to_string(r.record_id) +
                            " is present in the index (leakage guard)");
    }

    PredictStats stats;
    stats.total_queries = loaded.dataset.records.size();
    std::set<std::int64_t> done = recover_predictions(config.predictions_path());
    stats.resumed_from = done.size();

    std::vector<const TripRecord*> pending;
    for (const auto& r : loaded.dataset.records) {
        if (!done.count(r.record_id)) pending.push_back(&r);
    }
    if (max_new >= 0 && pending.size() > static_cast<std::size_t>(max_new))
        pending.resize(static_cast<std::size_t>(max_new));

    // Serialize + embed the pending queries up front (one batched call).
    std::vector<Document> query_docs;
    query_docs.reserve(pending.size());
    std::vector<std::string> query_texts;
    query_texts.reserve(pending.size());
    for (const TripRecord* r : pending) {
        Document d = serialize_trip(*r, /*include_label=*/false);
        d.source_dataset = loaded.dataset.name;
        query_texts.push_back(d.text);
        query_docs.push_back(std::move(d));
    }
    std::vector<EmbeddingVector> query_vecs;
    const bool needs_vectors = config.strategy.strategy != Strategy::ZeroShot;
    if (needs_vectors && !query_texts.empty()) query_vecs = embedder->embed_batch(query_texts);

    LlmClient client(config.llm);
    std::unique_ptr<Reranker> reranker;
    if (config.strategy.strategy == Strategy::Rerank ||
        config.strategy.strategy == Strategy::BalancedRerank)
        reranker = make_reranker(config.strategy);

    auto predict_at = [&](std::size_t i) {
        const Document& query_doc = query_docs[i];
        std::optional<RetrievalResult> retrieval;
        switch (config.strategy.strategy) {
            case Strategy::ZeroShot:
                break;
            case Strategy::Basic:
                retrieval = retrieve_basic(index, query_vecs[i], config.strategy.k,
                                           query_doc.doc_id);
                break;
            case Strategy::Balanced:
                retrieval = retrieve_balanced(index, query_vecs[i], config.strategy.k,
                                              query_doc.doc_id);
                break;
            case Strategy::Rerank:
                retrieval = retrieve_rerank(index, query_vecs[i], query_doc.text, corpus,
                                            config.strategy.k_prime, config.strategy.k, *reranker,
                                            query_doc.doc_id);
                break;
            case Strategy::BalancedRerank:
                retrieval = retrieve_balanced_rerank(index, query_vecs[i], query_doc.text, corpus,
                                                     config.strategy.k_prime, config.strategy.k,
                                                     *reranker, query_doc.doc_id);
                break;
        }
        if (retrieval) {
            for (const auto& item : retrieval->items) {
                if (item.doc_id == query_doc.doc_id)
                    throw DataError("predict: retrieval returned the query's own document");
            }
        }
        return predict_one(query_doc, retrieval, client, corpus);
    };

    std::ofstream out(config.predictions_path(), std::ios::app | std::ios::binary);
    if (!out) throw DataError("cannot append to " + config.predictions_path());

    const auto inflight = static_cast<std::size_t>(config.max_inflight);
    for (std::size_t begin = 0; begin < pending.size(); begin += inflight) {
        std::size_t end = std::min(begin + inflight, pending.size());
        std::vector<std::future<Prediction>> futures;
        futures.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i)
            futures.push_back(std::async(std::launch::async, predict_at, i));
        for (std::size_t i = begin; i < end; ++i) {
            Prediction p = futures[i - begin].get();
            if (p.fallback_used) ++stats.fallbacks;
            out << p.to_json().dump() << "\n";
            ++stats.completed;
        }
        out.flush();
    }
    return stats;
}

MetricsReport run_evaluate(const RunConfig& config) {
    std::vector<Prediction> predictions = load_predictions(config.predictions_path());
    TruthTable truth = truth_table(load_truth_csv(config.truth_csv));
    MetricsReport report = score(predictions, truth);
    fs::create_directories(config.out_dir);
    write_text_file(config.out_dir + "/report.json", report.to_json().dump(2) + "\n");
    write_text_file(config.out_dir + "/report.csv", report.to_csv());
    write_text_file(config.out_dir + "/report.txt", report.to_text());
    return report;
}

ComparisonTable run_compare(const std::vector<std::pair<std::string, std::string>>& named_paths,
                            const std::string& out_prefix) {
    std::vector<ComparisonRow> rows;
    for (const auto& [name, path] : named_paths) {
        std::ifstream in(path);
        if (!in) throw DataError("compare: cannot open report " + path);
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw DataError("compare: bad JSON in " + path);
        rows.push_back(ComparisonRow{name, MetricsReport::from_json(j)});
    }
    ComparisonTable table = compare(std::move(rows));
    if (!out_prefix.empty()) {
        if (fs::path(out_prefix).has_parent_path())
            fs::create_directories(fs::path(out_prefix).parent_path());
        write_text_file(out_prefix + ".txt", table.to_text());
        write_text_file(out_prefix + ".csv", table.to_csv());
        write_text_file(out_prefix + ".json", table.to_json().dump(2) + "\n");
    }
    return table;
}

MnlRunResult run_mnl(const RunConfig& config, const MnlConfig& mnl_config) {
    fs::create_directories(config.out_dir);
    LoadResult train = load_csv(config.train_csv, config.columns);
    MnlModel model(FeatureEncoder::fit(train.dataset), mnl_config);

    MnlRunResult result;
    result.fit = model.fit(train.dataset);
    result.train_accuracy = model.accuracy(train.dataset);

    LoadResult test = load_csv(config.test_csv, config.columns);
    TruthTable truth = truth_table(load_truth_csv(config.truth_csv));
    std::vector<Prediction> predictions;
    predictions.reserve(test.dataset.records.size());
    for (const auto& r : test.dataset.records) {
        Prediction p;
        p.query_doc_id = r.record_id;
        p.mode = model.predict(r);
        p.backend = "mnl";
        predictions.push_back(std::move(p));
    }
    result.report = score(predictions, truth);

    model.save_json(config.out_dir + "/mnl_model.json");
    write_text_file(config.out_dir + "/mnl_report.json", result.report.to_json().dump(2) + "\n");
    write_text_file(config.out_dir + "/mnl_report.txt", result.report.to_text());
    return result;
}

}  // namespace tmc
