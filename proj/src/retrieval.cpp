#include "tmc/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "http_util.hpp"
#include "tmc/errors.hpp"

namespace tmc {

namespace {

// Standardization scales for the numeric fields (survey SDs).
constexpr double kDistanceScale = 2.33;
constexpr double kStartTimeScale = 4.32;
constexpr double kVehiclesScale = 0.78;

void sort_by_governing_score(std::vector<RetrievedItem>& items, bool reranked) {
    std::sort(items.begin(), items.end(), [&](const RetrievedItem& a, const RetrievedItem& b) {
        double sa = reranked ? *a.rerank_score : a.similarity;
        double sb = reranked ? *b.rerank_score : b.similarity;
        if (sa != sb) return sa > sb;
        return a.doc_id < b.doc_id;
    });
}

}  // namespace

std::string_view to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::Basic: return "basic";
        case Strategy::Balanced: return "balanced";
        case Strategy::Rerank: return "rerank";
        case Strategy::BalancedRerank: return "balanced_rerank";
        case Strategy::ZeroShot: return "zero_shot";
    }
    return "basic";
}

Strategy strategy_from_string(std::string_view name) {
    for (Strategy s : {Strategy::Basic, Strategy::Balanced, Strategy::Rerank,
                       Strategy::BalancedRerank, Strategy::ZeroShot}) {
        if (name == to_string(s)) return s;
    }
    throw ConfigError("unknown strategy: " + std::string(name));
}

nlohmann::json RetrievalResult::to_json() const {
    nlohmann::json j;
    j["strategy"] = std::string(to_string(strategy));
    j["query_doc_id"] = query_doc_id;
    j["shortfall"] = shortfall;
    nlohmann::json items_json = nlohmann::json::array();
    for (const auto& item : items) {
        nlohmann::json ij;
        ij["doc_id"] = item.doc_id;
        ij["similarity"] = item.similarity;
        ij["rerank_score"] =
            item.rerank_score ? nlohmann::json(*item.rerank_score) : nlohmann::json();
        ij["mode"] = std::string(to_string(item.mode));
        items_json.push_back(std::move(ij));
    }
    j["items"] = std::move(items_json);
    return j;
}

RetrievalResult RetrievalResult::from_json(const nlohmann::json& j) {
    RetrievalResult r;
    r.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    r.query_doc_id = j.at("query_doc_id").get<std::int64_t>();
    r.shortfall = j.at("shortfall").get<bool>();
    for (const auto& ij : j.at("items")) {
        RetrievedItem item;
        item.doc_id = ij.at("doc_id").get<std::int64_t>();
        item.similarity = ij.at("similarity").get<double>();
        if (!ij.at("rerank_score").is_null()) item.rerank_score = ij.at("rerank_score").get<double>();
        auto mode = mode_from_string(ij.at("mode").get<std::string>());
        if (!mode) throw DataError("retrieval json: unknown mode");
        item.mode = *mode;
        r.items.push_back(item);
    }
    return r;
}

std::string strip_label_sentence(const std::string& text) {
    const std::string marker = " Trip mode is ";
    auto at = text.rfind(marker);
    if (at == std::string::npos) return text;
    return text.substr(0, at);
}

double reference_rerank_score(const std::string& query_text, const std::string& candidate_text) {
    TripRecord q = parse_document(query_text);
    TripRecord c = parse_document(candidate_text);
    double distance = 0.0;
    distance += q.age_band != c.age_band ? 1.0 : 0.0;
    distance += q.gender != c.gender ? 1.0 : 0.0;
    distance += q.education != c.education ? 1.0 : 0.0;
    distance += q.income_band != c.income_band ? 1.0 : 0.0;
    distance += q.trip_purpose != c.trip_purpose ? 1.0 : 0.0;
    distance += std::abs(q.trip_distance_miles - c.trip_distance_miles) / kDistanceScale;
    distance += std::abs(q.start_time_hours - c.start_time_hours) / kStartTimeScale;
    distance += std::abs(q.household_vehicles - c.household_vehicles) / kVehiclesScale;
    return -distance;
}

std::vector<double> ReferenceReranker::score(const std::string& query_text,
                                             std::span<const RerankCandidate> candidates) {
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (const auto& cand : candidates)
        scores.push_back(reference_rerank_score(query_text, cand.text));
    return scores;
}

std::vector<double> IdentityReranker::score(const std::string&,
                                            std::span<const RerankCandidate> candidates) {
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (const auto& cand : candidates) scores.push_back(cand.stage1_similarity);
    return scores;
}

RemoteReranker::RemoteReranker(std::string endpoint, std::string model, std::string api_key_env,
                               int max_retries, int retry_backoff_ms)
    : endpoint_(std::move(endpoint)),
      model_(std::move(model)),
      api_key_env_(std::move(api_key_env)),
      max_retries_(max_retries),
      retry_backoff_ms_(retry_backoff_ms) {
    if (endpoint_.empty()) throw ConfigError("remote reranker needs an endpoint");
}

std::vector<double> RemoteReranker::score(const std::string& query_text,
                                          std::span<const RerankCandidate> candidates) {
    nlohmann::json body;
    body["model"] = model_;
    body["query"] = query_text;
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& cand : candidates) docs.push_back(cand.text);
    body["documents"] = std::move(docs);

    nlohmann::json reply =
        detail::post_json(endpoint_, "/rerank", body, detail::credential_from_env(api_key_env_),
                          max_retries_, retry_backoff_ms_);
    if (!reply.contains("results") || !reply["results"].is_array())
        throw BackendError("rerank response malformed");

    std::vector<double> scores(candidates.size(),
                               -std::numeric_limits<double>::infinity());
    std::size_t filled = 0;
    for (const auto& item : reply["results"]) {
        auto idx = item.at("index").get<std::size_t>();
        if (idx >= scores.size()) throw BackendError("rerank response: index out of range");
        scores[idx] = item.at("relevance_score").get<double>();
        ++filled;
    }
    if (filled != candidates.size())
        throw BackendError("rerank response: missing scores for some candidates");
    return scores;
}

std::unique_ptr<Reranker> make_reranker(const StrategyConfig& config) {
    switch (config.reranker) {
        case RerankerKind::Reference: return std::make_unique<ReferenceReranker>();
        case RerankerKind::Identity: return std::make_unique<IdentityReranker>();
        case RerankerKind::Remote:
            return std::make_unique<RemoteReranker>(config.rerank_endpoint, config.rerank_model,
                                                    config.rerank_api_key_env);
    }
    throw ConfigError("unknown reranker kind");
}

std::array<int, kNumModes> balanced_allocation(int k) {
    if (k < 1) throw ConfigError("balanced allocation: k must be >= 1");
    std::array<int, kNumModes> quota{};
    for (int c = 0; c < kNumModes; ++c) quota[c] = k / kNumModes + (c < k % kNumModes ? 1 : 0);
    return quota;
}

RetrievalResult retrieve_basic(const VectorIndex& index, const EmbeddingVector& query_vec, int k,
                               std::int64_t query_doc_id) {
    RetrievalResult result;
    result.strategy = Strategy::Basic;
    result.query_doc_id = query_doc_id;
    for (const auto& hit : index.search(query_vec, k, query_doc_id))
        result.items.push_back(RetrievedItem{hit.doc_id, hit.score, std::nullopt, hit.mode});
    return result;
}

RetrievalResult retrieve_balanced(const VectorIndex& index, const EmbeddingVector& query_vec,
                                  int k, std::int64_t query_doc_id) {
    if (index.size() == 0) throw DataError("retrieve_balanced: empty index");
    RetrievalResult result;
    result.strategy = Strategy::Balanced;
    result.query_doc_id = query_doc_id;

    auto quota = balanced_allocation(k);
    for (int c = 0; c < kNumModes; ++c) {
        if (quota[c] == 0) continue;
        auto hits = index.search_in_class(query_vec, kModeOrder[c], quota[c], query_doc_id);
        if (static_cast<int>(hits.size()) < quota[c]) result.shortfall = true;
        for (const auto& hit : hits)
            result.items.push_back(RetrievedItem{hit.doc_id, hit.score, std::nullopt, hit.mode});
    }
    sort_by_governing_score(result.items, /*reranked=*/false);
    return result;
}

RetrievalResult rerank(const RetrievalResult& pool, const std::string& query_text,
                       const Corpus& corpus, Reranker& reranker, int k) {
    if (k < 1) throw ConfigError("rerank: k must be >= 1");

    std::vector<RerankCandidate> candidates;
    candidates.reserve(pool.items.size());
    for (const auto& item : pool.items) {
        const Document& doc = corpus.at(item.doc_id);
        candidates.push_back(
            RerankCandidate{item.doc_id, strip_label_sentence(doc.text), item.similarity});
    }

    std::vector<double> scores = reranker.score(query_text, candidates);
    if (scores.size() != candidates.size())
        throw BackendError("reranker returned wrong number of scores");

    RetrievalResult result = pool;
    for (std::size_t i = 0; i < result.items.size(); ++i) result.items[i].rerank_score = scores[i];
    sort_by_governing_score(result.items, /*reranked=*/true);
    if (static_cast<int>(result.items.size()) > k) result.items.resize(static_cast<std::size_t>(k));
    return result;
}

RetrievalResult retrieve_rerank(const VectorIndex& index, const EmbeddingVector& query_vec,
                                const std::string& query_text, const Corpus& corpus, int k_prime,
                                int k, Reranker& reranker, std::int64_t query_doc_id) {
    if (k > k_prime) throw ConfigError("retrieve_rerank: k must be <= k_prime");
    RetrievalResult pool = retrieve_basic(index, query_vec, k_prime, query_doc_id);
    RetrievalResult result = rerank(pool, query_text, corpus, reranker, k);
    result.strategy = Strategy::Rerank;
    return result;
}

RetrievalResult retrieve_balanced_rerank(const VectorIndex& index,
                                         const EmbeddingVector& query_vec,
                                         const std::string& query_text, const Corpus& corpus,
                                         int k_prime, int k, Reranker& reranker,
                                         std::int64_t query_doc_id) {
    if (k > k_prime) throw ConfigError("retrieve_balanced_rerank: k must be <= k_prime");
    RetrievalResult pool = retrieve_balanced(index, query_vec, k_prime, query_doc_id);
    RetrievalResult result = rerank(pool, query_text, corpus, reranker, k);
    result.strategy = Strategy::BalancedRerank;
    return result;
}

}  // namespace tmc
