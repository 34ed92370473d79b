#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tmc/serialization.hpp"
#include "tmc/vector_index.hpp"

namespace tmc {

enum class Strategy { Basic, Balanced, Rerank, BalancedRerank, ZeroShot };

std::string_view to_string(Strategy strategy);
Strategy strategy_from_string(std::string_view name);

enum class RerankerKind { Reference, Remote, Identity };

struct StrategyConfig {
    Strategy strategy = Strategy::Basic;
    int k = 4;         // final context size
    int k_prime = 20;  // candidate pool size for the re-ranked strategies
    RerankerKind reranker = RerankerKind::Reference;
    std::string rerank_endpoint;  // remote reranker base URL
    std::string rerank_model;
    std::string rerank_api_key_env = "RERANK_API_KEY";
};

struct RetrievedItem {
    std::int64_t doc_id = -1;
    double similarity = 0.0;
    std::optional<double> rerank_score;
    TripMode mode = TripMode::Drive;
};

// Ordered by the governing score (similarity for single-stage strategies,
// rerank_score for the re-ranked ones) descending, ties by ascending
// doc_id. Never contains the query's own document.
struct RetrievalResult {
    std::vector<RetrievedItem> items;
    Strategy strategy = Strategy::Basic;
    std::int64_t query_doc_id = -1;
    // True when some class ran out of documents before filling its quota.
    bool shortfall = false;

    nlohmann::json to_json() const;
    static RetrievalResult from_json(const nlohmann::json& j);
};

struct RerankCandidate {
    std::int64_t doc_id;
    std::string text;  // label sentence already stripped
    double stage1_similarity;
};

// Stage-2 scorer: higher = more relevant. Implementations must be
// deterministic given their inputs (the remote one is as deterministic as
// the service behind it).
class Reranker {
public:
    virtual ~Reranker() = default;
    virtual std::vector<double> score(const std::string& query_text,
                                      std::span<const RerankCandidate> candidates) = 0;
};

// Structured-field distance between the two parsed trips:
//   score = -sum_f w_f * d_f, with d_f a 0/1 mismatch for categorical
// fields and |delta|/scale for numeric ones. Identical trips score 0, the
// maximum. Deterministic and auditable; the label sentence plays no part.
double reference_rerank_score(const std::string& query_text, const std::string& candidate_text);

class ReferenceReranker : public Reranker {
public:
    std::vector<double> score(const std::string& query_text,
                              std::span<const RerankCandidate> candidates) override;
};

// Returns the stage-1 similarity unchanged; with it every two-stage
// strategy reduces to its first stage truncated to K.
class IdentityReranker : public Reranker {
public:
    std::vector<double> score(const std::string& query_text,
                              std::span<const RerankCandidate> candidates) override;
};

// Client for a rerank HTTP service:
//   POST <endpoint>/rerank {"model", "query", "documents": [...]} ->
//   {"results": [{"index": i, "relevance_score": s}, ...]}
class RemoteReranker : public Reranker {
public:
    RemoteReranker(std::string endpoint, std::string model, std::string api_key_env,
                   int max_retries = 3, int retry_backoff_ms = 250);

    std::vector<double> score(const std::string& query_text,
                              std::span<const RerankCandidate> candidates) override;

private:
    std::string endpoint_;
    std::string model_;
    std::string api_key_env_;
    int max_retries_;
    int retry_backoff_ms_;
};

std::unique_ptr<Reranker> make_reranker(const StrategyConfig& config);

// Per-class quota when k is split over the four classes: floor(k/4) plus
// one extra for the first (k mod 4) classes in canonical mode order.
std::array<int, kNumModes> balanced_allocation(int k);

RetrievalResult retrieve_basic(const VectorIndex& index, const EmbeddingVector& query_vec, int k,
                               std::int64_t query_doc_id);

// Top-k_j per class, merged and sorted by similarity. Classes with fewer
// than k_j documents contribute everything they have and set `shortfall`.
RetrievalResult retrieve_balanced(const VectorIndex& index, const EmbeddingVector& query_vec,
                                  int k, std::int64_t query_doc_id);

// Scores every pool item (on label-stripped text) and keeps the top K by
// rerank score; equivalent to score-all-then-sort.
RetrievalResult rerank(const RetrievalResult& pool, const std::string& query_text,
                       const Corpus& corpus, Reranker& reranker, int k);

RetrievalResult retrieve_rerank(const VectorIndex& index, const EmbeddingVector& query_vec,
                                const std::string& query_text, const Corpus& corpus, int k_prime,
                                int k, Reranker& reranker, std::int64_t query_doc_id);

RetrievalResult retrieve_balanced_rerank(const VectorIndex& index,
                                         const EmbeddingVector& query_vec,
                                         const std::string& query_text, const Corpus& corpus,
                                         int k_prime, int k, Reranker& reranker,
                                         std::int64_t query_doc_id);

// Strips the trailing "Trip mode is <mode>." sentence, if present.
std::string strip_label_sentence(const std::string& text);

}  // namespace tmc
