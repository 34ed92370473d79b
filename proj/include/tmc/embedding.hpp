#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tmc {

// Stored vectors are always L2-normalized, so cosine equals dot product.
using EmbeddingVector = std::vector<float>;

enum class EmbedderBackend { LocalHash, Remote };

struct EmbedderConfig {
    EmbedderBackend backend = EmbedderBackend::LocalHash;
    std::string model_name = "text-embedding-3-large";
    int dim = 256;
    std::string endpoint;            // base URL, e.g. http://host:port/v1
    int batch_size = 64;
    std::string api_key_env = "OPENAI_API_KEY";
    int max_retries = 3;
    int retry_backoff_ms = 250;      // doubled after each failed attempt
};

double l2_norm(std::span<const float> v);
void l2_normalize_in_place(EmbeddingVector& v);

class Embedder {
public:
    virtual ~Embedder() = default;

    // One vector per text, order-preserving, each L2-normalized.
    virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) = 0;

    virtual int dim() const = 0;

    // Identifies the embedding function; persisted in the index header and
    // checked on load so incompatible vectors are never mixed.
    virtual std::string fingerprint() const = 0;
};

// Deterministic test-mode embedder: lowercase word tokens hashed into `dim`
// signed buckets, token counts accumulated, then L2-normalized. Bit-stable
// across runs and platforms; similar trips share most sentence tokens, so
// field overlap survives into cosine space.
class LocalHashEmbedder : public Embedder {
public:
    explicit LocalHashEmbedder(int dim = 256);

    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;
    EmbeddingVector embed(const std::string& text);
    int dim() const override { return dim_; }
    std::string fingerprint() const override;

    static std::vector<std::string> tokenize(const std::string& text);

private:
    int dim_;
};

// Client for the common embeddings HTTP contract:
//   POST <endpoint>/embeddings {"model", "input": [...]} ->
//   {"data": [{"embedding": [...]}, ...]}
// Bounded retries with exponential backoff; a partial batch failure fails
// the whole batch.
class RemoteEmbedder : public Embedder {
public:
    explicit RemoteEmbedder(EmbedderConfig config);

    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;
    int dim() const override { return config_.dim; }
    std::string fingerprint() const override;

private:
    std::vector<EmbeddingVector> embed_one_batch(std::span<const std::string> texts);

    EmbedderConfig config_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config);

}  // namespace tmc
