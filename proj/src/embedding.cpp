#include "tmc/embedding.hpp"

#include <cctype>
#include <cmath>

#include "http_util.hpp"
#include "tmc/errors.hpp"

namespace tmc {

namespace {

// Fixed seed folded into the FNV-1a basis; part of the embedder
// fingerprint, so changing it invalidates stored indexes.
constexpr std::uint64_t kHashSeed = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t hash_token(const std::string& token) {
    std::uint64_t h = kFnvOffset ^ kHashSeed;
    for (unsigned char c : token) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

bool is_trim_char(char c) {
    switch (c) {
        case '.': case ',': case ';': case ':': case '!': case '?':
        case '"': case '\'': case '(': case ')': case '[': case ']':
        case '{': case '}':
            return true;
        default:
            return false;
    }
}

}  // namespace

double l2_norm(std::span<const float> v) {
    double sum = 0.0;
    for (float x : v) sum += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(sum);
}

void l2_normalize_in_place(EmbeddingVector& v) {
    double norm = l2_norm(v);
    if (norm == 0.0) throw DataError("cannot L2-normalize a zero vector");
    for (float& x : v) x = static_cast<float>(x / norm);
}

LocalHashEmbedder::LocalHashEmbedder(int dim) : dim_(dim) {
    if (dim <= 0) throw ConfigError("embedder dim must be positive");
}

std::vector<std::string> LocalHashEmbedder::tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        std::size_t begin = 0, end = current.size();
        while (begin < end && is_trim_char(current[begin])) ++begin;
        while (end > begin && is_trim_char(current[end - 1])) --end;
        if (end > begin) tokens.push_back(current.substr(begin, end - begin));
        current.clear();
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    flush();
    return tokens;
}

EmbeddingVector LocalHashEmbedder::embed(const std::string& text) {
    std::vector<std::string> tokens = tokenize(text);
    if (tokens.empty()) throw DataError("cannot embed text with no tokens");
    EmbeddingVector v(static_cast<std::size_t>(dim_), 0.0f);
    for (const auto& token : tokens) {
        std::uint64_t h = hash_token(token);
        auto bucket = static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim_));
        float sign = (h >> 63) ? -1.0f : 1.0f;
        v[bucket] += sign;
    }
    l2_normalize_in_place(v);
    return v;
}

std::vector<EmbeddingVector> LocalHashEmbedder::embed_batch(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) out.push_back(embed(text));
    return out;
}

std::string LocalHashEmbedder::fingerprint() const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "local-hash/v1/dim=%d/seed=%016llx", dim_,
                  static_cast<unsigned long long>(kHashSeed));
    return buf;
}

RemoteEmbedder::RemoteEmbedder(EmbedderConfig config) : config_(std::move(config)) {
    if (config_.dim <= 0) throw ConfigError("embedder dim must be positive");
    if (config_.batch_size < 1) throw ConfigError("embedder batch_size must be >= 1");
    if (config_.endpoint.empty()) throw ConfigError("remote embedder needs an endpoint");
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_one_batch(std::span<const std::string> texts) {
    nlohmann::json body;
    body["model"] = config_.model_name;
    body["input"] = std::vector<std::string>(texts.begin(), texts.end());

    std::string token = detail::credential_from_env(config_.api_key_env);
    if (token.empty())
        throw ConfigError("remote embedder: credential env var " + config_.api_key_env +
                          " is not set");

    nlohmann::json reply = detail::post_json(config_.endpoint, "/embeddings", body, token,
                                             config_.max_retries, config_.retry_backoff_ms);
    if (!reply.contains("data") || !reply["data"].is_array() ||
        reply["data"].size() != texts.size())
        throw BackendError("embeddings response malformed or wrong count");

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& item : reply["data"]) {
        EmbeddingVector v = item.at("embedding").get<EmbeddingVector>();
        if (static_cast<int>(v.size()) != config_.dim)
            throw BackendError("embedding dimension mismatch: got " + std::to_string(v.size()) +
                               ", configured " + std::to_string(config_.dim));
        l2_normalize_in_place(v);
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t begin = 0; begin < texts.size();
         begin += static_cast<std::size_t>(config_.batch_size)) {
        std::size_t count = std::min(static_cast<std::size_t>(config_.batch_size),
                                     texts.size() - begin);
        auto part = embed_one_batch(texts.subspan(begin, count));
        for (auto& v : part) out.push_back(std::move(v));
    }
    return out;
}

std::string RemoteEmbedder::fingerprint() const {
    return "remote/" + config_.model_name + "/dim=" + std::to_string(config_.dim);
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config) {
    switch (config.backend) {
        case EmbedderBackend::LocalHash:
            return std::make_unique<LocalHashEmbedder>(config.dim);
        case EmbedderBackend::Remote:
            return std::make_unique<RemoteEmbedder>(config);
    }
    throw ConfigError("unknown embedder backend");
}

}  // namespace tmc
