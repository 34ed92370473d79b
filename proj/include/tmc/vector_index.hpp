#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tmc/embedding.hpp"
#include "tmc/serialization.hpp"
#include "tmc/trip_data.hpp"

namespace tmc {

struct SearchHit {
    std::int64_t doc_id = -1;
    double score = 0.0;
    TripMode mode = TripMode::Drive;
};

// a.b / (|a||b|), in [-1, 1]. Throws on dim mismatch or a zero vector.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

// Exact (flat) store over labeled knowledge-base documents. Every entry is
// L2-normalized at dim length and carries a mode label; doc_ids are unique.
// Immutable after construction; concurrent searches are safe.
class VectorIndex {
public:
    struct Entry {
        std::int64_t doc_id;
        TripMode mode;
        EmbeddingVector vector;
    };

    VectorIndex(std::vector<Entry> entries, int dim, std::string template_version,
                std::string embedder_fingerprint);

    // Pairs documents with their vectors; documents must be labeled.
    static VectorIndex build(const std::vector<Document>& docs,
                             const std::vector<EmbeddingVector>& vectors, int dim,
                             std::string template_version, std::string embedder_fingerprint);

    // Full scan; min(k, size) hits sorted by similarity descending, ties by
    // ascending doc_id. Throws on empty index or k < 1.
    std::vector<SearchHit> search(const EmbeddingVector& query, int k,
                                  std::optional<std::int64_t> exclude_doc_id = std::nullopt) const;

    // search() restricted to entries with the given mode. A class with zero
    // entries yields an empty result (callers flag the shortfall).
    std::vector<SearchHit> search_in_class(const EmbeddingVector& query, TripMode mode, int k,
                                           std::optional<std::int64_t> exclude_doc_id =
                                               std::nullopt) const;

    std::size_t size() const { return entries_.size(); }
    int dim() const { return dim_; }
    const std::string& template_version() const { return template_version_; }
    const std::string& embedder_fingerprint() const { return embedder_fingerprint_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t class_count(TripMode mode) const;
    bool contains(std::int64_t doc_id) const;

    // Throws ConfigError unless dim, template version and embedder
    // fingerprint all match.
    void require_compatible(int dim, std::string_view template_version,
                            std::string_view embedder_fingerprint) const;

    // Binary format: fixed little-endian header (magic, format version,
    // dim, count, template version, fingerprint) followed by packed
    // entries (doc_id, mode, float32 vector). load(save(x)) is bit-identical.
    void save(const std::string& path) const;
    static VectorIndex load(const std::string& path);

    void export_jsonl(const std::string& path) const;

private:
    std::vector<Entry> entries_;
    int dim_;
    std::string template_version_;
    std::string embedder_fingerprint_;
    std::array<std::size_t, kNumModes> class_counts_{};
};

}  // namespace tmc
