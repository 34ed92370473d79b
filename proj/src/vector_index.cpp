#include "tmc/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "tmc/errors.hpp"

namespace tmc {

namespace {

constexpr char kMagic[8] = {'T', 'M', 'C', 'I', 'D', 'X', '0', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t lo = get_u32(in);
    std::uint64_t hi = get_u32(in);
    return lo | (hi << 32);
}

std::string get_string(std::istream& in) {
    std::uint32_t len = get_u32(in);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    return s;
}

}  // namespace

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw DataError("cosine_similarity: dimension mismatch " + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
        nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    if (na == 0.0 || nb == 0.0) throw DataError("cosine_similarity: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

VectorIndex::VectorIndex(std::vector<Entry> entries, int dim, std::string template_version,
                         std::string embedder_fingerprint)
    : entries_(std::move(entries)),
      dim_(dim),
      template_version_(std::move(template_version)),
      embedder_fingerprint_(std::move(embedder_fingerprint)) {
    if (dim_ <= 0) throw DataError("index dim must be positive");
    std::unordered_set<std::int64_t> ids;
    for (const auto& e : entries_) {
        if (static_cast<int>(e.vector.size()) != dim_)
            throw DataError("index entry " + std::to_string(e.doc_id) + " has wrong dim");
        double norm = l2_norm(e.vector);
        if (std::abs(norm - 1.0) > 1e-6)
            throw DataError("index entry " + std::to_string(e.doc_id) + " is not L2-normalized");
        if (!ids.insert(e.doc_id).second)
            throw DataError("index: duplicate doc_id " + std::to_string(e.doc_id));
        ++class_counts_[mode_index(e.mode)];
    }
}

VectorIndex VectorIndex::build(const std::vector<Document>& docs,
                               const std::vector<EmbeddingVector>& vectors, int dim,
                               std::string template_version, std::string embedder_fingerprint) {
    if (docs.size() != vectors.size())
        throw DataError("index build: document/vector count mismatch");
    std::vector<Entry> entries;
    entries.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (!docs[i].mode)
            throw DataError("index build: unlabeled document " + std::to_string(docs[i].doc_id) +
                            " (the knowledge base holds labeled training docs only)");
        entries.push_back(Entry{docs[i].doc_id, *docs[i].mode, vectors[i]});
    }
    return VectorIndex(std::move(entries), dim, std::move(template_version),
                       std::move(embedder_fingerprint));
}

std::size_t VectorIndex::class_count(TripMode mode) const {
    return class_counts_[mode_index(mode)];
}

bool VectorIndex::contains(std::int64_t doc_id) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const Entry& e) { return e.doc_id == doc_id; });
}

namespace {

void sort_and_truncate(std::vector<SearchHit>& hits, int k) {
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (static_cast<int>(hits.size()) > k) hits.resize(static_cast<std::size_t>(k));
}

}  // namespace

std::vector<SearchHit> VectorIndex::search(const EmbeddingVector& query, int k,
                                           std::optional<std::int64_t> exclude_doc_id) const {
    if (k < 1) throw DataError("search: k must be >= 1");
    if (entries_.empty()) throw DataError("search: empty index");
    std::vector<SearchHit> hits;
    hits.reserve(entries_.size());
    for (const auto& e : entries_) {
        if (exclude_doc_id && e.doc_id == *exclude_doc_id) continue;
        hits.push_back(SearchHit{e.doc_id, cosine_similarity(query, e.vector), e.mode});
    }
    sort_and_truncate(hits, k);
    return hits;
}

std::vector<SearchHit> VectorIndex::search_in_class(const EmbeddingVector& query, TripMode mode,
                                                    int k,
                                                    std::optional<std::int64_t> exclude_doc_id)
    const {
    if (k < 1) throw DataError("search_in_class: k must be >= 1");
    std::vector<SearchHit> hits;
    for (const auto& e : entries_) {
        if (e.mode != mode) continue;
        if (exclude_doc_id && e.doc_id == *exclude_doc_id) continue;
        hits.push_back(SearchHit{e.doc_id, cosine_similarity(query, e.vector), e.mode});
    }
    sort_and_truncate(hits, k);
    return hits;
}

void VectorIndex::require_compatible(int dim, std::string_view template_version,
                                     std::string_view embedder_fingerprint) const {
    if (dim != dim_)
        throw ConfigError("index incompatible: dim " + std::to_string(dim_) + " vs expected " +
                          std::to_string(dim));
    if (template_version != template_version_)
        throw ConfigError("index incompatible: template version \"" + template_version_ +
                          "\" vs expected \"" + std::string(template_version) + "\"");
    if (embedder_fingerprint != embedder_fingerprint_)
        throw ConfigError("index incompatible: embedder fingerprint \"" + embedder_fingerprint_ +
                          "\" vs expected \"" + std::string(embedder_fingerprint) + "\"");
}

void VectorIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(dim_));
    put_u64(out, entries_.size());
    put_string(out, template_version_);
    put_string(out, embedder_fingerprint_);
    for (const auto& e : entries_) {
        put_u64(out, static_cast<std::uint64_t>(e.doc_id));
        out.put(static_cast<char>(mode_index(e.mode)));
        for (float x : e.vector) {
            std::uint32_t bits;
            std::memcpy(&bits, &x, sizeof(bits));
            put_u32(out, bits);
        }
    }
    if (!out) throw DataError("write failed: " + path);
}

VectorIndex VectorIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not an index file: " + path);
    std::uint32_t version = get_u32(in);
    if (version != kFormatVersion)
        throw DataError("unsupported index format version " + std::to_string(version));
    int dim = static_cast<int>(get_u32(in));
    std::uint64_t count = get_u64(in);
    std::string template_version = get_string(in);
    std::string fingerprint = get_string(in);

    std::vector<Entry> entries;
    entries.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Entry e;
        e.doc_id = static_cast<std::int64_t>(get_u64(in));
        int mode = in.get();
        if (mode < 0 || mode >= kNumModes) throw DataError("corrupt index: bad mode byte");
        e.mode = kModeOrder[static_cast<std::size_t>(mode)];
        e.vector.resize(static_cast<std::size_t>(dim));
        for (int d = 0; d < dim; ++d) {
            std::uint32_t bits = get_u32(in);
            float x;
            std::memcpy(&x, &bits, sizeof(x));
            e.vector[static_cast<std::size_t>(d)] = x;
        }
        entries.push_back(std::move(e));
    }
    if (!in) throw DataError("corrupt or truncated index file: " + path);
    return VectorIndex(std::move(entries), dim, std::move(template_version),
                       std::move(fingerprint));
}

void VectorIndex::export_jsonl(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (const auto& e : entries_) {
        nlohmann::json j;
        j["doc_id"] = e.doc_id;
        j["mode"] = std::string(to_string(e.mode));
        j["vector"] = e.vector;
        out << j.dump() << "\n";
    }
}

}  // namespace tmc
