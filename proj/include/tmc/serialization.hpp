#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tmc/trip_data.hpp"

namespace tmc {

// Bump whenever the sentence template changes: stored embeddings are only
// comparable within one template version, and the index loader enforces it.
inline constexpr std::string_view kTemplateVersion = "trip-template/v1";

// A serialized trip. Knowledge-base documents carry `mode`; query documents
// never do, regardless of whether the source record was labeled.
struct Document {
    std::int64_t doc_id = -1;  // = source record_id
    std::string text;
    std::optional<TripMode> mode;
    std::string source_dataset;
};

// Renders the fixed sentence template. With include_label the text ends
// with the sentence "Trip mode is <mode>."; without it that sentence is
// absent and nothing else changes.
Document serialize_trip(const TripRecord& record, bool include_label);

std::vector<Document> serialize_dataset(const Dataset& dataset, bool include_label);

// Inverse of serialize_trip. Accepts both labeled and unlabeled renderings;
// throws DataError when the text does not match the template grammar.
// record_id is not part of the text, so the caller supplies it.
TripRecord parse_document(const std::string& text, std::int64_t record_id = -1);

// Serialized corpus with doc_id lookup, exportable as JSONL
// ({doc_id, text, mode, source_dataset}, one object per line).
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<Document> docs);

    const Document& at(std::int64_t doc_id) const;
    const Document* find(std::int64_t doc_id) const;
    const std::vector<Document>& docs() const { return docs_; }
    std::size_t size() const { return docs_.size(); }

    void save_jsonl(const std::string& path) const;
    static Corpus load_jsonl(const std::string& path);

private:
    std::vector<Document> docs_;
    std::unordered_map<std::int64_t, std::size_t> by_id_;
};

}  // namespace tmc
