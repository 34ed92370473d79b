#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tmc/retrieval.hpp"
#include "tmc/serialization.hpp"
#include "tmc/trip_data.hpp"

namespace tmc {

// Frozen task instruction; every prompt starts with this exact text.
inline constexpr std::string_view kInstruction =
    "You are a transportation behavior expert that predicts trip mode. Based on the provided "
    "trip details and similar past trips, what is the most likely trip mode? Only output one "
    "of: [Drive, Walk, Transit, Bike/Micromobility].";

// Appended to the prompt on the single re-ask after an unparseable reply.
inline constexpr std::string_view kAnswerNudge = "Answer with exactly one word from the list.";

struct PromptSpec {
    std::string instruction;
    std::string query_block;
    std::optional<std::string> context_block;  // absent = zero-shot
    std::string rendered;                      // full prompt text

    // Everything after the instruction (what goes into the user message).
    std::string user_content() const;
};

// Context documents are rendered label-inclusive in retrieval order, one
// per line; the query block never carries a label.
PromptSpec build_prompt(const Document& query_doc, const std::optional<RetrievalResult>& context,
                        const Corpus& corpus);

// Returns the same spec with the nudge sentence appended.
PromptSpec with_answer_nudge(const PromptSpec& prompt);

enum class LlmBackendKind { Remote, Mock, Oracle };

std::string_view to_string(LlmBackendKind kind);
LlmBackendKind llm_backend_from_string(std::string_view name);

struct LlmBackendConfig {
    LlmBackendKind backend = LlmBackendKind::Oracle;
    std::string model_name = "gpt-4o";
    std::string endpoint = "https://api.openai.com/v1";
    double temperature = 0.0;
    // Reasoning-style models reject the temperature parameter; unset means
    // "decide from the model name".
    std::optional<bool> include_temperature;
    int max_retries = 3;
    int retry_backoff_ms = 250;
    std::string cache_path;  // empty = in-memory cache only
    std::string api_key_env = "OPENAI_API_KEY";
    bool mock_strict = true;
    std::string mock_script_path;  // optional JSON script for the mock backend

    bool effective_include_temperature() const;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string complete(const PromptSpec& prompt) = 0;
};

// Deterministic stand-in for the model: answers with the majority mode
// among the labeled context trips (ties resolved by the highest-ranked
// item), or "Drive" for zero-shot prompts. Turns the whole pipeline into a
// retrieval-weighted nearest-neighbor classifier that needs no network.
class OracleBackend : public LlmBackend {
public:
    std::string complete(const PromptSpec& prompt) override;
};

// Scripted responses keyed by SHA-256 of the rendered prompt.
class MockBackend : public LlmBackend {
public:
    explicit MockBackend(bool strict = true) : strict_(strict) {}

    void add_response(const std::string& rendered_prompt, const std::string& response);
    void set_default_response(const std::string& response);
    // Script file: {"default": "...", "by_sha256": {"<hex>": "..."}}
    static MockBackend from_script_file(const std::string& path, bool strict);

    std::string complete(const PromptSpec& prompt) override;

private:
    bool strict_;
    std::optional<std::string> default_response_;
    std::unordered_map<std::string, std::string> by_hash_;
};

// Chat-completions HTTP client:
//   POST <endpoint>/chat/completions
//   {"model", "messages":[{"role":"system"},{"role":"user"}], "temperature"?}
//   -> choices[0].message.content
class RemoteChatBackend : public LlmBackend {
public:
    explicit RemoteChatBackend(LlmBackendConfig config);
    std::string complete(const PromptSpec& prompt) override;

private:
    LlmBackendConfig config_;
};

// Wraps a backend with the content-addressed response cache. Cache entries
// key on (backend, model, prompt hash, temperature); the store is
// append-only JSONL and replayable for offline re-evaluation.
class LlmClient {
public:
    explicit LlmClient(LlmBackendConfig config);
    // For tests: inject a backend directly.
    LlmClient(LlmBackendConfig config, std::unique_ptr<LlmBackend> backend);

    std::string complete(const PromptSpec& prompt);

    const LlmBackendConfig& config() const { return config_; }
    std::size_t backend_calls() const { return backend_calls_; }
    std::size_t cache_hits() const { return cache_hits_; }

    static std::string cache_key(const LlmBackendConfig& config, const PromptSpec& prompt);

private:
    void load_cache();
    void store(const std::string& key, const PromptSpec& prompt, const std::string& response);

    LlmBackendConfig config_;
    std::unique_ptr<LlmBackend> backend_;
    std::unordered_map<std::string, std::string> cache_;
    std::mutex mutex_;
    std::size_t backend_calls_ = 0;
    std::size_t cache_hits_ = 0;
};

// Strict pass: exact label match after trimming whitespace/punctuation,
// case-insensitive. Lenient pass: unique case-insensitive label substring
// ("bike" or "micromobility" alone also count). nullopt when zero or
// several labels match.
std::optional<TripMode> parse_mode(const std::string& raw);

// Majority mode over the retrieval items, ties resolved in favor of the
// highest-governing-score item.
TripMode majority_mode(const RetrievalResult& retrieval);

struct Prediction {
    std::int64_t query_doc_id = -1;
    TripMode mode = TripMode::Drive;
    std::string raw_output;
    std::string backend;
    bool fallback_used = false;
    std::optional<RetrievalResult> retrieval;

    nlohmann::json to_json() const;
    static Prediction from_json(const nlohmann::json& j);
};

// build_prompt -> complete -> parse_mode, with one nudged retry and a
// majority-of-context fallback ("Drive" for zero-shot) so every query
// yields a scoreable mode.
Prediction predict_one(const Document& query_doc, const std::optional<RetrievalResult>& retrieval,
                       LlmClient& client, const Corpus& corpus);

std::string sha256_hex(const std::string& data);

}  // namespace tmc
