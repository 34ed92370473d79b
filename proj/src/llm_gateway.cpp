#include "tmc/llm_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <fstream>

#include <openssl/evp.h>

#include "http_util.hpp"
#include "tmc/errors.hpp"

namespace tmc {

namespace {

constexpr std::string_view kLabelMarker = "Trip mode is ";

std::string lowercase(const std::string& text) {
    std::string out = text;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string temperature_token(const LlmBackendConfig& config) {
    if (!config.effective_include_temperature()) return "none";
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), config.temperature);
    return std::string(buf, ptr);
}

// Labels in context order, extracted from the rendered "Trip mode is X."
// sentences (one context document per line).
std::vector<TripMode> context_labels(const std::string& context_block) {
    std::vector<TripMode> labels;
    std::size_t pos = 0;
    while ((pos = context_block.find(kLabelMarker, pos)) != std::string::npos) {
        pos += kLabelMarker.size();
        auto end = context_block.find('.', pos);
        if (end == std::string::npos) break;
        auto mode = mode_from_string(context_block.substr(pos, end - pos));
        if (mode) labels.push_back(*mode);
        pos = end;
    }
    return labels;
}

TripMode majority_of(const std::vector<TripMode>& ordered) {
    std::array<int, kNumModes> counts{};
    for (TripMode m : ordered) ++counts[mode_index(m)];
    int best = *std::max_element(counts.begin(), counts.end());
    for (TripMode m : ordered) {
        if (counts[mode_index(m)] == best) return m;
    }
    return TripMode::Drive;
}

}  // namespace

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr))
        throw std::runtime_error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string PromptSpec::user_content() const {
    std::string out = "Trip details: \n" + query_block;
    if (context_block) out += "\nRelevant past trips: \n" + *context_block;
    return out;
}

PromptSpec build_prompt(const Document& query_doc, const std::optional<RetrievalResult>& context,
                        const Corpus& corpus) {
    if (query_doc.mode || query_doc.text.find(kLabelMarker) != std::string::npos)
        throw DataError("build_prompt: query document " + std::to_string(query_doc.doc_id) +
                        " carries a label (ground truth must never reach the prompt)");

    PromptSpec prompt;
    prompt.instruction = std::string(kInstruction);
    prompt.query_block = query_doc.text;

    if (context && !context->items.empty()) {
        std::string block;
        for (std::size_t i = 0; i < context->items.size(); ++i) {
            const Document& doc = corpus.at(context->items[i].doc_id);
            if (!doc.mode || doc.text.find(kLabelMarker) == std::string::npos)
                throw DataError("build_prompt: context document " + std::to_string(doc.doc_id) +
                                " is unlabeled");
            if (i) block += "\n";
            block += doc.text;
        }
        prompt.context_block = std::move(block);
    }

    prompt.rendered = prompt.instruction + "\n" + prompt.user_content();
    return prompt;
}

PromptSpec with_answer_nudge(const PromptSpec& prompt) {
    PromptSpec nudged = prompt;
    nudged.query_block += "\n" + std::string(kAnswerNudge);
    nudged.rendered = nudged.instruction + "\n" + nudged.user_content();
    return nudged;
}

std::string_view to_string(LlmBackendKind kind) {
    switch (kind) {
        case LlmBackendKind::Remote: return "remote";
        case LlmBackendKind::Mock: return "mock";
        case LlmBackendKind::Oracle: return "oracle";
    }
    return "oracle";
}

LlmBackendKind llm_backend_from_string(std::string_view name) {
    if (name == "remote") return LlmBackendKind::Remote;
    if (name == "mock") return LlmBackendKind::Mock;
    if (name == "oracle") return LlmBackendKind::Oracle;
    throw ConfigError("unknown llm backend: " + std::string(name));
}

bool LlmBackendConfig::effective_include_temperature() const {
    if (include_temperature) return *include_temperature;
    // o3 / o4-mini style reasoning models reject the parameter.
    return !(model_name.size() >= 2 && model_name[0] == 'o' &&
             std::isdigit(static_cast<unsigned char>(model_name[1])));
}

std::string OracleBackend::complete(const PromptSpec& prompt) {
    if (!prompt.context_block) return "Drive";  // global training majority
    std::vector<TripMode> labels = context_labels(*prompt.context_block);
    if (labels.empty()) throw BackendError("oracle backend: no labels found in context block");
    return std::string(to_string(majority_of(labels)));
}

void MockBackend::add_response(const std::string& rendered_prompt, const std::string& response) {
    by_hash_[sha256_hex(rendered_prompt)] = response;
}

void MockBackend::set_default_response(const std::string& response) {
    default_response_ = response;
}

MockBackend MockBackend::from_script_file(const std::string& path, bool strict) {
    std::ifstream in(path);
    if (!in) throw ConfigError("mock script not found: " + path);
    nlohmann::json j;
    in >> j;
    MockBackend backend(strict);
    if (j.contains("default")) backend.default_response_ = j["default"].get<std::string>();
    if (j.contains("by_sha256")) {
        for (const auto& [hash, response] : j["by_sha256"].items())
            backend.by_hash_[hash] = response.get<std::string>();
    }
    return backend;
}

std::string MockBackend::complete(const PromptSpec& prompt) {
    auto it = by_hash_.find(sha256_hex(prompt.rendered));
    if (it != by_hash_.end()) return it->second;
    if (default_response_) return *default_response_;
    if (strict_) throw BackendError("mock backend: no scripted response for prompt");
    return "Drive";
}

RemoteChatBackend::RemoteChatBackend(LlmBackendConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ConfigError("remote llm backend needs an endpoint");
    if (config_.temperature < 0) throw ConfigError("temperature must be >= 0");
}

std::string RemoteChatBackend::complete(const PromptSpec& prompt) {
    nlohmann::json body;
    body["model"] = config_.model_name;
    body["messages"] = nlohmann::json::array({
        nlohmann::json{{"role", "system"}, {"content", prompt.instruction}},
        nlohmann::json{{"role", "user"}, {"content", prompt.user_content()}},
    });
    if (config_.effective_include_temperature()) body["temperature"] = config_.temperature;

    nlohmann::json reply = detail::post_json(
        config_.endpoint, "/chat/completions", body,
        detail::credential_from_env(config_.api_key_env), config_.max_retries,
        config_.retry_backoff_ms);
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw BackendError("chat response malformed: " + reply.dump());
    }
}

LlmClient::LlmClient(LlmBackendConfig config) : config_(std::move(config)) {
    switch (config_.backend) {
        case LlmBackendKind::Oracle:
            backend_ = std::make_unique<OracleBackend>();
            break;
        case LlmBackendKind::Mock:
            backend_ = std::make_unique<MockBackend>(
                config_.mock_script_path.empty()
                    ? MockBackend(config_.mock_strict)
                    : MockBackend::from_script_file(config_.mock_script_path, config_.mock_strict));
            break;
        case LlmBackendKind::Remote:
            backend_ = std::make_unique<RemoteChatBackend>(config_);
            break;
    }
    load_cache();
}

LlmClient::LlmClient(LlmBackendConfig config, std::unique_ptr<LlmBackend> backend)
    : config_(std::move(config)), backend_(std::move(backend)) {
    load_cache();
}

std::string LlmClient::cache_key(const LlmBackendConfig& config, const PromptSpec& prompt) {
    std::string material = std::string(to_string(config.backend)) + "|" + config.model_name + "|" +
                           sha256_hex(prompt.rendered) + "|" + temperature_token(config);
    return sha256_hex(material);
}

void LlmClient::load_cache() {
    if (config_.cache_path.empty()) return;
    std::ifstream in(config_.cache_path);
    if (!in) return;  // nothing cached yet
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;  // torn tail line from an interrupted run
        if (j.contains("key") && j.contains("response"))
            cache_[j["key"].get<std::string>()] = j["response"].get<std::string>();
    }
}

void LlmClient::store(const std::string& key, const PromptSpec& prompt,
                      const std::string& response) {
    cache_[key] = response;
    if (config_.cache_path.empty()) return;
    std::ofstream out(config_.cache_path, std::ios::app | std::ios::binary);
    if (!out) throw DataError("cannot append to cache: " + config_.cache_path);
    nlohmann::json j;
    j["key"] = key;
    j["backend"] = std::string(to_string(config_.backend));
    j["model"] = config_.model_name;
    j["prompt_sha256"] = sha256_hex(prompt.rendered);
    j["response"] = response;
    j["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    out << j.dump() << "\n";
}

std::string LlmClient::complete(const PromptSpec& prompt) {
    const std::string key = cache_key(config_, prompt);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) {
            ++cache_hits_;
            return it->second;
        }
    }
    std::string response = backend_->complete(prompt);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        ++backend_calls_;
        store(key, prompt, response);
    }
    return response;
}

std::optional<TripMode> parse_mode(const std::string& raw) {
    // Strict: the whole reply is one label, modulo whitespace/punctuation.
    auto is_junk = [](char c) {
        return std::isspace(static_cast<unsigned char>(c)) || c == '.' || c == ',' || c == '!' ||
               c == '?' || c == ';' || c == ':' || c == '"' || c == '\'' || c == '(' ||
               c == ')' || c == '[' || c == ']';
    };
    std::size_t begin = 0, end = raw.size();
    while (begin < end && is_junk(raw[begin])) ++begin;
    while (end > begin && is_junk(raw[end - 1])) --end;
    std::string trimmed = lowercase(raw.substr(begin, end - begin));
    for (TripMode m : kModeOrder) {
        if (trimmed == lowercase(std::string(to_string(m)))) return m;
    }
    if (trimmed == "bike" || trimmed == "micromobility") return TripMode::BikeMicromobility;

    // Lenient: a unique label substring anywhere in the reply.
    std::string haystack = lowercase(raw);
    auto contains = [&](std::string_view needle) {
        return haystack.find(needle) != std::string::npos;
    };
    std::vector<TripMode> found;
    if (contains("drive")) found.push_back(TripMode::Drive);
    if (contains("walk")) found.push_back(TripMode::Walk);
    if (contains("transit")) found.push_back(TripMode::Transit);
    if (contains("bike") || contains("micromobility")) found.push_back(TripMode::BikeMicromobility);
    if (found.size() == 1) return found.front();
    return std::nullopt;
}

TripMode majority_mode(const RetrievalResult& retrieval) {
    std::vector<TripMode> ordered;
    ordered.reserve(retrieval.items.size());
    for (const auto& item : retrieval.items) ordered.push_back(item.mode);
    if (ordered.empty()) return TripMode::Drive;
    return majority_of(ordered);
}

nlohmann::json Prediction::to_json() const {
    nlohmann::json j;
    j["query_doc_id"] = query_doc_id;
    j["mode"] = std::string(to_string(mode));
    j["raw_output"] = raw_output;
    j["backend"] = backend;
    j["fallback_used"] = fallback_used;
    j["retrieval"] = retrieval ? retrieval->to_json() : nlohmann::json();
    return j;
}

Prediction Prediction::from_json(const nlohmann::json& j) {
    Prediction p;
    p.query_doc_id = j.at("query_doc_id").get<std::int64_t>();
    auto mode = mode_from_string(j.at("mode").get<std::string>());
    if (!mode) throw DataError("prediction json: unknown mode");
    p.mode = *mode;
    p.raw_output = j.at("raw_output").get<std::string>();
    p.backend = j.at("backend").get<std::string>();
    p.fallback_used = j.at("fallback_used").get<bool>();
    if (!j.at("retrieval").is_null()) p.retrieval = RetrievalResult::from_json(j["retrieval"]);
    return p;
}

Prediction predict_one(const Document& query_doc, const std::optional<RetrievalResult>& retrieval,
                       LlmClient& client, const Corpus& corpus) {
    PromptSpec prompt = build_prompt(query_doc, retrieval, corpus);

    Prediction prediction;
    prediction.query_doc_id = query_doc.doc_id;
    prediction.backend = std::string(to_string(client.config().backend));
    prediction.retrieval = retrieval;

    prediction.raw_output = client.complete(prompt);
    auto mode = parse_mode(prediction.raw_output);
    if (!mode) {
        prediction.raw_output = client.complete(with_answer_nudge(prompt));
        mode = parse_mode(prediction.raw_output);
    }
    if (mode) {
        prediction.mode = *mode;
    } else {
        prediction.fallback_used = true;
        prediction.mode = retrieval ? majority_mode(*retrieval) : TripMode::Drive;
    }
    return prediction;
}

}  // namespace tmc
