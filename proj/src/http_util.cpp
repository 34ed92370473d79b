#include "http_util.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "tmc/errors.hpp"

namespace tmc::detail {

ParsedUrl parse_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("endpoint URL must include scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    if (path_start == std::string::npos) {
        out.base = url;
    } else {
        out.base = url.substr(0, path_start);
        out.path_prefix = url.substr(path_start);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/')
            out.path_prefix.pop_back();
    }
    return out;
}

nlohmann::json post_json(const std::string& endpoint, const std::string& path,
                         const nlohmann::json& body, const std::string& bearer_token,
                         int max_retries, int backoff_ms) {
    ParsedUrl url = parse_url(endpoint);
    httplib::Client client(url.base);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);

    const std::string payload = body.dump();
    const std::string full_path = url.path_prefix + path;
    std::string last_error;
    int backoff = backoff_ms;

    for (int attempt = 1; attempt <= max_retries; ++attempt) {
        auto res = client.Post(full_path, headers, payload, "application/json");
        if (res && res->status >= 200 && res->status < 300) {
            nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
            if (parsed.is_discarded())
                throw BackendError("non-JSON response from " + endpoint + path);
            return parsed;
        }
        if (res) {
            last_error = "HTTP " + std::to_string(res->status) + " from " + full_path;
        } else {
            last_error = "connection to " + url.base + " failed: " +
                         httplib::to_string(res.error());
        }
        if (attempt < max_retries) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
    }
    throw BackendError("request failed after " + std::to_string(max_retries) +
                       " attempts: " + last_error);
}

std::string credential_from_env(const std::string& env_var) {
    if (env_var.empty()) return "";
    const char* value = std::getenv(env_var.c_str());
    return value ? value : "";
}

}  // namespace tmc::detail
