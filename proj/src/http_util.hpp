#pragma once

#include <string>

#include <json.hpp>

namespace tmc::detail {

struct ParsedUrl {
    std::string base;         // scheme://host[:port]
    std::string path_prefix;  // possibly empty, no trailing slash
};

ParsedUrl parse_url(const std::string& url);

// POST body as JSON, expect a JSON reply. Retries (connection failures and
// non-2xx statuses) up to max_retries attempts with doubling backoff, then
// throws BackendError.
nlohmann::json post_json(const std::string& endpoint, const std::string& path,
                         const nlohmann::json& body, const std::string& bearer_token,
                         int max_retries, int backoff_ms);

// Resolves a credential: reads the named environment variable, empty string
// when the variable is unset (callers decide whether that is an error).
std::string credential_from_env(const std::string& env_var);

}  // namespace tmc::detail
