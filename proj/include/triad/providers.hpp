#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "triad/config.hpp"

namespace triad::providers {

struct ChatRequest {
    std::optional<std::string> system_text;
    std::string user_text;  // must be non-empty
    std::string model;
    double temperature = 0.0;
    int max_tokens = 0;
};

struct ChatResponse {
    std::string text;
    std::string provider_id;
    int raw_status = 0;  // 0 for replay
    int attempt_count = 1;
};

struct WireRequest {
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;  // JSON
};

// status == 0 means the request never reached the server (network error).
struct HttpResult {
    int status = 0;
    std::string body;
    std::string error;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResult post(const WireRequest& request) = 0;
};

class Sleeper {
public:
    virtual ~Sleeper() = default;
    virtual void sleep_for(std::chrono::milliseconds delay) = 0;
};

class ThreadSleeper : public Sleeper {
public:
    void sleep_for(std::chrono::milliseconds delay) override;
};

// TLS-capable transport backed by cpp-httplib.
std::unique_ptr<HttpTransport> make_httplib_transport();

inline constexpr const char* kDefaultAnthropicVersion = "2023-06-01";

// Rewrites base_url to "<prefix>/v1/chat/completions" with exactly one /v1
// segment. Idempotent.
std::string normalize_openai_endpoint(const std::string& base_url);

WireRequest build_openai_request(const config::ProviderSettings& settings,
                                 const ChatRequest& request);
WireRequest build_anthropic_request(const config::ProviderSettings& settings,
                                    const ChatRequest& request);

// First-candidate completion text from a provider response body.
std::string extract_completion_text(config::ProviderKind kind, const std::string& body);

// Sends the request with bounded retries: transient failures (network
// errors, HTTP 429/5xx) back off base_delay * multiplier^(attempt-1); other
// 4xx statuses fail immediately with the payload attached.
ChatResponse complete(const config::ProviderSettings& settings, const ChatRequest& request,
                      const config::RetryPolicy& retry, HttpTransport& transport,
                      Sleeper& sleeper);

// Deterministic offline provider: returns the contents of
// <fixture_dir>/<phase>_<role>.md verbatim.
ChatResponse replay_complete(const std::filesystem::path& fixture_dir, const std::string& phase,
                             const std::string& role, const std::string& provider_id);

}  // namespace triad::providers
