#include "triad/providers.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <thread>

#include "triad/errors.hpp"
#include "triad/fs_util.hpp"

namespace triad::providers {

namespace {

using nlohmann::json;

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void strip_trailing_slashes(std::string& s, std::size_t floor_size) {
    while (s.size() > floor_size && s.back() == '/') s.pop_back();
}

// Returns the index just past "scheme://host[:port]"; throws on non-URLs.
std::size_t check_absolute_url(const std::string& url) {
    std::size_t host_start = 0;
    if (url.rfind("https://", 0) == 0) {
        host_start = 8;
    } else if (url.rfind("http://", 0) == 0) {
        host_start = 7;
    } else {
        throw ConfigError("not an absolute http(s) URL: '" + url + "'");
    }
    std::size_t host_end = url.find('/', host_start);
    if (host_end == std::string::npos) host_end = url.size();
    if (host_end == host_start) {
        throw ConfigError("URL has no host: '" + url + "'");
    }
    return host_end;
}

json build_message(const char* role, const std::string& content) {
    return json{{"content", content}, {"role", role}};
}

}  // namespace

void ThreadSleeper::sleep_for(std::chrono::milliseconds delay) {
    std::this_thread::sleep_for(delay);
}

std::string normalize_openai_endpoint(const std::string& base_url) {
    const std::size_t host_end = check_absolute_url(base_url);
    std::string url = base_url;
    strip_trailing_slashes(url, host_end);
    if (ends_with(url, "/chat/completions")) {
        url.resize(url.size() - std::string_view("/chat/completions").size());
        strip_trailing_slashes(url, host_end);
    }
    while (ends_with(url, "/v1")) {
        url.resize(url.size() - 3);
        strip_trailing_slashes(url, host_end);
    }
    return url + "/v1/chat/completions";
}

WireRequest build_openai_request(const config::ProviderSettings& settings,
                                 const ChatRequest& request) {
    WireRequest wire;
    wire.url = normalize_openai_endpoint(settings.base_url);
    wire.headers = {{"Authorization", "Bearer " + settings.api_key},
                    {"Content-Type", "application/json"}};

    json messages = json::array();
    if (request.system_text) {
        messages.push_back(build_message("system", *request.system_text));
    }
    messages.push_back(build_message("user", request.user_text));

    // nlohmann objects serialize with sorted keys: stable field order.
    json body{{"max_tokens", request.max_tokens},
              {"messages", std::move(messages)},
              {"model", request.model},
              {"temperature", request.temperature}};
    wire.body = body.dump();
    return wire;
}

WireRequest build_anthropic_request(const config::ProviderSettings& settings,
                                    const ChatRequest& request) {
    if (settings.api_key.empty()) {
        throw ConfigError("provider '" + settings.id + "': api_key is required");
    }
    const std::size_t host_end = check_absolute_url(settings.base_url);

    WireRequest wire;
    wire.url = settings.base_url;
    strip_trailing_slashes(wire.url, host_end);
    if (!ends_with(wire.url, "/v1/messages")) {
        wire.url += ends_with(wire.url, "/v1") ? "/messages" : "/v1/messages";
    }

    const std::string version =
        settings.anthropic_version.empty() ? kDefaultAnthropicVersion : settings.anthropic_version;
    wire.headers = {{"x-api-key", settings.api_key},
                    {"anthropic-version", version},
                    {"Content-Type", "application/json"}};

    json body{{"max_tokens", request.max_tokens},
              {"messages", json::array({build_message("user", request.user_text)})},
              {"model", request.model},
              {"temperature", request.temperature}};
    if (request.system_text) {
        body["system"] = *request.system_text;
    }
    wire.body = body.dump();
    return wire;
}

std::string extract_completion_text(config::ProviderKind kind, const std::string& body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        throw ParseError(std::string("provider response is not valid JSON: ") + e.what());
    }
    try {
        if (kind == config::ProviderKind::openai_chat) {
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        }
        if (kind == config::ProviderKind::anthropic_messages) {
            return doc.at("content").at(0).at("text").get<std::string>();
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("provider response missing completion text: ") + e.what());
    }
    throw ConfigError("replay providers carry no wire format");
}

ChatResponse complete(const config::ProviderSettings& settings, const ChatRequest& request,
                      const config::RetryPolicy& retry, HttpTransport& transport,
                      Sleeper& sleeper) {
    if (request.user_text.empty()) {
        throw InputError("chat request user_text must be non-empty");
    }
    if (settings.kind == config::ProviderKind::replay) {
        throw ConfigError("provider '" + settings.id + "': replay providers are not HTTP-backed");
    }
    const WireRequest wire = settings.kind == config::ProviderKind::openai_chat
                                 ? build_openai_request(settings, request)
                                 : build_anthropic_request(settings, request);

    HttpResult last;
    for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
        if (attempt > 1) {
            const double factor = std::pow(retry.multiplier, attempt - 2);
            const auto delay = std::chrono::milliseconds(static_cast<long long>(
                std::llround(static_cast<double>(retry.base_delay.count()) * factor)));
            sleeper.sleep_for(delay);
        }
        last = transport.post(wire);
        if (last.status >= 200 && last.status < 300) {
            std::string text;
            try {
                text = extract_completion_text(settings.kind, last.body);
            } catch (const ParseError& e) {
                throw ProviderError(settings.id, last.status, last.body, attempt,
                                    "provider '" + settings.id + "': " + e.what());
            }
            ChatResponse response;
            response.text = std::move(text);
            response.provider_id = settings.id;
            response.raw_status = last.status;
            response.attempt_count = attempt;
            return response;
        }
        const bool transient = last.status == 0 || last.status == 429 || last.status >= 500;
        if (!transient) {
            throw ProviderError(settings.id, last.status, last.body, attempt,
                                "provider '" + settings.id + "' returned HTTP " +
                                    std::to_string(last.status) + ": " + last.body);
        }
    }
    const std::string payload = last.body.empty() ? last.error : last.body;
    throw ProviderError(settings.id, last.status, payload, retry.max_attempts,
                        "provider '" + settings.id + "' failed after " +
                            std::to_string(retry.max_attempts) + " attempts: " + payload);
}

ChatResponse replay_complete(const std::filesystem::path& fixture_dir, const std::string& phase,
                             const std::string& role, const std::string& provider_id) {
    const std::string filename = phase + "_" + role + ".md";
    const std::filesystem::path path = fixture_dir / filename;
    if (!std::filesystem::exists(path)) {
        throw ProviderError(provider_id, 0, "", 1, "replay fixture not found: " + filename);
    }
    ChatResponse response;
    response.text = fsu::read_file(path);
    response.provider_id = provider_id;
    response.raw_status = 0;
    response.attempt_count = 1;
    return response;
}

}  // namespace triad::providers
