#pragma once

#include <chrono>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "triad/errors.hpp"
#include "triad/providers.hpp"
#include "triad/workflow.hpp"

namespace triad::testing {

// Transport that replays a fixed script of results and records every wire
// request it sees.
class ScriptedTransport : public providers::HttpTransport {
public:
    explicit ScriptedTransport(std::vector<providers::HttpResult> script = {})
        : script_(std::move(script)) {}

    providers::HttpResult post(const providers::WireRequest& request) override {
        requests.push_back(request);
        if (next_ < script_.size()) return script_[next_++];
        return providers::HttpResult{200, default_body, ""};
    }

    std::vector<providers::WireRequest> requests;
    std::string default_body = "{}";

private:
    std::vector<providers::HttpResult> script_;
    std::size_t next_ = 0;
};

// Records requested delays instead of blocking.
class FakeSleeper : public providers::Sleeper {
public:
    void sleep_for(std::chrono::milliseconds delay) override { waits.push_back(delay); }
    std::vector<std::chrono::milliseconds> waits;
};

inline std::string openai_body(const std::string& text) {
    nlohmann::json body{{"choices",
                         nlohmann::json::array(
                             {{{"message", {{"content", text}, {"role", "assistant"}}}}})}};
    return body.dump();
}

inline std::string anthropic_body(const std::string& text) {
    nlohmann::json body{{"content", nlohmann::json::array({{{"text", text},
                                                            {"type", "text"}}})}};
    return body.dump();
}

// Shared across the scripted clients of one workflow run so failures can be
// injected at an absolute call ordinal.
struct CallLog {
    std::vector<workflow::PhaseCall> calls;
    int fail_at_call = 0;  // 1-based; 0 disables injection
};

// Orchestrator-level stub: records every PhaseCall and answers via a
// responder function.
class ScriptedClient : public workflow::CompletionClient {
public:
    using Responder = std::function<std::string(const workflow::PhaseCall&)>;

    ScriptedClient(config::ProviderSettings settings, CallLog& log, Responder responder)
        : settings_(std::move(settings)), log_(log), responder_(std::move(responder)) {}

    providers::ChatResponse complete(const workflow::PhaseCall& call) override {
        log_.calls.push_back(call);
        if (log_.fail_at_call > 0 &&
            static_cast<int>(log_.calls.size()) == log_.fail_at_call) {
            throw ProviderError(settings_.id, 503, "injected failure", 1,
                                "provider '" + settings_.id + "' returned HTTP 503");
        }
        providers::ChatResponse response;
        response.text = responder_(call);
        response.provider_id = settings_.id;
        response.raw_status = 0;
        response.attempt_count = 1;
        return response;
    }

    const config::ProviderSettings& settings() const override { return settings_; }

private:
    config::ProviderSettings settings_;
    CallLog& log_;
    Responder responder_;
};

// Delegates to another client while logging the calls it forwards.
class RecordingClient : public workflow::CompletionClient {
public:
    RecordingClient(workflow::CompletionClient& inner, CallLog& log)
        : inner_(inner), log_(log) {}

    providers::ChatResponse complete(const workflow::PhaseCall& call) override {
        log_.calls.push_back(call);
        return inner_.complete(call);
    }
    const config::ProviderSettings& settings() const override { return inner_.settings(); }

private:
    workflow::CompletionClient& inner_;
    CallLog& log_;
};

inline config::ProviderSettings test_settings(const std::string& id,
                                              config::ProviderKind kind,
                                              long context_limit = 16000) {
    config::ProviderSettings s;
    s.id = id;
    s.kind = kind;
    s.base_url = "https://api.example.com";
    s.api_key = "test-key";
    s.model = "test-model";
    s.temperature = 0.1;
    s.max_tokens = 1000;
    s.context_limit_tokens = context_limit;
    s.chars_per_token_ratio = 0.25;
    return s;
}

}  // namespace triad::testing
