#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace triad::config {

enum class ProviderKind {
    openai_chat,
    anthropic_messages,
    replay,
};

std::string to_string(ProviderKind kind);
ProviderKind provider_kind_from_string(const std::string& text);

// Per-provider completion settings. temperature and max_tokens have no
// defaults: loading fails if either is missing. context_limit_tokens and
// chars_per_token_ratio default per kind (16000 / 200000, ratio 0.25).
struct ProviderSettings {
    std::string id;
    ProviderKind kind = ProviderKind::openai_chat;
    std::string base_url;
    std::string api_key;
    std::string model;
    double temperature = 0.0;
    int max_tokens = 0;
    long context_limit_tokens = 0;
    double chars_per_token_ratio = 0.25;
    std::string anthropic_version;  // pinned default, overridable per provider
    std::string fixture_dir;        // replay kind only

    bool operator==(const ProviderSettings&) const = default;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{1000};
    double multiplier = 2.0;

    bool operator==(const RetryPolicy&) const = default;
};

struct WorkflowSettings {
    std::string analyst_a;
    std::string analyst_b;
    std::string arbitrator;
    std::filesystem::path prompt_phase1;
    std::filesystem::path prompt_phase2;
    std::filesystem::path prompt_phase3;
    RetryPolicy retry;
    double safety_margin = 0.75;
    std::filesystem::path results_root;
    std::vector<std::string> exclude_dirs;  // corpus scan exclusions

    bool operator==(const WorkflowSettings&) const = default;
};

struct Config {
    std::vector<ProviderSettings> providers;
    WorkflowSettings workflow;

    const ProviderSettings& provider(const std::string& id) const;

    bool operator==(const Config&) const = default;
};

using EnvMap = std::map<std::string, std::string>;

// Replaces every ${NAME} whose NAME matches [A-Z0-9_]+ with env[NAME].
// A matching pattern whose NAME is not in env is a hard error; text that
// does not match the pattern passes through untouched.
std::string substitute_env(const std::string& text, const EnvMap& env);

// Parses KEY=VALUE lines (dotenv style; '#' comments, blank lines allowed).
EnvMap parse_env_file(const std::string& text);

// Snapshot of the process environment.
EnvMap process_env();

// Loads and validates a config file. YAML is the canonical format; files
// ending in .json are parsed as JSON. A `.env` file next to the config is
// loaded first; entries from `env` (normally the process environment) win
// on conflict. Substitution applies to string values inside the `apis`
// section only. Relative paths resolve against the config file's directory.
Config load_config(const std::filesystem::path& path, const EnvMap& env);

// Serializes a Config back to canonical YAML. With redact_secrets, api_key
// values are replaced by a placeholder; the result reloads to an equal
// Config (modulo the redacted keys).
std::string render_config(const Config& cfg, bool redact_secrets);

inline constexpr const char* kRedactedApiKey = "<redacted>";
inline constexpr long kDefaultOpenAiContextLimit = 16000;
inline constexpr long kDefaultAnthropicContextLimit = 200000;
inline constexpr double kDefaultCharsPerTokenRatio = 0.25;
inline constexpr double kDefaultSafetyMargin = 0.75;

}  // namespace triad::config
