#include "triad/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <nlohmann/json.hpp>

#include "triad/corpus.hpp"
#include "triad/errors.hpp"
#include "triad/fs_util.hpp"

extern char** environ;

namespace triad::config {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

bool is_env_name_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined:
            return nullptr;
        case YAML::NodeType::Scalar:
            // Typing is deferred to field extraction; scalars stay strings.
            return node.Scalar();
        case YAML::NodeType::Sequence: {
            json arr = json::array();
            for (const auto& item : node) arr.push_back(yaml_to_json(item));
            return arr;
        }
        case YAML::NodeType::Map: {
            json obj = json::object();
            for (const auto& kv : node) obj[kv.first.Scalar()] = yaml_to_json(kv.second);
            return obj;
        }
    }
    return nullptr;
}

json parse_document(const std::string& text, bool as_json) {
    if (as_json) {
        try {
            return json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
    }
    try {
        return yaml_to_json(YAML::Load(text));
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
}

bool has_value(const json& obj, const char* key) {
    return obj.is_object() && obj.contains(key) && !obj.at(key).is_null();
}

std::string get_string(const json& obj, const char* key, const std::string& ctx) {
    if (!has_value(obj, key)) {
        throw ConfigError(ctx + ": missing required key '" + key + "'");
    }
    const json& v = obj.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_float()) return std::to_string(v.get<double>());
    throw ConfigError(ctx + ": key '" + key + "' must be a string");
}

double scalar_to_double(const json& v, const char* key, const std::string& ctx) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = trim(v.get<std::string>());
        try {
            std::size_t pos = 0;
            double out = std::stod(s, &pos);
            if (pos == s.size()) return out;
        } catch (...) {
        }
    }
    throw ConfigError(ctx + ": key '" + key + "' must be a number");
}

long scalar_to_long(const json& v, const char* key, const std::string& ctx) {
    if (v.is_number_integer()) return v.get<long>();
    if (v.is_string()) {
        const std::string s = trim(v.get<std::string>());
        try {
            std::size_t pos = 0;
            long out = std::stol(s, &pos);
            if (pos == s.size()) return out;
        } catch (...) {
        }
    }
    throw ConfigError(ctx + ": key '" + key + "' must be an integer");
}

double get_double(const json& obj, const char* key, const std::string& ctx) {
    if (!has_value(obj, key)) {
        throw ConfigError(ctx + ": missing required key '" + key + "'");
    }
    return scalar_to_double(obj.at(key), key, ctx);
}

long get_long(const json& obj, const char* key, const std::string& ctx) {
    if (!has_value(obj, key)) {
        throw ConfigError(ctx + ": missing required key '" + key + "'");
    }
    return scalar_to_long(obj.at(key), key, ctx);
}

void substitute_strings(json& node, const EnvMap& env) {
    if (node.is_string()) {
        node = substitute_env(node.get<std::string>(), env);
    } else if (node.is_object() || node.is_array()) {
        for (auto& child : node) substitute_strings(child, env);
    }
}

fs::path resolve_against(const fs::path& base_dir, const std::string& value) {
    fs::path p(value);
    return p.is_absolute() ? p : base_dir / p;
}

ProviderSettings parse_provider(const std::string& id, const json& node,
                                const fs::path& base_dir) {
    const std::string ctx = "provider '" + id + "'";
    if (!node.is_object()) {
        throw ConfigError(ctx + ": expected a map of settings");
    }

    ProviderSettings p;
    p.id = id;
    p.kind = provider_kind_from_string(get_string(node, "kind", ctx));

    const bool is_replay = p.kind == ProviderKind::replay;
    if (is_replay) {
        if (has_value(node, "base_url")) p.base_url = get_string(node, "base_url", ctx);
        if (has_value(node, "model")) p.model = get_string(node, "model", ctx);
    } else {
        p.base_url = get_string(node, "base_url", ctx);
        p.model = get_string(node, "model", ctx);
    }
    if (has_value(node, "api_key")) p.api_key = get_string(node, "api_key", ctx);

    // No defaults here: both must be explicitly set or loading fails.
    if (!has_value(node, "temperature")) {
        throw ConfigError(ctx + ": temperature must be set explicitly (no default)");
    }
    if (!has_value(node, "max_tokens")) {
        throw ConfigError(ctx + ": max_tokens must be set explicitly (no default)");
    }
    p.temperature = get_double(node, "temperature", ctx);
    if (p.temperature < 0.0 || p.temperature > 2.0) {
        throw ConfigError(ctx + ": temperature must be in [0, 2]");
    }
    p.max_tokens = static_cast<int>(get_long(node, "max_tokens", ctx));
    if (p.max_tokens <= 0) {
        throw ConfigError(ctx + ": max_tokens must be positive");
    }

    if (has_value(node, "context_limit_tokens")) {
        p.context_limit_tokens = get_long(node, "context_limit_tokens", ctx);
    } else {
        p.context_limit_tokens = p.kind == ProviderKind::openai_chat
                                     ? kDefaultOpenAiContextLimit
                                     : kDefaultAnthropicContextLimit;
    }
    if (p.context_limit_tokens <= 0) {
        throw ConfigError(ctx + ": context_limit_tokens must be positive");
    }

    p.chars_per_token_ratio = has_value(node, "chars_per_token_ratio")
                                  ? get_double(node, "chars_per_token_ratio", ctx)
                                  : kDefaultCharsPerTokenRatio;
    if (p.chars_per_token_ratio <= 0.0) {
        throw ConfigError(ctx + ": chars_per_token_ratio must be positive");
    }

    if (has_value(node, "anthropic_version")) {
        p.anthropic_version = get_string(node, "anthropic_version", ctx);
    }
    if (has_value(node, "fixture_dir")) {
        p.fixture_dir = resolve_against(base_dir, get_string(node, "fixture_dir", ctx)).string();
    }
    return p;
}

void check_prompt_file(const fs::path& path, const char* which) {
    if (!fs::exists(path) || !fs::is_regular_file(path)) {
        throw ConfigError(std::string(which) + " prompt file not found: " + path.string());
    }
    if (fs::file_size(path) == 0) {
        throw ConfigError(std::string(which) + " prompt file is empty: " + path.string());
    }
}

WorkflowSettings parse_workflow(const json& node, const fs::path& base_dir) {
    const std::string ctx = "workflow";
    if (!node.is_object()) {
        throw ConfigError("config: missing 'workflow' section");
    }

    WorkflowSettings w;
    w.analyst_a = get_string(node, "analyst_a", ctx);
    w.analyst_b = get_string(node, "analyst_b", ctx);
    w.arbitrator = get_string(node, "arbitrator", ctx);

    if (!has_value(node, "prompts")) {
        throw ConfigError("workflow: missing 'prompts' section");
    }
    const json& prompts = node.at("prompts");
    w.prompt_phase1 = resolve_against(base_dir, get_string(prompts, "phase1", "workflow.prompts"));
    w.prompt_phase2 = resolve_against(base_dir, get_string(prompts, "phase2", "workflow.prompts"));
    w.prompt_phase3 = resolve_against(base_dir, get_string(prompts, "phase3", "workflow.prompts"));
    check_prompt_file(w.prompt_phase1, "phase1");
    check_prompt_file(w.prompt_phase2, "phase2");
    check_prompt_file(w.prompt_phase3, "phase3");

    if (has_value(node, "retry")) {
        const json& retry = node.at("retry");
        if (has_value(retry, "max_attempts")) {
            w.retry.max_attempts = static_cast<int>(get_long(retry, "max_attempts", "workflow.retry"));
        }
        if (has_value(retry, "base_delay_ms")) {
            w.retry.base_delay =
                std::chrono::milliseconds(get_long(retry, "base_delay_ms", "workflow.retry"));
        }
        if (has_value(retry, "multiplier")) {
            w.retry.multiplier = get_double(retry, "multiplier", "workflow.retry");
        }
    }
    if (w.retry.max_attempts < 1) {
        throw ConfigError("workflow.retry: max_attempts must be >= 1");
    }
    if (w.retry.multiplier < 1.0) {
        throw ConfigError("workflow.retry: multiplier must be >= 1");
    }
    if (w.retry.base_delay.count() < 0) {
        throw ConfigError("workflow.retry: base_delay_ms must be >= 0");
    }

    w.safety_margin = has_value(node, "safety_margin")
                          ? get_double(node, "safety_margin", ctx)
                          : kDefaultSafetyMargin;
    if (w.safety_margin <= 0.0 || w.safety_margin > 1.0) {
        throw ConfigError("workflow: safety_margin must be in (0, 1]");
    }

    w.results_root = resolve_against(
        base_dir, has_value(node, "results_root") ? get_string(node, "results_root", ctx)
                                                  : std::string("results"));

    if (has_value(node, "exclude_dirs")) {
        const json& list = node.at("exclude_dirs");
        if (!list.is_array()) {
            throw ConfigError("workflow: exclude_dirs must be a list");
        }
        for (const auto& item : list) {
            if (!item.is_string()) {
                throw ConfigError("workflow: exclude_dirs entries must be strings");
            }
            w.exclude_dirs.push_back(item.get<std::string>());
        }
    } else {
        w.exclude_dirs = corpus::default_excluded_dirs();
    }
    return w;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

std::string to_string(ProviderKind kind) {
    switch (kind) {
        case ProviderKind::openai_chat: return "openai-chat";
        case ProviderKind::anthropic_messages: return "anthropic-messages";
        case ProviderKind::replay: return "replay";
    }
    return "openai-chat";
}

ProviderKind provider_kind_from_string(const std::string& text) {
    if (text == "openai-chat") return ProviderKind::openai_chat;
    if (text == "anthropic-messages") return ProviderKind::anthropic_messages;
    if (text == "replay") return ProviderKind::replay;
    throw ConfigError("unknown provider kind: '" + text +
                      "' (expected openai-chat, anthropic-messages, or replay)");
}

const ProviderSettings& Config::provider(const std::string& id) const {
    auto it = std::find_if(providers.begin(), providers.end(),
                           [&](const ProviderSettings& p) { return p.id == id; });
    if (it == providers.end()) {
        throw ConfigError("unknown provider id: '" + id + "'");
    }
    return *it;
}

std::string substitute_env(const std::string& text, const EnvMap& env) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '$' && i + 1 < text.size() && text[i + 1] == '{') {
            std::size_t close = text.find('}', i + 2);
            if (close != std::string::npos) {
                const std::string name = text.substr(i + 2, close - i - 2);
                const bool valid_name =
                    !name.empty() && std::all_of(name.begin(), name.end(), is_env_name_char);
                if (valid_name) {
                    auto it = env.find(name);
                    if (it == env.end()) {
                        throw ConfigError("undefined environment variable: " + name);
                    }
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += text[i];
        ++i;
    }
    return out;
}

EnvMap parse_env_file(const std::string& text) {
    EnvMap env;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string line = text.substr(pos, eol == std::string::npos ? eol : eol - pos);
        pos = eol == std::string::npos ? text.size() + 1 : eol + 1;

        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                                  (value.front() == '\'' && value.back() == '\''))) {
            value = value.substr(1, value.size() - 2);
        }
        if (!key.empty()) env[key] = value;
    }
    return env;
}

EnvMap process_env() {
    EnvMap env;
    for (char** e = environ; e && *e; ++e) {
        const std::string entry(*e);
        std::size_t eq = entry.find('=');
        if (eq != std::string::npos) {
            env[entry.substr(0, eq)] = entry.substr(eq + 1);
        }
    }
    return env;
}

Config load_config(const std::filesystem::path& path, const EnvMap& env) {
    if (!fs::exists(path)) {
        throw ConfigError("config file not found: " + path.string());
    }
    const std::string text = fsu::read_file(path);
    const bool as_json = path.extension() == ".json";
    json doc = parse_document(text, as_json);
    if (!doc.is_object()) {
        throw ConfigError("config: top level must be a map");
    }

    // .env beside the config loads first; the caller's env wins on conflict.
    EnvMap combined;
    const fs::path env_file = path.parent_path() / ".env";
    if (fs::exists(env_file)) {
        combined = parse_env_file(fsu::read_file(env_file));
    }
    for (const auto& [k, v] : env) combined[k] = v;

    if (!has_value(doc, "apis") || !doc.at("apis").is_object() || doc.at("apis").empty()) {
        throw ConfigError("config: missing or empty 'apis' section");
    }
    // Substitution is restricted to provider settings.
    substitute_strings(doc.at("apis"), combined);

    const fs::path base_dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    Config cfg;
    for (const auto& [id, node] : doc.at("apis").items()) {
        cfg.providers.push_back(parse_provider(id, node, base_dir));
    }

    if (!has_value(doc, "workflow")) {
        throw ConfigError("config: missing 'workflow' section");
    }
    cfg.workflow = parse_workflow(doc.at("workflow"), base_dir);

    for (const auto* role : {&cfg.workflow.analyst_a, &cfg.workflow.analyst_b,
                             &cfg.workflow.arbitrator}) {
        auto it = std::find_if(cfg.providers.begin(), cfg.providers.end(),
                               [&](const ProviderSettings& p) { return p.id == *role; });
        if (it == cfg.providers.end()) {
            throw ConfigError("workflow: role references unknown provider '" + *role + "'");
        }
    }
    return cfg;
}

std::string render_config(const Config& cfg, bool redact_secrets) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "apis" << YAML::Value << YAML::BeginMap;
    for (const auto& p : cfg.providers) {
        out << YAML::Key << p.id << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "kind" << YAML::Value << to_string(p.kind);
        if (!p.base_url.empty()) out << YAML::Key << "base_url" << YAML::Value << p.base_url;
        if (!p.api_key.empty()) {
            out << YAML::Key << "api_key" << YAML::Value
                << (redact_secrets ? std::string(kRedactedApiKey) : p.api_key);
        }
        if (!p.model.empty()) out << YAML::Key << "model" << YAML::Value << p.model;
        out << YAML::Key << "temperature" << YAML::Value << format_double(p.temperature);
        out << YAML::Key << "max_tokens" << YAML::Value << p.max_tokens;
        out << YAML::Key << "context_limit_tokens" << YAML::Value << p.context_limit_tokens;
        out << YAML::Key << "chars_per_token_ratio" << YAML::Value
            << format_double(p.chars_per_token_ratio);
        if (!p.anthropic_version.empty()) {
            out << YAML::Key << "anthropic_version" << YAML::Value << p.anthropic_version;
        }
        if (!p.fixture_dir.empty()) {
            out << YAML::Key << "fixture_dir" << YAML::Value << p.fixture_dir;
        }
        out << YAML::EndMap;
    }
    out << YAML::EndMap;

    const WorkflowSettings& w = cfg.workflow;
    out << YAML::Key << "workflow" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "analyst_a" << YAML::Value << w.analyst_a;
    out << YAML::Key << "analyst_b" << YAML::Value << w.analyst_b;
    out << YAML::Key << "arbitrator" << YAML::Value << w.arbitrator;
    out << YAML::Key << "prompts" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "phase1" << YAML::Value << w.prompt_phase1.string();
    out << YAML::Key << "phase2" << YAML::Value << w.prompt_phase2.string();
    out << YAML::Key << "phase3" << YAML::Value << w.prompt_phase3.string();
    out << YAML::EndMap;
    out << YAML::Key << "retry" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "max_attempts" << YAML::Value << w.retry.max_attempts;
    out << YAML::Key << "base_delay_ms" << YAML::Value
        << static_cast<long long>(w.retry.base_delay.count());
    out << YAML::Key << "multiplier" << YAML::Value << format_double(w.retry.multiplier);
    out << YAML::EndMap;
    out << YAML::Key << "safety_margin" << YAML::Value << format_double(w.safety_margin);
    out << YAML::Key << "results_root" << YAML::Value << w.results_root.string();
    out << YAML::Key << "exclude_dirs" << YAML::Value << YAML::BeginSeq;
    for (const auto& d : w.exclude_dirs) out << d;
    out << YAML::EndSeq;
    out << YAML::EndMap;
    out << YAML::EndMap;

    return std::string(out.c_str()) + "\n";
}

}  // namespace triad::config
