#include "triad/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <regex>

#include "triad/errors.hpp"
#include "triad/fs_util.hpp"
#include "triad/metrics.hpp"
#include "triad/tokens.hpp"
#include "triad/workflow.hpp"

namespace triad::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kScaffoldConfig = R"(apis:
  openai:
    kind: openai-chat
    base_url: https://api.openai.com
    api_key: ${OPENAI_API_KEY}
    model: gpt-3.5-turbo
    temperature: 0.1
    max_tokens: 3000
    context_limit_tokens: 16000
    chars_per_token_ratio: 0.25
  anthropic:
    kind: anthropic-messages
    base_url: https://api.anthropic.com
    api_key: ${ANTHROPIC_API_KEY}
    model: claude-sonnet-4-20250514
    temperature: 0.1
    max_tokens: 4000
    context_limit_tokens: 200000
    chars_per_token_ratio: 0.25
workflow:
  analyst_a: openai
  analyst_b: anthropic
  arbitrator: openai
  prompts:
    phase1: prompts/bug_slayer_prompt.txt
    phase2: prompts/audit_consolidator_prompt.txt
    phase3: prompts/final_consolidator_prompt.txt
  retry:
    max_attempts: 3
    base_delay_ms: 1000
    multiplier: 2
  safety_margin: 0.75
  results_root: results
)";

constexpr const char* kScaffoldEnvExample = R"(# Copy to .env and fill in real keys.
OPENAI_API_KEY=sk-...
ANTHROPIC_API_KEY=sk-ant-...
)";

constexpr const char* kScaffoldBug =
    "Describe the bug here: expected behavior, observed behavior, and any error output.\n";

constexpr const char* kScaffoldPhase1Prompt =
    "Analyze the reported bug in the codebase below and propose fixes.\n"
    "(Replace this placeholder with your phase-1 analysis prompt.)\n";

constexpr const char* kScaffoldPhase2Prompt =
    "Compare your prior analysis with the peer analysis and produce a consolidated assessment.\n"
    "(Replace this placeholder with your phase-2 cross-review prompt.)\n";

constexpr const char* kScaffoldPhase3Prompt =
    "Arbitrate the audits and consolidations below into a definitive fix document.\n"
    "(Replace this placeholder with your phase-3 arbitration prompt.)\n";

int exit_of(ExitStatus status) { return static_cast<int>(status); }

config::Config force_replay(config::Config cfg, const std::string& fixture_dir) {
    for (auto& p : cfg.providers) {
        p.kind = config::ProviderKind::replay;
        p.fixture_dir = fixture_dir;
    }
    return cfg;
}

struct ClientBundle {
    std::vector<std::unique_ptr<workflow::CompletionClient>> owned;
    std::unique_ptr<providers::HttpTransport> transport;
    workflow::ClientSet set;
};

ClientBundle build_clients(const config::Config& cfg, const Deps& deps) {
    ClientBundle bundle;
    const bool needs_http = std::any_of(
        cfg.providers.begin(), cfg.providers.end(), [&](const config::ProviderSettings& p) {
            return (p.id == cfg.workflow.analyst_a || p.id == cfg.workflow.analyst_b ||
                    p.id == cfg.workflow.arbitrator) &&
                   p.kind != config::ProviderKind::replay;
        });
    if (needs_http) {
        bundle.transport = deps.make_transport();
    }

    auto make_client = [&](const std::string& id) -> workflow::CompletionClient* {
        const config::ProviderSettings& settings = cfg.provider(id);
        if (settings.kind == config::ProviderKind::replay) {
            if (settings.fixture_dir.empty()) {
                throw ConfigError("provider '" + id +
                                  "': replay kind requires fixture_dir (or use --replay)");
            }
            bundle.owned.push_back(std::make_unique<workflow::ReplayCompletionClient>(
                settings.fixture_dir, settings));
        } else {
            bundle.owned.push_back(std::make_unique<workflow::HttpCompletionClient>(
                settings, cfg.workflow.retry, *bundle.transport, *deps.sleeper));
        }
        return bundle.owned.back().get();
    };
    bundle.set.analyst_a = make_client(cfg.workflow.analyst_a);
    bundle.set.analyst_b = make_client(cfg.workflow.analyst_b);
    bundle.set.arbitrator = make_client(cfg.workflow.arbitrator);
    return bundle;
}

void print_preflight(const PreflightReport& report, std::ostream& out) {
    out << "connectivity:\n";
    for (const auto& c : report.connectivity) {
        out << "  " << c.provider_id << ": " << c.status;
        if (!c.payload.empty()) out << " (" << c.payload << ")";
        out << "\n";
    }
    out << "token headroom:\n";
    for (const auto& h : report.headroom) {
        out << "  " << h.role << " (" << h.provider_id << "): corpus ~" << h.corpus_estimate
            << " tokens, effective budget " << h.effective_budget;
        if (h.feasible) {
            out << " -> " << h.chunk_count << (h.chunk_count == 1 ? " chunk" : " chunks");
        } else {
            out << " -> infeasible";
        }
        out << "\n";
    }
    out << "preflight: " << (report.pass ? "pass" : "fail") << "\n";
}

int preflight_exit(const PreflightReport& report) {
    for (const auto& c : report.connectivity) {
        if (c.status == "error") return exit_of(ExitStatus::provider_error);
    }
    for (const auto& h : report.headroom) {
        if (!h.feasible) return exit_of(ExitStatus::budget_error);
    }
    return 0;
}

int cmd_init(const std::string& target, const Deps& deps) {
    const fs::path dir(target);
    if (fs::exists(dir) && (!fs::is_directory(dir) || !fs::is_empty(dir))) {
        throw InputError("init target must be an empty or nonexistent directory: " +
                         dir.string());
    }
    fs::create_directories(dir / "codebase");
    fs::create_directories(dir / "prompts");
    fsu::write_file(dir / "config.yaml", kScaffoldConfig);
    fsu::write_file(dir / ".env.example", kScaffoldEnvExample);
    fsu::write_file(dir / "bug.txt", kScaffoldBug);
    fsu::write_file(dir / "prompts/bug_slayer_prompt.txt", kScaffoldPhase1Prompt);
    fsu::write_file(dir / "prompts/audit_consolidator_prompt.txt", kScaffoldPhase2Prompt);
    fsu::write_file(dir / "prompts/final_consolidator_prompt.txt", kScaffoldPhase3Prompt);

    *deps.out << "initialized " << dir.string() << "\n";
    for (const char* rel :
         {"config.yaml", ".env.example", "bug.txt", "codebase/", "prompts/bug_slayer_prompt.txt",
          "prompts/audit_consolidator_prompt.txt", "prompts/final_consolidator_prompt.txt"}) {
        *deps.out << "  " << rel << "\n";
    }
    *deps.out << "next: fill in codebase/, bug.txt, and provider keys (.env), then run "
                 "'triad check'\n";
    return 0;
}

fs::path default_sibling(const std::string& config_path, const char* name) {
    const fs::path cfg(config_path);
    return cfg.has_parent_path() ? cfg.parent_path() / name : fs::path(name);
}

int cmd_check(const std::string& config_path, const std::string& codebase,
              const std::string& replay_dir, const Deps& deps) {
    config::Config cfg = config::load_config(config_path, deps.env);
    if (!replay_dir.empty()) cfg = force_replay(cfg, replay_dir);
    const fs::path codebase_dir =
        codebase.empty() ? default_sibling(config_path, "codebase") : fs::path(codebase);
    const corpus::Corpus corpus = corpus::scan_codebase(codebase_dir, cfg.workflow.exclude_dirs);
    const PreflightReport report = preflight(cfg, corpus, deps);
    print_preflight(report, *deps.out);
    return preflight_exit(report);
}

int cmd_run(const std::string& config_path, const std::string& bug, const std::string& codebase,
            const std::string& replay_dir, bool skip_check, const Deps& deps) {
    config::Config cfg = config::load_config(config_path, deps.env);
    if (!replay_dir.empty()) cfg = force_replay(cfg, replay_dir);
    const fs::path bug_path = bug.empty() ? default_sibling(config_path, "bug.txt") : fs::path(bug);
    const fs::path codebase_dir =
        codebase.empty() ? default_sibling(config_path, "codebase") : fs::path(codebase);

    if (!skip_check) {
        const corpus::Corpus corpus =
            corpus::scan_codebase(codebase_dir, cfg.workflow.exclude_dirs);
        const PreflightReport report = preflight(cfg, corpus, deps);
        const int code = preflight_exit(report);
        if (code != 0) {
            print_preflight(report, *deps.err);
            return code;
        }
    }

    ClientBundle clients = build_clients(cfg, deps);
    const workflow::RunManifest manifest =
        workflow::run_workflow(cfg, bug_path, codebase_dir, clients.set);
    *deps.out << "run directory: " << manifest.run_dir.path.string() << "\n";
    *deps.out << "artifacts:\n";
    for (const auto& artifact : manifest.artifacts) {
        *deps.out << "  " << artifact.filename << "\n";
    }
    return 0;
}

bool is_glob(const std::string& s) {
    return s.find('*') != std::string::npos || s.find('?') != std::string::npos;
}

std::regex glob_to_regex(const std::string& pattern) {
    std::string re;
    for (char c : pattern) {
        switch (c) {
            case '*': re += ".*"; break;
            case '?': re += '.'; break;
            default:
                if (std::string("\\^$.|+()[]{}").find(c) != std::string::npos) re += '\\';
                re += c;
        }
    }
    return std::regex(re);
}

std::vector<fs::path> resolve_inputs(const std::vector<std::string>& args) {
    std::vector<fs::path> files;
    for (const auto& arg : args) {
        if (!is_glob(arg)) {
            if (!fs::exists(arg)) {
                throw InputError("metrics input not found: " + arg);
            }
            files.emplace_back(arg);
            continue;
        }
        const fs::path pattern(arg);
        const fs::path parent =
            pattern.has_parent_path() ? pattern.parent_path() : fs::path(".");
        if (!fs::is_directory(parent)) continue;
        const std::regex re = glob_to_regex(pattern.filename().string());
        for (const auto& entry : fs::directory_iterator(parent)) {
            if (entry.is_regular_file() &&
                std::regex_match(entry.path().filename().string(), re)) {
                files.push_back(entry.path());
            }
        }
    }
    std::sort(files.begin(), files.end());
    files.erase(std::unique(files.begin(), files.end()), files.end());
    return files;
}

std::map<std::string, std::string> load_labels(const std::string& path) {
    std::map<std::string, std::string> labels;
    if (path.empty()) return labels;
    json doc;
    try {
        doc = json::parse(fsu::read_file(path));
    } catch (const json::exception& e) {
        throw ParseError("labels file is not valid JSON: " + path + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw ParseError("labels file must be a JSON object mapping run to label: " + path);
    }
    for (const auto& [key, value] : doc.items()) {
        if (!value.is_string()) {
            throw ParseError("labels file values must be strings: " + path);
        }
        labels[key] = value.get<std::string>();
        labels[fs::path(key).stem().string()] = value.get<std::string>();
    }
    return labels;
}

int cmd_metrics(const std::vector<std::string>& inputs, const std::string& labels_path,
                const std::string& csv_path, bool as_json, const std::string& ci_method,
                const Deps& deps) {
    const std::vector<fs::path> files = resolve_inputs(inputs);
    if (files.empty()) {
        throw InputError("no definitive-fixes files matched the given paths");
    }
    const auto labels = load_labels(labels_path);
    const metrics::CiMethod ci =
        ci_method == "wilson" ? metrics::CiMethod::wilson : metrics::CiMethod::wald;

    std::vector<metrics::RunMetrics> runs;
    std::vector<std::pair<std::string, std::string>> failures;
    for (const auto& file : files) {
        try {
            runs.push_back(
                metrics::analyze_document(fsu::read_file(file), file.stem().string()));
        } catch (const Error& e) {
            failures.emplace_back(file.string(), e.what());
        }
    }
    if (!failures.empty()) {
        *deps.err << "partial results: " << failures.size() << " of " << files.size()
                  << " documents failed to parse\n";
        for (const auto& [file, message] : failures) {
            *deps.err << "  " << file << ": " << message << "\n";
        }
    }
    if (!runs.empty()) {
        const metrics::AggregateMetrics agg = metrics::aggregate(runs, labels, ci);
        *deps.out << (as_json ? metrics::to_json(runs, agg) : metrics::to_table(runs, agg));
        if (!csv_path.empty()) {
            fsu::write_file(csv_path, metrics::to_csv(runs, labels));
            *deps.err << "wrote " << csv_path << "\n";
        }
    }
    return failures.empty() ? 0 : exit_of(ExitStatus::parse_error);
}

}  // namespace

Deps default_deps() {
    static providers::ThreadSleeper sleeper;
    Deps deps;
    deps.make_transport = [] { return providers::make_httplib_transport(); };
    deps.sleeper = &sleeper;
    deps.env = config::process_env();
    deps.out = &std::cout;
    deps.err = &std::cerr;
    return deps;
}

PreflightReport preflight(const config::Config& cfg, const corpus::Corpus& corpus,
                          const Deps& deps) {
    PreflightReport report;
    report.pass = true;

    // One minimal completion per distinct provider; replay needs no network.
    std::vector<std::string> seen;
    std::unique_ptr<providers::HttpTransport> transport;
    for (const std::string& role_id :
         {cfg.workflow.analyst_a, cfg.workflow.analyst_b, cfg.workflow.arbitrator}) {
        if (std::find(seen.begin(), seen.end(), role_id) != seen.end()) continue;
        seen.push_back(role_id);
        const config::ProviderSettings& settings = cfg.provider(role_id);
        ConnectivityCheck check;
        check.provider_id = settings.id;
        if (settings.kind == config::ProviderKind::replay) {
            check.status = "skipped";
        } else {
            if (!transport) transport = deps.make_transport();
            providers::ChatRequest request;
            request.user_text = "connectivity check: reply with ok";
            request.model = settings.model;
            request.temperature = settings.temperature;
            request.max_tokens = std::min(settings.max_tokens, 16);
            try {
                providers::complete(settings, request, cfg.workflow.retry, *transport,
                                    *deps.sleeper);
                check.status = "ok";
            } catch (const ProviderError& e) {
                check.status = "error";
                check.payload = e.response_payload.empty() ? e.what() : e.response_payload;
                report.pass = false;
            }
        }
        report.connectivity.push_back(std::move(check));
    }

    for (const auto& [role, provider_id] :
         {std::pair{std::string("analyst_a"), cfg.workflow.analyst_a},
          {std::string("analyst_b"), cfg.workflow.analyst_b},
          {std::string("arbitrator"), cfg.workflow.arbitrator}}) {
        const config::ProviderSettings& settings = cfg.provider(provider_id);
        HeadroomCheck h;
        h.role = role;
        h.provider_id = provider_id;
        const tokens::TokenBudget budget =
            tokens::make_budget(settings.context_limit_tokens, cfg.workflow.safety_margin);
        h.effective_budget = budget.effective_tokens;
        h.corpus_estimate =
            tokens::estimate_from_chars(corpus.total_chars, settings.chars_per_token_ratio);
        if (role == "arbitrator") {
            // Phases 2-3 take the corpus unchunked; report headroom only.
            h.feasible = true;
            h.chunk_count = 1;
        } else {
            try {
                h.chunk_count = static_cast<int>(
                    tokens::chunk_corpus(corpus, budget, settings.chars_per_token_ratio).size());
                h.feasible = true;
            } catch (const BudgetError&) {
                h.feasible = false;
                report.pass = false;
            }
        }
        report.headroom.push_back(std::move(h));
    }
    return report;
}

int dispatch(const std::vector<std::string>& args, const Deps& deps) {
    CLI::App app{"deterministic multi-provider analysis workflow"};
    app.require_subcommand(1);

    std::string target_dir;
    auto* init = app.add_subcommand("init", "scaffold a new project directory");
    init->add_option("target", target_dir, "directory to scaffold")->required();

    std::string config_path = "config.yaml";
    std::string codebase;
    std::string bug;
    std::string replay_dir;
    bool skip_check = false;

    auto* check = app.add_subcommand("check", "verify provider connectivity and token headroom");
    check->add_option("--config", config_path, "config file (default ./config.yaml)");
    check->add_option("--codebase", codebase, "codebase directory (default beside the config)");
    check->add_option("--replay", replay_dir, "force all providers to replay fixtures");

    auto* run = app.add_subcommand("run", "execute the three-phase workflow");
    run->add_option("--config", config_path, "config file (default ./config.yaml)");
    run->add_option("--bug", bug, "bug description file (default bug.txt beside the config)");
    run->add_option("--codebase", codebase, "codebase directory (default beside the config)");
    run->add_option("--replay", replay_dir, "force all providers to replay fixtures");
    run->add_flag("--skip-check", skip_check, "skip the preflight check");

    std::vector<std::string> metric_inputs;
    std::string labels_path;
    std::string csv_path;
    std::string ci_method = "wald";
    bool as_json = false;
    auto* metrics_cmd =
        app.add_subcommand("metrics", "compute statistics from definitive-fixes documents");
    metrics_cmd->add_option("paths", metric_inputs, "definitive-fixes files or globs")
        ->required();
    metrics_cmd->add_option("--labels", labels_path, "JSON file mapping run to group label");
    metrics_cmd->add_option("--csv", csv_path, "write per-run rows as CSV");
    metrics_cmd->add_flag("--json", as_json, "print the JSON document instead of the table");
    metrics_cmd->add_option("--ci", ci_method, "confidence interval method")
        ->check(CLI::IsMember({"wald", "wilson"}));

    std::vector<const char*> argv;
    argv.push_back("triad");
    for (const auto& arg : args) argv.push_back(arg.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        std::stringstream capture_out;
        std::stringstream capture_err;
        const int code = app.exit(e, capture_out, capture_err);
        *deps.out << capture_out.str();
        *deps.err << capture_err.str();
        return code == 0 ? 0 : exit_of(ExitStatus::input_error);
    }

    try {
        if (init->parsed()) return cmd_init(target_dir, deps);
        if (check->parsed()) return cmd_check(config_path, codebase, replay_dir, deps);
        if (run->parsed()) {
            return cmd_run(config_path, bug, codebase, replay_dir, skip_check, deps);
        }
        return cmd_metrics(metric_inputs, labels_path, csv_path, as_json, ci_method, deps);
    } catch (const Error& e) {
        *deps.err << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        *deps.err << "error: " << e.what() << "\n";
        return exit_of(ExitStatus::input_error);
    }
}

}  // namespace triad::cli
