#include "triad/workflow.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <nlohmann/json.hpp>
#include <regex>

#include "triad/errors.hpp"
#include "triad/fs_util.hpp"

namespace triad::workflow {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string iso_utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

bool all_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

providers::ChatRequest make_request(const config::ProviderSettings& settings,
                                    std::string prompt) {
    providers::ChatRequest request;
    request.user_text = std::move(prompt);
    request.model = settings.model;
    request.temperature = settings.temperature;
    request.max_tokens = settings.max_tokens;
    return request;
}

providers::ChatResponse issue_call(CompletionClient& client, const PhaseCall& call,
                                   int* call_count) {
    try {
        providers::ChatResponse response = client.complete(call);
        if (call_count) ++*call_count;
        return response;
    } catch (const ProviderError& e) {
        throw ProviderError(e.provider_id, e.final_status, e.response_payload, e.attempts,
                            to_string(call.phase) + "/" + to_string(call.role) + ": " + e.what());
    }
}

void check_prompt_budget(Phase phase, Role role, const config::ProviderSettings& settings,
                         double safety_margin, const std::string& prompt) {
    const tokens::TokenBudget budget =
        tokens::make_budget(settings.context_limit_tokens, safety_margin);
    const long estimate = tokens::estimate_tokens(prompt, settings.chars_per_token_ratio);
    if (estimate > budget.effective_tokens) {
        throw BudgetError(to_string(phase) + "/" + to_string(role) + ": prompt estimate of " +
                          std::to_string(estimate) + " tokens exceeds the effective budget of " +
                          std::to_string(budget.effective_tokens) + " for provider '" +
                          settings.id + "'");
    }
}

}  // namespace

std::string to_string(Phase phase) {
    switch (phase) {
        case Phase::phase1: return "phase1";
        case Phase::phase2: return "phase2";
        case Phase::phase3: return "phase3";
    }
    return "phase1";
}

std::string to_string(Role role) {
    switch (role) {
        case Role::analyst_a: return "analyst_a";
        case Role::analyst_b: return "analyst_b";
        case Role::arbitrator: return "arbitrator";
    }
    return "analyst_a";
}

providers::ChatResponse HttpCompletionClient::complete(const PhaseCall& call) {
    return providers::complete(settings_, call.request, retry_, transport_, sleeper_);
}

providers::ChatResponse ReplayCompletionClient::complete(const PhaseCall& call) {
    return providers::replay_complete(fixture_dir_, to_string(call.phase), to_string(call.role),
                                      settings_.id);
}

CompletionClient& ClientSet::for_role(Role role) const {
    CompletionClient* client = nullptr;
    switch (role) {
        case Role::analyst_a: client = analyst_a; break;
        case Role::analyst_b: client = analyst_b; break;
        case Role::arbitrator: client = arbitrator; break;
    }
    if (!client) {
        throw ConfigError("no client bound for role " + to_string(role));
    }
    return *client;
}

RunDirectory create_run_dir(const fs::path& results_root) {
    std::error_code ec;
    fs::create_directories(results_root, ec);
    if (ec || !fs::is_directory(results_root)) {
        throw InputError("cannot create results root: " + results_root.string());
    }

    static const std::regex kRunDirPattern(R"(^bug(\d{4})_results$)");
    int max_index = 0;
    for (const auto& entry : fs::directory_iterator(results_root)) {
        std::smatch match;
        const std::string name = entry.path().filename().string();
        if (std::regex_match(name, match, kRunDirPattern)) {
            max_index = std::max(max_index, std::stoi(match[1].str()));
        }
    }
    const int index = max_index + 1;
    if (index > 9999) {
        throw InputError("run directory index would exceed 9999 under: " + results_root.string());
    }

    char name[32];
    std::snprintf(name, sizeof name, "bug%04d_results", index);
    RunDirectory dir{index, results_root / name};
    fs::create_directory(dir.path);
    return dir;
}

std::string artifact_filename(Phase phase, Role role) {
    if (phase == Phase::phase1 && role == Role::analyst_a) return "audit_report_A.md";
    if (phase == Phase::phase1 && role == Role::analyst_b) return "audit_report_B.md";
    if (phase == Phase::phase2 && role == Role::analyst_a) return "consolidation_A.md";
    if (phase == Phase::phase2 && role == Role::analyst_b) return "consolidation_B.md";
    if (phase == Phase::phase3 && role == Role::arbitrator) return "definitive_fixes.md";
    throw ConfigError("no artifact defined for " + to_string(phase) + "/" + to_string(role));
}

std::string phase1_prompt(const std::string& tmpl, const std::string& task,
                          const std::string& chunk_text) {
    return tmpl + "\n\n## TASK\n\n" + task + "\n\n## CODEBASE\n\n" + chunk_text;
}

std::string phase2_prompt(const std::string& tmpl, const std::string& task,
                          const std::string& corpus_text, const std::string& own,
                          const std::string& peer) {
    return tmpl + "\n\n## TASK\n\n" + task + "\n\n## CODEBASE\n\n" + corpus_text +
           "\n\n## YOUR PRIOR ANALYSIS\n\n" + own + "\n\n## PEER ANALYSIS\n\n" + peer;
}

std::string phase3_prompt(const std::string& tmpl, const std::string& task,
                          const std::string& corpus_text, const std::string& audit_a,
                          const std::string& audit_b, const std::string& consolidation_a,
                          const std::string& consolidation_b) {
    return tmpl + "\n\n## TASK\n\n" + task + "\n\n## CODEBASE\n\n" + corpus_text +
           "\n\n## AUDIT A\n\n" + audit_a + "\n\n## AUDIT B\n\n" + audit_b +
           "\n\n## CONSOLIDATION A\n\n" + consolidation_a + "\n\n## CONSOLIDATION B\n\n" +
           consolidation_b;
}

std::string merge_chunk_responses(const std::vector<std::string>& responses) {
    if (responses.empty()) return "";
    if (responses.size() == 1) return responses.front();
    std::string merged = responses.front();
    for (std::size_t k = 1; k < responses.size(); ++k) {
        merged += "\n\n# ----- chunk " + std::to_string(k + 1) + "/" +
                  std::to_string(responses.size()) + " response -----\n\n";
        merged += responses[k];
    }
    return merged;
}

std::vector<tokens::CorpusChunk> phase1_chunks(const config::ProviderSettings& settings,
                                               double safety_margin, const std::string& tmpl,
                                               const TaskInputs& inputs) {
    const tokens::TokenBudget budget =
        tokens::make_budget(settings.context_limit_tokens, safety_margin);
    const long overhead = tokens::estimate_tokens(phase1_prompt(tmpl, inputs.task_description, ""),
                                                  settings.chars_per_token_ratio);
    return tokens::chunk_corpus(inputs.corpus, budget, settings.chars_per_token_ratio, overhead);
}

std::string run_phase1(CompletionClient& client, Role role, const std::string& tmpl,
                       const TaskInputs& inputs, const std::vector<tokens::CorpusChunk>& chunks,
                       int* call_count) {
    std::vector<std::string> responses;
    responses.reserve(chunks.size());
    for (const auto& chunk : chunks) {
        PhaseCall call{Phase::phase1, role,
                       make_request(client.settings(),
                                    phase1_prompt(tmpl, inputs.task_description, chunk.text))};
        responses.push_back(issue_call(client, call, call_count).text);
    }
    return merge_chunk_responses(responses);
}

std::string run_phase2(CompletionClient& client, Role role, const std::string& tmpl,
                       const TaskInputs& inputs, const std::string& own, const std::string& peer,
                       double safety_margin, int* call_count) {
    std::string prompt =
        phase2_prompt(tmpl, inputs.task_description, inputs.corpus.assembled_text, own, peer);
    check_prompt_budget(Phase::phase2, role, client.settings(), safety_margin, prompt);
    PhaseCall call{Phase::phase2, role, make_request(client.settings(), std::move(prompt))};
    return issue_call(client, call, call_count).text;
}

std::string run_phase3(CompletionClient& client, const std::string& tmpl,
                       const TaskInputs& inputs, const std::string& audit_a,
                       const std::string& audit_b, const std::string& consolidation_a,
                       const std::string& consolidation_b, double safety_margin,
                       int* call_count) {
    std::string prompt = phase3_prompt(tmpl, inputs.task_description, inputs.corpus.assembled_text,
                                       audit_a, audit_b, consolidation_a, consolidation_b);
    check_prompt_budget(Phase::phase3, Role::arbitrator, client.settings(), safety_margin, prompt);
    PhaseCall call{Phase::phase3, Role::arbitrator,
                   make_request(client.settings(), std::move(prompt))};
    return issue_call(client, call, call_count).text;
}

std::string manifest_to_json(const RunManifest& manifest) {
    json doc;
    doc["run_dir"] = manifest.run_dir.path.filename().string();
    doc["index"] = manifest.run_dir.index;
    doc["status"] = manifest.success ? "success" : "failed";
    if (!manifest.success) {
        doc["failed_phase"] = manifest.failed_phase;
        doc["failed_role"] = manifest.failed_role;
        doc["error"] = manifest.error;
    }
    doc["provider_roles"] = manifest.provider_roles;
    doc["copied_inputs"] = manifest.copied_inputs;
    json artifacts = json::array();
    for (const auto& artifact : manifest.artifacts) {
        artifacts.push_back(json{{"filename", artifact.filename},
                                 {"phase", to_string(artifact.phase)},
                                 {"role", to_string(artifact.role)}});
    }
    doc["artifacts"] = artifacts;
    doc["call_count"] = manifest.call_count;
    doc["started_at"] = manifest.started_at;
    doc["finished_at"] = manifest.finished_at;
    return doc.dump(2) + "\n";
}

RunManifest run_workflow(const config::Config& cfg, const fs::path& task_path,
                         const fs::path& codebase_root, const ClientSet& clients) {
    if (!fs::exists(task_path)) {
        throw InputError("bug description not found: " + task_path.string());
    }
    TaskInputs inputs;
    inputs.task_description = fsu::read_file(task_path);
    if (inputs.task_description.empty() || all_blank(inputs.task_description)) {
        throw InputError("bug description is empty: " + task_path.string());
    }
    inputs.corpus = corpus::scan_codebase(codebase_root, cfg.workflow.exclude_dirs);

    RunManifest manifest;
    manifest.run_dir = create_run_dir(cfg.workflow.results_root);
    manifest.started_at = iso_utc_now();
    manifest.provider_roles = {
        {"analyst_a", clients.for_role(Role::analyst_a).settings().id},
        {"analyst_b", clients.for_role(Role::analyst_b).settings().id},
        {"arbitrator", clients.for_role(Role::arbitrator).settings().id},
    };

    const fs::path run_dir = manifest.run_dir.path;
    auto copy_input = [&](const std::string& rel, const std::string& content) {
        fsu::write_file(run_dir / rel, content);
        manifest.copied_inputs.push_back(rel);
    };
    copy_input("inputs/bug.txt", inputs.task_description);
    copy_input("inputs/config.snapshot.yaml", config::render_config(cfg, /*redact_secrets=*/true));
    const std::string tmpl1 = fsu::read_file(cfg.workflow.prompt_phase1);
    const std::string tmpl2 = fsu::read_file(cfg.workflow.prompt_phase2);
    const std::string tmpl3 = fsu::read_file(cfg.workflow.prompt_phase3);
    copy_input("inputs/prompts/" + cfg.workflow.prompt_phase1.filename().string(), tmpl1);
    copy_input("inputs/prompts/" + cfg.workflow.prompt_phase2.filename().string(), tmpl2);
    copy_input("inputs/prompts/" + cfg.workflow.prompt_phase3.filename().string(), tmpl3);
    std::string listing;
    for (const auto& file : inputs.corpus.files) {
        listing += file.rel_path + "\t" + std::to_string(file.char_count) + "\n";
    }
    copy_input("inputs/codebase_listing.txt", listing);

    Phase current_phase = Phase::phase1;
    Role current_role = Role::analyst_a;
    auto persist = [&](Phase phase, Role role, const std::string& content) {
        const std::string filename = artifact_filename(phase, role);
        fsu::write_file(run_dir / filename, content);
        manifest.artifacts.push_back(PhaseArtifact{phase, role, filename, content});
    };

    const double margin = cfg.workflow.safety_margin;
    try {
        current_phase = Phase::phase1;
        current_role = Role::analyst_a;
        CompletionClient& client_a = clients.for_role(Role::analyst_a);
        const auto chunks_a = phase1_chunks(client_a.settings(), margin, tmpl1, inputs);
        const std::string audit_a =
            run_phase1(client_a, Role::analyst_a, tmpl1, inputs, chunks_a, &manifest.call_count);
        persist(Phase::phase1, Role::analyst_a, audit_a);

        current_role = Role::analyst_b;
        CompletionClient& client_b = clients.for_role(Role::analyst_b);
        const auto chunks_b = phase1_chunks(client_b.settings(), margin, tmpl1, inputs);
        const std::string audit_b =
            run_phase1(client_b, Role::analyst_b, tmpl1, inputs, chunks_b, &manifest.call_count);
        persist(Phase::phase1, Role::analyst_b, audit_b);

        current_phase = Phase::phase2;
        current_role = Role::analyst_a;
        const std::string consolidation_a = run_phase2(client_a, Role::analyst_a, tmpl2, inputs,
                                                       audit_a, audit_b, margin,
                                                       &manifest.call_count);
        persist(Phase::phase2, Role::analyst_a, consolidation_a);

        current_role = Role::analyst_b;
        const std::string consolidation_b = run_phase2(client_b, Role::analyst_b, tmpl2, inputs,
                                                       audit_b, audit_a, margin,
                                                       &manifest.call_count);
        persist(Phase::phase2, Role::analyst_b, consolidation_b);

        current_phase = Phase::phase3;
        current_role = Role::arbitrator;
        const std::string definitive =
            run_phase3(clients.for_role(Role::arbitrator), tmpl3, inputs, audit_a, audit_b,
                       consolidation_a, consolidation_b, margin, &manifest.call_count);
        persist(Phase::phase3, Role::arbitrator, definitive);

        manifest.success = true;
    } catch (const std::exception& e) {
        manifest.success = false;
        manifest.failed_phase = to_string(current_phase);
        manifest.failed_role = to_string(current_role);
        manifest.error = e.what();
        manifest.finished_at = iso_utc_now();
        fsu::write_file(run_dir / "manifest.json", manifest_to_json(manifest));
        throw;
    }

    manifest.finished_at = iso_utc_now();
    fsu::write_file(run_dir / "manifest.json", manifest_to_json(manifest));
    return manifest;
}

}  // namespace triad::workflow
