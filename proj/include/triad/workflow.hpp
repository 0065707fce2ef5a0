#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "triad/config.hpp"
#include "triad/corpus.hpp"
#include "triad/providers.hpp"
#include "triad/tokens.hpp"

namespace triad::workflow {

enum class Phase { phase1, phase2, phase3 };
enum class Role { analyst_a, analyst_b, arbitrator };

std::string to_string(Phase phase);
std::string to_string(Role role);

// Every provider interaction the orchestrator issues, with its context.
struct PhaseCall {
    Phase phase;
    Role role;
    providers::ChatRequest request;
};

class CompletionClient {
public:
    virtual ~CompletionClient() = default;
    virtual providers::ChatResponse complete(const PhaseCall& call) = 0;
    virtual const config::ProviderSettings& settings() const = 0;
};

// HTTP-backed client; settings/retry are copied, transport and sleeper are
// borrowed and must outlive the client.
class HttpCompletionClient : public CompletionClient {
public:
    HttpCompletionClient(config::ProviderSettings settings, config::RetryPolicy retry,
                         providers::HttpTransport& transport, providers::Sleeper& sleeper)
        : settings_(std::move(settings)), retry_(retry), transport_(transport),
          sleeper_(sleeper) {}

    providers::ChatResponse complete(const PhaseCall& call) override;
    const config::ProviderSettings& settings() const override { return settings_; }

private:
    config::ProviderSettings settings_;
    config::RetryPolicy retry_;
    providers::HttpTransport& transport_;
    providers::Sleeper& sleeper_;
};

// Fixture-backed client for deterministic offline runs.
class ReplayCompletionClient : public CompletionClient {
public:
    ReplayCompletionClient(std::filesystem::path fixture_dir, config::ProviderSettings settings)
        : fixture_dir_(std::move(fixture_dir)), settings_(std::move(settings)) {}

    providers::ChatResponse complete(const PhaseCall& call) override;
    const config::ProviderSettings& settings() const override { return settings_; }

private:
    std::filesystem::path fixture_dir_;
    config::ProviderSettings settings_;
};

struct ClientSet {
    CompletionClient* analyst_a = nullptr;
    CompletionClient* analyst_b = nullptr;
    CompletionClient* arbitrator = nullptr;

    CompletionClient& for_role(Role role) const;
};

struct RunDirectory {
    int index = 0;
    std::filesystem::path path;  // <results_root>/bug%04d_results
};

// Next free zero-padded run directory under results_root (created empty).
RunDirectory create_run_dir(const std::filesystem::path& results_root);

struct TaskInputs {
    std::string task_description;
    corpus::Corpus corpus;
};

struct PhaseArtifact {
    Phase phase;
    Role role;
    std::string filename;
    std::string content;
};

// Fixed (phase, role) -> filename bijection for the five artifacts.
std::string artifact_filename(Phase phase, Role role);

struct RunManifest {
    RunDirectory run_dir;
    bool success = false;
    std::string failed_phase;
    std::string failed_role;
    std::string error;
    std::vector<std::string> copied_inputs;
    std::vector<PhaseArtifact> artifacts;
    std::map<std::string, std::string> provider_roles;
    std::string started_at;
    std::string finished_at;
    int call_count = 0;
};

std::string manifest_to_json(const RunManifest& manifest);

// Prompt assembly. Section labels are a fixed contract: the task always
// precedes corpus text, and own/peer reports are explicitly labeled.
std::string phase1_prompt(const std::string& tmpl, const std::string& task,
                          const std::string& chunk_text);
std::string phase2_prompt(const std::string& tmpl, const std::string& task,
                          const std::string& corpus_text, const std::string& own,
                          const std::string& peer);
std::string phase3_prompt(const std::string& tmpl, const std::string& task,
                          const std::string& corpus_text, const std::string& audit_a,
                          const std::string& audit_b, const std::string& consolidation_a,
                          const std::string& consolidation_b);

// Joins per-chunk responses with "# ----- chunk <k>/<n> response -----"
// separators; a single response is returned verbatim.
std::string merge_chunk_responses(const std::vector<std::string>& responses);

// Phase-1 chunks for one provider: the template/task scaffolding estimate is
// reserved out of the effective budget before packing.
std::vector<tokens::CorpusChunk> phase1_chunks(const config::ProviderSettings& settings,
                                               double safety_margin, const std::string& tmpl,
                                               const TaskInputs& inputs);

std::string run_phase1(CompletionClient& client, Role role, const std::string& tmpl,
                       const TaskInputs& inputs, const std::vector<tokens::CorpusChunk>& chunks,
                       int* call_count = nullptr);
std::string run_phase2(CompletionClient& client, Role role, const std::string& tmpl,
                       const TaskInputs& inputs, const std::string& own, const std::string& peer,
                       double safety_margin, int* call_count = nullptr);
std::string run_phase3(CompletionClient& client, const std::string& tmpl,
                       const TaskInputs& inputs, const std::string& audit_a,
                       const std::string& audit_b, const std::string& consolidation_a,
                       const std::string& consolidation_b, double safety_margin,
                       int* call_count = nullptr);

// Executes the full three-phase protocol: scan, create run dir, copy inputs,
// phase 1 (analyst_a then analyst_b), phase 2 (same order), phase 3, then
// the manifest. Artifacts persist as soon as their calls complete; on
// failure a failure manifest is written and the error rethrown.
RunManifest run_workflow(const config::Config& cfg, const std::filesystem::path& task_path,
                         const std::filesystem::path& codebase_root, const ClientSet& clients);

}  // namespace triad::workflow
