#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "triad/cli.hpp"
#include "triad/config.hpp"
#include "triad/corpus.hpp"
#include "triad/errors.hpp"
#include "triad/metrics.hpp"
#include "triad/providers.hpp"
#include "triad/tokens.hpp"
#include "triad/workflow.hpp"

namespace py = pybind11;
using namespace triad;

namespace {

config::EnvMap env_or_process(const std::optional<config::EnvMap>& env) {
    return env ? *env : config::process_env();
}

// Offline deterministic run: every role is answered from the fixture
// directory. Returns the manifest as a JSON string.
std::string run_replay(const std::filesystem::path& config_path,
                       const std::filesystem::path& bug_path,
                       const std::filesystem::path& codebase_dir,
                       const std::filesystem::path& fixture_dir,
                       const std::optional<config::EnvMap>& env) {
    config::Config cfg = config::load_config(config_path, env_or_process(env));
    for (auto& p : cfg.providers) {
        p.kind = config::ProviderKind::replay;
        p.fixture_dir = fixture_dir.string();
    }
    workflow::ReplayCompletionClient client_a(fixture_dir, cfg.provider(cfg.workflow.analyst_a));
    workflow::ReplayCompletionClient client_b(fixture_dir, cfg.provider(cfg.workflow.analyst_b));
    workflow::ReplayCompletionClient arbitrator(fixture_dir,
                                                cfg.provider(cfg.workflow.arbitrator));
    workflow::ClientSet clients{&client_a, &client_b, &arbitrator};
    const workflow::RunManifest manifest =
        workflow::run_workflow(cfg, bug_path, codebase_dir, clients);
    return workflow::manifest_to_json(manifest);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "deterministic multi-provider analysis workflow core";

    py::register_exception<Error>(m, "Error");

    // -- config ------------------------------------------------------------
    py::enum_<config::ProviderKind>(m, "ProviderKind")
        .value("openai_chat", config::ProviderKind::openai_chat)
        .value("anthropic_messages", config::ProviderKind::anthropic_messages)
        .value("replay", config::ProviderKind::replay);

    py::class_<config::ProviderSettings>(m, "ProviderSettings")
        .def(py::init<>())
        .def_readwrite("id", &config::ProviderSettings::id)
        .def_readwrite("kind", &config::ProviderSettings::kind)
        .def_readwrite("base_url", &config::ProviderSettings::base_url)
        .def_readwrite("api_key", &config::ProviderSettings::api_key)
        .def_readwrite("model", &config::ProviderSettings::model)
        .def_readwrite("temperature", &config::ProviderSettings::temperature)
        .def_readwrite("max_tokens", &config::ProviderSettings::max_tokens)
        .def_readwrite("context_limit_tokens", &config::ProviderSettings::context_limit_tokens)
        .def_readwrite("chars_per_token_ratio",
                       &config::ProviderSettings::chars_per_token_ratio)
        .def_readwrite("fixture_dir", &config::ProviderSettings::fixture_dir);

    py::class_<config::RetryPolicy>(m, "RetryPolicy")
        .def(py::init<>())
        .def_readwrite("max_attempts", &config::RetryPolicy::max_attempts)
        .def_property(
            "base_delay_ms",
            [](const config::RetryPolicy& p) { return p.base_delay.count(); },
            [](config::RetryPolicy& p, long long ms) {
                p.base_delay = std::chrono::milliseconds(ms);
            })
        .def_readwrite("multiplier", &config::RetryPolicy::multiplier);

    py::class_<config::WorkflowSettings>(m, "WorkflowSettings")
        .def_readonly("analyst_a", &config::WorkflowSettings::analyst_a)
        .def_readonly("analyst_b", &config::WorkflowSettings::analyst_b)
        .def_readonly("arbitrator", &config::WorkflowSettings::arbitrator)
        .def_readonly("retry", &config::WorkflowSettings::retry)
        .def_readonly("safety_margin", &config::WorkflowSettings::safety_margin)
        .def_readonly("results_root", &config::WorkflowSettings::results_root)
        .def_readonly("exclude_dirs", &config::WorkflowSettings::exclude_dirs);

    py::class_<config::Config>(m, "Config")
        .def_readonly("providers", &config::Config::providers)
        .def_readonly("workflow", &config::Config::workflow)
        .def("provider", &config::Config::provider, py::return_value_policy::copy);

    m.def("substitute_env", &config::substitute_env, py::arg("text"), py::arg("env"));
    m.def(
        "load_config",
        [](const std::filesystem::path& path, const std::optional<config::EnvMap>& env) {
            return config::load_config(path, env_or_process(env));
        },
        py::arg("path"), py::arg("env") = std::nullopt);
    m.def("render_config", &config::render_config, py::arg("config"),
          py::arg("redact_secrets") = true);

    // -- corpus ------------------------------------------------------------
    py::class_<corpus::SourceFile>(m, "SourceFile")
        .def_readonly("rel_path", &corpus::SourceFile::rel_path)
        .def_readonly("content", &corpus::SourceFile::content)
        .def_readonly("char_count", &corpus::SourceFile::char_count)
        .def_readonly("lossy_decoded", &corpus::SourceFile::lossy_decoded);

    py::class_<corpus::Corpus>(m, "Corpus")
        .def_readonly("root", &corpus::Corpus::root)
        .def_readonly("files", &corpus::Corpus::files)
        .def_readonly("assembled_text", &corpus::Corpus::assembled_text)
        .def_readonly("total_chars", &corpus::Corpus::total_chars);

    m.def("scan_codebase", &corpus::scan_codebase, py::arg("root"),
          py::arg("excluded_dirs") = corpus::default_excluded_dirs());
    m.def(
        "decode_bytes",
        [](const py::bytes& data) { return corpus::decode_bytes(std::string(data)); },
        py::arg("data"));
    m.def("count_chars", [](const std::string& s) { return corpus::count_chars(s); },
          py::arg("text"));
    m.def("header_line", &corpus::header_line, py::arg("rel_path"));
    m.def("supported_extensions", &corpus::supported_extensions);
    m.def("default_excluded_dirs", &corpus::default_excluded_dirs);

    // -- tokens ------------------------------------------------------------
    py::class_<tokens::TokenBudget>(m, "TokenBudget")
        .def_readonly("context_limit_tokens", &tokens::TokenBudget::context_limit_tokens)
        .def_readonly("safety_margin", &tokens::TokenBudget::safety_margin)
        .def_readonly("effective_tokens", &tokens::TokenBudget::effective_tokens);

    py::class_<tokens::CorpusChunk>(m, "CorpusChunk")
        .def_readonly("index", &tokens::CorpusChunk::index)
        .def_readonly("first_file", &tokens::CorpusChunk::first_file)
        .def_readonly("file_count", &tokens::CorpusChunk::file_count)
        .def_readonly("text", &tokens::CorpusChunk::text)
        .def_readonly("estimated_tokens", &tokens::CorpusChunk::estimated_tokens)
        .def_readonly("truncated", &tokens::CorpusChunk::truncated);

    m.def("make_budget", &tokens::make_budget, py::arg("context_limit_tokens"),
          py::arg("safety_margin"));
    m.def("estimate_tokens",
          [](const std::string& text, double ratio) { return tokens::estimate_tokens(text, ratio); },
          py::arg("text"), py::arg("ratio"));
    m.def("chunk_corpus", &tokens::chunk_corpus, py::arg("corpus"), py::arg("budget"),
          py::arg("ratio"), py::arg("reserved_tokens") = 0);
    m.def("elision_marker", &tokens::elision_marker, py::arg("rel_path"));

    // -- providers ---------------------------------------------------------
    m.def("normalize_openai_endpoint", &providers::normalize_openai_endpoint,
          py::arg("base_url"));

    // -- metrics -----------------------------------------------------------
    py::class_<metrics::ContributionBreakdown>(m, "ContributionBreakdown")
        .def(py::init([](double a, double b, double conv, double arb) {
                 return metrics::ContributionBreakdown{a, b, conv, arb};
             }),
             py::arg("ai_a_pct"), py::arg("ai_b_pct"), py::arg("convergent_pct"),
             py::arg("arbitration_pct"))
        .def_readonly("ai_a_pct", &metrics::ContributionBreakdown::ai_a_pct)
        .def_readonly("ai_b_pct", &metrics::ContributionBreakdown::ai_b_pct)
        .def_readonly("convergent_pct", &metrics::ContributionBreakdown::convergent_pct)
        .def_readonly("arbitration_pct", &metrics::ContributionBreakdown::arbitration_pct);

    py::class_<metrics::FixTally>(m, "FixTally")
        .def(py::init([](long accepted, long rejected) {
                 return metrics::FixTally{accepted, rejected};
             }),
             py::arg("accepted"), py::arg("rejected"))
        .def_readonly("accepted", &metrics::FixTally::accepted)
        .def_readonly("rejected", &metrics::FixTally::rejected)
        .def_property_readonly("total", &metrics::FixTally::total);

    py::class_<metrics::RunMetrics>(m, "RunMetrics")
        .def_readonly("run_id", &metrics::RunMetrics::run_id)
        .def_readonly("breakdown", &metrics::RunMetrics::breakdown)
        .def_readonly("tally", &metrics::RunMetrics::tally)
        .def_readonly("acceptance_rate_pct", &metrics::RunMetrics::acceptance_rate_pct)
        .def_readonly("total_ai_pct", &metrics::RunMetrics::total_ai_pct)
        .def_property_readonly("max_contributor",
                               [](const metrics::RunMetrics& r) {
                                   return metrics::to_string(r.max_contributor);
                               })
        .def_readonly("arbitration_flag", &metrics::RunMetrics::arbitration_flag)
        .def_readonly("convergence_flag", &metrics::RunMetrics::convergence_flag)
        .def_readonly("propositions_per_accepted",
                      &metrics::RunMetrics::propositions_per_accepted);

    py::class_<metrics::GroupStats>(m, "GroupStats")
        .def_readonly("n_runs", &metrics::GroupStats::n_runs)
        .def_readonly("accepted", &metrics::GroupStats::accepted)
        .def_readonly("rejected", &metrics::GroupStats::rejected)
        .def_readonly("acceptance_pct", &metrics::GroupStats::acceptance_pct)
        .def_readonly("propositions_per_accepted",
                      &metrics::GroupStats::propositions_per_accepted);

    py::class_<metrics::AggregateMetrics>(m, "AggregateMetrics")
        .def_readonly("n_runs", &metrics::AggregateMetrics::n_runs)
        .def_readonly("total_accepted", &metrics::AggregateMetrics::total_accepted)
        .def_readonly("total_rejected", &metrics::AggregateMetrics::total_rejected)
        .def_readonly("overall_acceptance_pct",
                      &metrics::AggregateMetrics::overall_acceptance_pct)
        .def_readonly("wald_ci_95", &metrics::AggregateMetrics::wald_ci_95)
        .def_readonly("mean_propositions", &metrics::AggregateMetrics::mean_propositions)
        .def_readonly("mean_acceptance_pct", &metrics::AggregateMetrics::mean_acceptance_pct)
        .def_readonly("mean_ai_a_pct", &metrics::AggregateMetrics::mean_ai_a_pct)
        .def_readonly("mean_ai_b_pct", &metrics::AggregateMetrics::mean_ai_b_pct)
        .def_readonly("mean_convergent_pct", &metrics::AggregateMetrics::mean_convergent_pct)
        .def_readonly("mean_arbitration_pct", &metrics::AggregateMetrics::mean_arbitration_pct)
        .def_readonly("mean_total_ai_pct", &metrics::AggregateMetrics::mean_total_ai_pct)
        .def_readonly("groups", &metrics::AggregateMetrics::groups);

    py::enum_<metrics::CiMethod>(m, "CiMethod")
        .value("wald", metrics::CiMethod::wald)
        .value("wilson", metrics::CiMethod::wilson);

    m.def("parse_contributions", &metrics::parse_contributions, py::arg("doc"));
    m.def("render_contribution_headers", &metrics::render_contribution_headers,
          py::arg("breakdown"));
    m.def("count_fixes", &metrics::count_fixes, py::arg("doc"));
    m.def("acceptance_rate", &metrics::acceptance_rate, py::arg("tally"));
    m.def("compute_flags", &metrics::compute_flags, py::arg("breakdown"));
    m.def("max_contributor",
          [](const metrics::ContributionBreakdown& b) {
              return metrics::to_string(metrics::max_contributor(b));
          },
          py::arg("breakdown"));
    m.def("efficiency", &metrics::efficiency, py::arg("tally"));
    m.def("analyze_document", &metrics::analyze_document, py::arg("doc"), py::arg("run_id"));
    m.def("acceptance_ci_95", &metrics::acceptance_ci_95, py::arg("accepted"), py::arg("total"),
          py::arg("method") = metrics::CiMethod::wald);
    m.def("aggregate", &metrics::aggregate, py::arg("runs"),
          py::arg("labels") = std::map<std::string, std::string>{},
          py::arg("ci_method") = metrics::CiMethod::wald);
    m.def("metrics_to_json", &metrics::to_json, py::arg("runs"), py::arg("aggregate"));
    m.def("metrics_to_table", &metrics::to_table, py::arg("runs"), py::arg("aggregate"));
    m.def("metrics_to_csv", &metrics::to_csv, py::arg("runs"),
          py::arg("labels") = std::map<std::string, std::string>{});

    // -- workflow ----------------------------------------------------------
    m.def("create_run_dir",
          [](const std::filesystem::path& results_root) {
              const auto dir = workflow::create_run_dir(results_root);
              return py::make_tuple(dir.index, dir.path);
          },
          py::arg("results_root"));
    m.def("run_replay", &run_replay, py::arg("config_path"), py::arg("bug_path"),
          py::arg("codebase_dir"), py::arg("fixture_dir"), py::arg("env") = std::nullopt,
          "Run the full three-phase workflow offline against replay fixtures; "
          "returns the manifest as a JSON string.");

    // -- cli ---------------------------------------------------------------
    m.def(
        "cli_main",
        [](const std::vector<std::string>& args) {
            cli::Deps deps = cli::default_deps();
            return cli::dispatch(args, deps);
        },
        py::arg("args"), "Invoke the command-line interface; returns its exit code.");
}
