"""Deterministic multi-provider analysis workflow.

Thin wrapper over the compiled core: configuration loading, corpus
ingestion, token chunking, the replay workflow, and the metrics engine.
"""

import json as _json

from triad._core import (  # noqa: F401
    AggregateMetrics,
    CiMethod,
    Config,
    ContributionBreakdown,
    Corpus,
    CorpusChunk,
    Error,
    FixTally,
    GroupStats,
    ProviderKind,
    ProviderSettings,
    RetryPolicy,
    RunMetrics,
    SourceFile,
    TokenBudget,
    WorkflowSettings,
    acceptance_ci_95,
    acceptance_rate,
    aggregate,
    analyze_document,
    chunk_corpus,
    cli_main,
    compute_flags,
    count_chars,
    count_fixes,
    create_run_dir,
    decode_bytes,
    default_excluded_dirs,
    efficiency,
    elision_marker,
    estimate_tokens,
    header_line,
    load_config,
    make_budget,
    max_contributor,
    metrics_to_csv,
    metrics_to_json,
    metrics_to_table,
    normalize_openai_endpoint,
    parse_contributions,
    render_config,
    render_contribution_headers,
    scan_codebase,
    substitute_env,
    supported_extensions,
)
from triad._core import run_replay as _run_replay

__version__ = "0.1.0"


def run_replay(config_path, bug_path, codebase_dir, fixture_dir, env=None):
    """Run the three-phase workflow offline against replay fixtures.

    Returns the run manifest as a dict.
    """
    return _json.loads(_run_replay(config_path, bug_path, codebase_dir, fixture_dir, env))
