"""Python smoke tests for the compiled core."""

import json
import pathlib

import pytest

import triad


@pytest.fixture()
def replay_project(tmp_path):
    (tmp_path / "prompts").mkdir()
    (tmp_path / "prompts/p1.txt").write_text("phase one prompt\n")
    (tmp_path / "prompts/p2.txt").write_text("phase two prompt\n")
    (tmp_path / "prompts/p3.txt").write_text("phase three prompt\n")
    (tmp_path / "bug.txt").write_text("the report is wrong\n")
    codebase = tmp_path / "codebase"
    codebase.mkdir()
    (codebase / "a.py").write_text("x = 1\n")
    fixtures = tmp_path / "fixtures"
    fixtures.mkdir()
    (fixtures / "phase1_analyst_a.md").write_text("audit A\n")
    (fixtures / "phase1_analyst_b.md").write_text("audit B\n")
    (fixtures / "phase2_analyst_a.md").write_text("consolidation A\n")
    (fixtures / "phase2_analyst_b.md").write_text("consolidation B\n")
    (fixtures / "phase3_arbitrator.md").write_text("definitive fixes\n")
    (tmp_path / "config.yaml").write_text(
        "apis:\n"
        "  r:\n"
        "    kind: replay\n"
        "    temperature: 0.1\n"
        "    max_tokens: 1000\n"
        "    context_limit_tokens: 16000\n"
        "    fixture_dir: fixtures\n"
        "workflow:\n"
        "  analyst_a: r\n"
        "  analyst_b: r\n"
        "  arbitrator: r\n"
        "  prompts:\n"
        "    phase1: prompts/p1.txt\n"
        "    phase2: prompts/p2.txt\n"
        "    phase3: prompts/p3.txt\n"
        "  results_root: results\n"
    )
    return tmp_path


def test_token_estimates_and_budgets():
    assert triad.estimate_tokens("x" * 4000, 0.25) == 1000
    assert triad.estimate_tokens("", 0.25) == 0
    assert triad.estimate_tokens("abc", 0.25) == 1
    assert triad.make_budget(16000, 0.75).effective_tokens == 12000
    assert triad.make_budget(200000, 0.75).effective_tokens == 150000


def test_endpoint_normalization():
    for base in ("https://api.openai.com", "https://api.openai.com/v1",
                 "https://api.openai.com/v1/"):
        url = triad.normalize_openai_endpoint(base)
        assert url == "https://api.openai.com/v1/chat/completions"
        assert triad.normalize_openai_endpoint(url) == url


def test_substitute_env():
    assert triad.substitute_env("key: ${K}", {"K": "abc"}) == "key: abc"
    with pytest.raises(triad.Error, match="MISSING"):
        triad.substitute_env("${MISSING}", {})


def test_decode_bytes_is_lossy_only_for_invalid_utf8():
    text, lossy = triad.decode_bytes(b"a\xffb")
    assert text == "a\ufffdb"
    assert lossy
    text, lossy = triad.decode_bytes("héllo".encode())
    assert text == "héllo"
    assert not lossy


def test_scan_and_chunk(tmp_path):
    (tmp_path / "src").mkdir()
    (tmp_path / "src/a.py").write_text("x = 1\n")
    (tmp_path / "build").mkdir()
    (tmp_path / "build/skip.py").write_text("nope\n")

    corpus = triad.scan_codebase(tmp_path)
    assert [f.rel_path for f in corpus.files] == ["src/a.py"]
    assert corpus.assembled_text.startswith("# ===== src/a.py =====\n")

    chunks = triad.chunk_corpus(corpus, triad.make_budget(16000, 0.75), 0.25)
    assert len(chunks) == 1
    assert not chunks[0].truncated
    assert "".join(c.text for c in chunks) == corpus.assembled_text


def test_metrics_pipeline():
    doc = (
        "AI^A CONTRIBUTION: 15.0%\n"
        "AI^B CONTRIBUTION: 25.0%\n"
        "CONVERGENT (BOTH AGREED): 10.0%\n"
        "FINAL ARBITRATION: 50.0%\n\n"
        "## DEFINITIVE FIX LIST\n\n"
        "Fix #1: a\nFix #2: b\n\n"
        "## REJECTED FIXES\n\n- x\n- y\n"
    )
    run = triad.analyze_document(doc, "run1")
    assert run.tally.accepted == 2
    assert run.tally.rejected == 2
    assert run.acceptance_rate_pct == 50.0
    assert run.arbitration_flag
    assert not run.convergence_flag
    assert run.max_contributor == "Arbitration"

    agg = triad.aggregate([run])
    assert agg.total_accepted == 2
    json_doc = json.loads(triad.metrics_to_json([run], agg))
    assert json_doc["aggregate"]["overall_acceptance_pct"] == 50.0

    assert triad.acceptance_rate(triad.FixTally(22, 47)) == 31.9
    assert triad.acceptance_ci_95(22, 69) == (20.9, 42.9)


def test_cli_entry_point():
    assert triad.cli_main(["--help"]) == 0


def test_config_roundtrip(replay_project):
    cfg = triad.load_config(replay_project / "config.yaml", {})
    assert cfg.workflow.analyst_a == "r"
    assert cfg.provider("r").kind == triad.ProviderKind.replay
    snapshot = triad.render_config(cfg, True)
    assert "apis" in snapshot


def test_replay_run_is_deterministic(replay_project):
    manifest1 = triad.run_replay(
        replay_project / "config.yaml",
        replay_project / "bug.txt",
        replay_project / "codebase",
        replay_project / "fixtures",
        {},
    )
    manifest2 = triad.run_replay(
        replay_project / "config.yaml",
        replay_project / "bug.txt",
        replay_project / "codebase",
        replay_project / "fixtures",
        {},
    )
    assert manifest1["status"] == "success"
    assert [a["filename"] for a in manifest1["artifacts"]] == [
        "audit_report_A.md",
        "audit_report_B.md",
        "consolidation_A.md",
        "consolidation_B.md",
        "definitive_fixes.md",
    ]
    run1 = replay_project / "results" / manifest1["run_dir"]
    run2 = replay_project / "results" / manifest2["run_dir"]
    assert manifest1["run_dir"] == "bug0001_results"
    assert manifest2["run_dir"] == "bug0002_results"
    for name in ("audit_report_A.md", "definitive_fixes.md", "inputs/bug.txt"):
        assert (run1 / name).read_bytes() == (run2 / name).read_bytes()
    assert (run1 / "audit_report_A.md").read_text() == "audit A\n"
