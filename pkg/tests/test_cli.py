"""End-to-end checks of the command-line harness.

Commands run in-process through cli.main() so exit codes and written files
can be asserted directly; one subprocess smoke test covers `python -m`.
"""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from tagsiege.cli import main

SYNTH_FLAGS = ["--node-count", "120", "--class-count", "4", "--seed", "0"]


def read_manifest(out_dir: Path) -> dict:
    return json.loads((out_dir / "manifest.json").read_text())


def file_bytes(root: Path, names) -> dict[str, bytes]:
    return {n: (root / n).read_bytes() for n in names}


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("dataset")
    assert main(["synth", "--out", str(out), *SYNTH_FLAGS]) == 0
    return out


@pytest.fixture(scope="module")
def attack_run(tmp_path_factory, data_dir) -> Path:
    out = tmp_path_factory.mktemp("attack")
    code = main(
        [
            "attack",
            "--data", str(data_dir),
            "--out", str(out),
            "--num-targets", "8",
            "--seed", "1",
        ]
    )
    assert code == 0
    return out


def test_synth_writes_dataset_and_manifest(data_dir):
    assert (data_dir / "nodes.jsonl").exists()
    assert (data_dir / "edges.csv").exists()
    manifest = read_manifest(data_dir)
    assert manifest["command"] == "synth"
    assert manifest["summary"]["node_count"] == 120
    assert set(manifest["outputs"]) == {"nodes.jsonl", "edges.csv"}


def test_synth_same_seed_same_bytes(tmp_path, data_dir):
    out = tmp_path / "again"
    assert main(["synth", "--out", str(out), *SYNTH_FLAGS]) == 0
    for name in ("nodes.jsonl", "edges.csv"):
        assert (out / name).read_bytes() == (data_dir / name).read_bytes()


def test_unknown_flag_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--out", "x", "--no-such-flag"])
    assert exc.value.code == 2


def test_infeasible_synth_config_exits_two(tmp_path):
    code = main(
        ["synth", "--out", str(tmp_path / "bad"), "--p-in", "0.001", "--p-out", "0.5"]
    )
    assert code == 2


def test_unknown_config_file_key_exits_two(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus_option=1\n")
    code = main(["synth", "--out", str(tmp_path / "o"), "--config", str(cfg)])
    assert code == 2


def test_config_file_precedence(tmp_path, data_dir):
    cfg = tmp_path / "attack.cfg"
    cfg.write_text("# comment line\nseed=7\nnum_targets=3\n")
    out = tmp_path / "run"
    code = main(
        [
            "attack",
            "--data", str(data_dir),
            "--out", str(out),
            "--config", str(cfg),
            "--seed", "1",
        ]
    )
    assert code == 0
    manifest = read_manifest(out)
    # CLI flag beats the file; the file beats the default
    assert manifest["config"]["seed"] == 1
    assert manifest["config"]["num_targets"] == 3


def test_missing_required_option_exits_two(tmp_path):
    assert main(["attack", "--out", str(tmp_path / "o"), "--num-targets", "2"]) == 2


def test_attack_artifacts_and_query_accounting(attack_run):
    manifest = read_manifest(attack_run)
    assert manifest["completed"] == 8
    assert manifest["query_count"] == 16
    assert manifest["skipped"] == {}
    assert manifest["backend_kind"] == "oracle"
    assert "cost_estimate_usd" not in manifest
    assert (attack_run / "plan.jsonl").exists()
    assert (attack_run / "perturbed" / "nodes.jsonl").exists()
    assert (attack_run / "perturbed" / "edges.csv").exists()


def test_attack_conflicting_target_flags_exit_two(tmp_path, data_dir):
    code = main(
        [
            "attack",
            "--data", str(data_dir),
            "--out", str(tmp_path / "o"),
            "--targets", "1,2",
            "--num-targets", "2",
        ]
    )
    assert code == 2


def test_attack_explicit_targets(tmp_path, data_dir):
    out = tmp_path / "explicit"
    code = main(
        ["attack", "--data", str(data_dir), "--out", str(out), "--targets", "5,3,5"]
    )
    assert code == 0
    manifest = read_manifest(out)
    assert manifest["targets"] == [3, 5]
    assert manifest["query_count"] == 4


def test_attack_replay_is_byte_identical(tmp_path, attack_run):
    out = tmp_path / "replayed"
    code = main(["replay", str(attack_run / "manifest.json"), "--out", str(out)])
    assert code == 0
    names = ["plan.jsonl", "perturbed/nodes.jsonl", "perturbed/edges.csv"]
    assert file_bytes(out, names) == file_bytes(attack_run, names)


def test_replay_detects_changed_input(tmp_path, data_dir, attack_run):
    manifest = json.loads((attack_run / "manifest.json").read_text())
    tampered = dict(manifest)
    tampered["inputs"] = {
        path: digest[::-1] for path, digest in manifest["inputs"].items()
    }
    bad = tmp_path / "tampered.json"
    bad.write_text(json.dumps(tampered))
    assert main(["replay", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_evaluate_report_and_summary(tmp_path, data_dir, attack_run):
    out = tmp_path / "eval"
    code = main(
        [
            "evaluate",
            "--clean", str(data_dir),
            "--perturbed", str(attack_run / "perturbed"),
            "--plan", str(attack_run / "plan.jsonl"),
            "--out", str(out),
            "--seed", "1",
        ]
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["attacker"] == "tagsiege"
    assert len(report["targets"]) == 8
    assert report["query_count"] == 16
    assert set(report["victims"]) == {"gcn", "sgc", "sage_mean"}
    for kind in report["victims"]:
        row = report["victims"][kind]["attackers"]["tagsiege"]
        assert 0.0 <= row["perturbed_accuracy"] <= row["clean_accuracy"] <= 1.0
        assert kind in report["synergy"]
    assert "delta_H_edge" in report["audit"]
    lines = (out / "summary.csv").read_text().splitlines()
    assert lines[0] == "victim,attacker,clean_accuracy,perturbed_accuracy,drop"
    assert len(lines) == 1 + 3  # one row per (victim, attacker)


def test_evaluate_identical_inputs_zero_drops(tmp_path, data_dir, attack_run):
    out = tmp_path / "selfeval"
    code = main(
        [
            "evaluate",
            "--clean", str(data_dir),
            "--perturbed", str(data_dir),
            "--plan", str(attack_run / "plan.jsonl"),
            "--out", str(out),
        ]
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    for kind in report["victims"]:
        assert report["victims"][kind]["attackers"]["tagsiege"]["drop"] == 0.0
    assert report["audit"]["delta_H_edge"] == 0.0
    assert report["audit"]["edge_edits"] == 0.0


def test_evaluate_baseline_rows(tmp_path, data_dir, attack_run):
    out = tmp_path / "eval_base"
    code = main(
        [
            "evaluate",
            "--clean", str(data_dir),
            "--perturbed", str(attack_run / "perturbed"),
            "--plan", str(attack_run / "plan.jsonl"),
            "--out", str(out),
            "--baseline", f"ours_again={attack_run / 'plan.jsonl'}",
        ]
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["extra"]["baselines"] == ["ours_again"]
    lines = (out / "summary.csv").read_text().splitlines()
    assert len(lines) == 1 + 3 * 2
    for kind in report["victims"]:
        rows = report["victims"][kind]["attackers"]
        # re-applying the same plan must reproduce the main attacker's row
        assert rows["ours_again"] == rows["tagsiege"]


def test_evaluate_replay_reproduces_report(tmp_path, data_dir, attack_run):
    first = tmp_path / "eval1"
    code = main(
        [
            "evaluate",
            "--clean", str(data_dir),
            "--perturbed", str(attack_run / "perturbed"),
            "--plan", str(attack_run / "plan.jsonl"),
            "--out", str(first),
            "--seed", "3",
        ]
    )
    assert code == 0
    second = tmp_path / "eval2"
    assert main(["replay", str(first / "manifest.json"), "--out", str(second)]) == 0
    names = ["report.json", "summary.csv"]
    assert file_bytes(second, names) == file_bytes(first, names)


def test_audit_outputs(tmp_path, data_dir, attack_run):
    out = tmp_path / "audit"
    code = main(
        [
            "audit",
            "--clean", str(data_dir),
            "--perturbed", str(attack_run / "perturbed"),
            "--out", str(out),
        ]
    )
    assert code == 0
    audit = json.loads((out / "audit.json").read_text())
    assert audit["perturb_ratio"] == audit["edge_ratio"]
    assert audit["single_flip_bound"] == pytest.approx(2 / audit["edge_count_clean"])
    # distinct plan edits (two targets may pick the same edge, counted once)
    deletes, inserts = set(), set()
    for line in (attack_run / "plan.jsonl").read_text().splitlines():
        entry = json.loads(line)
        if "skipped" in entry or entry.get("target") is None:
            continue
        if entry["delete_neighbor"] is not None:
            deletes.add(frozenset((entry["target"], entry["delete_neighbor"])))
        inserts.add(frozenset((entry["target"], entry["add_influencer"])))
    assert audit["edge_edits"] == float(len(deletes) + len(inserts - deletes))


def test_audit_node_count_mismatch_exits_two(tmp_path, data_dir):
    other = tmp_path / "other"
    assert main(["synth", "--out", str(other), "--node-count", "60"]) == 0
    assert (
        main(
            [
                "audit",
                "--clean", str(data_dir),
                "--perturbed", str(other),
                "--out", str(tmp_path / "o"),
            ]
        )
        == 2
    )


def test_encode_and_retrieve(tmp_path, data_dir):
    enc = tmp_path / "enc"
    assert main(["encode", "--data", str(data_dir), "--out", str(enc)]) == 0
    assert (enc / "encoder.json").exists()
    manifest = read_manifest(enc)
    assert manifest["vocab_size"] > 0

    ret = tmp_path / "ret"
    code = main(
        [
            "retrieve",
            "--data", str(data_dir),
            "--embeddings", str(enc / "embeddings.jsonl"),
            "--out", str(ret),
            "--targets", "0,1,2",
            "--k", "4",
        ]
    )
    assert code == 0
    rows = [
        json.loads(line)
        for line in (ret / "influencers.jsonl").read_text().splitlines()
    ]
    assert [r["target"] for r in rows] == [0, 1, 2]
    assert all(len(r["candidates"]) == 4 for r in rows)


def test_llm_backend_without_key_exits_two(tmp_path, data_dir, monkeypatch):
    monkeypatch.delenv("TAGSIEGE_API_KEY", raising=False)
    code = main(
        [
            "attack",
            "--data", str(data_dir),
            "--out", str(tmp_path / "o"),
            "--num-targets", "2",
            "--backend", "llm",
        ]
    )
    assert code == 2


def test_llm_unreachable_endpoint_exits_three(tmp_path, data_dir, monkeypatch):
    monkeypatch.setenv("TAGSIEGE_API_KEY", "dummy")
    out = tmp_path / "dead"
    code = main(
        [
            "attack",
            "--data", str(data_dir),
            "--out", str(out),
            "--num-targets", "2",
            "--backend", "llm",
            "--base-url", "http://127.0.0.1:9",
            "--timeout", "1",
            "--max-attempts", "1",
        ]
    )
    assert code == 3
    manifest = read_manifest(out)
    assert manifest["completed"] == 0
    assert manifest["query_count"] == 0
    assert len(manifest["skipped"]) == 2
    assert manifest["cost_estimate_usd"] == 0.0
    assert (out / "plan.jsonl").exists()
    assert not (out / "perturbed").exists()  # withheld without --allow-partial

    partial = tmp_path / "dead_partial"
    code = main(
        [
            "attack",
            "--data", str(data_dir),
            "--out", str(partial),
            "--num-targets", "2",
            "--backend", "llm",
            "--base-url", "http://127.0.0.1:9",
            "--timeout", "1",
            "--max-attempts", "1",
            "--allow-partial",
        ]
    )
    assert code == 3
    assert (partial / "perturbed" / "nodes.jsonl").exists()


def test_module_entry_point_smoke():
    proc = subprocess.run(
        [sys.executable, "-m", "tagsiege", "--version"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "tagsiege" in proc.stdout
