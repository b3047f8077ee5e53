"""Command-line harness for reproducible attack experiments.

Commands: synth, encode, retrieve, attack, evaluate, audit, replay. Every
command writes its outputs plus a ``manifest.json`` that records the resolved
configuration, input/output file hashes, and seeds — enough to replay the run
bit-identically with ``tagsiege replay``.

Option precedence: CLI flags > ``--config`` file (flat ``key=value`` lines,
``#`` comments) > built-in defaults. Exit codes: 0 ok, 2 config/validation,
3 backend, 4 training.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__
from .attack import attack
from .backends import LLMBackend, LLMConfig, OracleBackend
from .encoder import EncoderConfig, encode, save_checkpoint, train_encoder
from .errors import (
    BackendError,
    BackendExhaustedError,
    ConfigurationError,
    ParseError,
    PlanInconsistencyError,
    TagSiegeError,
    TrainingError,
)
from .graph import load_graph, save_graph
from .metrics import AttackReport, aggregate, bound_audit, synergy_test
from .plan import Budgets, apply_plan, load_plan, save_plan
from .prompts import load_template
from .retrieval import DEFAULT_K, retrieve_all, save_influencers
from .seeding import substream
from .synth import SynthConfig, generate, summarize
from .text_features import (
    build_vocabulary,
    featurize,
    save_embeddings,
    load_embeddings,
    token_edit_distance,
)
from .victims import VICTIM_KINDS, VictimConfig, accuracy, train_victim

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_TRAINING = 4

COST_PER_NODE_USD = 0.0009

_REQUIRED = object()

# ---------------------------------------------------------------------------
# option plumbing


def _read_config_file(path: str) -> dict[str, str]:
    """Parse a flat key=value file; blank lines and # comments are skipped."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError("expected key=value", path=str(path), line=lineno)
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _coerce(name: str, kind: str, raw: str):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "list":
            return [item for item in raw.split(";") if item]
        return raw
    except ValueError:
        raise ConfigurationError(
            f"config option {name}: cannot parse {raw!r} as {kind}"
        ) from None


def _add_flags(parser: argparse.ArgumentParser, spec) -> None:
    for name, kind, default, help_text in spec:
        flag = "--" + name.replace("_", "-")
        if default not in (None, _REQUIRED) and default != []:
            help_text = f"{help_text} (default: {default})"
        if kind == "bool":
            parser.add_argument(
                flag, action="store_true", default=argparse.SUPPRESS, help=help_text
            )
        elif kind == "list":
            parser.add_argument(
                flag, action="append", default=argparse.SUPPRESS, help=help_text
            )
        else:
            typ = {"int": int, "float": float, "str": str}[kind]
            parser.add_argument(
                flag, type=typ, default=argparse.SUPPRESS, help=help_text
            )


def _resolve_options(spec, args: argparse.Namespace) -> dict:
    """Merge CLI flags over the config file over defaults into one dict."""
    file_cfg = _read_config_file(args.config) if getattr(args, "config", None) else {}
    known = {name for name, _, _, _ in spec}
    unknown = sorted(set(file_cfg) - known)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    given = vars(args)
    resolved = {}
    for name, kind, default, _ in spec:
        if name in given:
            resolved[name] = given[name]
        elif name in file_cfg:
            resolved[name] = _coerce(name, kind, file_cfg[name])
        elif default is _REQUIRED:
            raise ConfigurationError(
                f"missing required option --{name.replace('_', '-')}"
            )
        else:
            resolved[name] = default
    return resolved


# ---------------------------------------------------------------------------
# manifests


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _dataset_inputs(data_dir: str | Path) -> dict[str, str]:
    root = Path(data_dir)
    names = ("nodes.jsonl", "edges.csv", "edges.jsonl")
    return {
        str(root / n): _sha256_file(root / n) for n in names if (root / n).exists()
    }


def _file_inputs(*paths: str) -> dict[str, str]:
    return {p: _sha256_file(Path(p)) for p in paths}


def _write_manifest(
    out: Path, command: str, config: dict, inputs: dict, extra: dict
) -> None:
    outputs = {
        str(f.relative_to(out)): _sha256_file(f)
        for f in sorted(out.rglob("*"))
        if f.is_file() and f.name != "manifest.json"
    }
    manifest = {
        "tool": "tagsiege",
        "version": __version__,
        "command": command,
        "config": config,
        "config_sha256": _config_hash(config),
        "inputs": inputs,
        "outputs": outputs,
        **extra,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")


# ---------------------------------------------------------------------------
# shared pieces


def _parse_target_list(raw: str) -> list[int]:
    try:
        ids = sorted({int(tok) for tok in raw.split(",") if tok.strip()})
    except ValueError:
        raise ConfigurationError(
            f"targets must be comma-separated integers, got {raw!r}"
        ) from None
    if not ids:
        raise ConfigurationError("targets list is empty")
    return ids


def _resolve_targets(cfg: dict, graph) -> list[int] | None:
    """Explicit --targets list, or --num-targets sampled from --target-split."""
    raw, num = cfg.get("targets"), cfg.get("num_targets")
    if raw is not None and num is not None:
        raise ConfigurationError("pass either --targets or --num-targets, not both")
    if raw is not None:
        ids = _parse_target_list(raw)
        bad = [i for i in ids if not 0 <= i < graph.node_count]
        if bad:
            raise ConfigurationError(f"targets out of range: {bad}")
        return ids
    if num is not None:
        split = cfg.get("target_split", "test")
        pool = sorted(graph.split_nodes(split))
        if not 1 <= num <= len(pool):
            raise ConfigurationError(
                f"num_targets must be in [1, {len(pool)}] for split {split!r}"
            )
        rng = substream(int(cfg["seed"]), "targets")
        return sorted(rng.choice(pool, size=num, replace=False).tolist())
    return None


def _train_embeddings(graph, features, cfg: dict):
    config = EncoderConfig(
        hidden=cfg["hidden"],
        learning_rate=cfg["learning_rate"],
        epochs=cfg["epochs"],
        weight_decay=cfg["weight_decay"],
        seed=cfg["seed"],
    )
    trained = train_encoder(graph, features, config)
    return trained, encode(trained, graph, features)


def _plan_budgets(plan, clean) -> Budgets:
    """Budgets wide enough to re-apply a stored plan to its clean graph."""
    entries = plan.entries.values()
    text_edits = [
        token_edit_distance(clean.texts[e.target], e.new_text)
        for e in entries
        if e.new_text is not None
    ]
    return Budgets(
        per_node_edge_budget=2,
        global_edge_budget=sum(e.edge_edit_count for e in entries),
        text_token_budget=max(text_edits, default=0),
        global_text_budget=sum(text_edits),
    )


# ---------------------------------------------------------------------------
# command runners; each returns (inputs, manifest extra, exit code)


def _run_synth(cfg: dict, out: Path):
    config = SynthConfig(
        node_count=cfg["node_count"],
        class_count=cfg["class_count"],
        p_in=cfg["p_in"],
        p_out=cfg["p_out"],
        tokens_per_text=cfg["tokens_per_text"],
        class_vocab_size=cfg["class_vocab_size"],
        shared_vocab_size=cfg["shared_vocab_size"],
        noise_rate=cfg["noise_rate"],
        seed=cfg["seed"],
        split_fractions=(cfg["train_frac"], cfg["val_frac"], cfg["test_frac"]),
    )
    graph = generate(config)
    save_graph(graph, out)
    summary = summarize(graph)
    print(
        f"synth: {summary['node_count']} nodes, {summary['edge_count']} edges -> {out}"
    )
    return {}, {"seed": cfg["seed"], "summary": summary}, EXIT_OK


def _run_encode(cfg: dict, out: Path):
    graph = load_graph(cfg["data"])
    vocab = build_vocabulary(graph, cfg["max_vocab"])
    features = featurize(graph.texts, vocab)
    started = time.perf_counter()
    trained, embeddings = _train_embeddings(graph, features, cfg)
    save_checkpoint(trained, out / "encoder.json")
    save_embeddings(embeddings, out / "embeddings.jsonl")
    extra = {
        "seed": cfg["seed"],
        "vocab_size": len(vocab.index),
        "final_loss": trained.loss_history[-1],
        "timings": {"train_s": round(time.perf_counter() - started, 3)},
    }
    print(f"encode: final loss {trained.loss_history[-1]:.4f} -> {out}")
    return _dataset_inputs(cfg["data"]), extra, EXIT_OK


def _run_retrieve(cfg: dict, out: Path):
    graph = load_graph(cfg["data"])
    embeddings = load_embeddings(cfg["embeddings"], graph.node_count)
    targets = _resolve_targets(cfg, graph)
    if targets is None:
        targets = list(range(graph.node_count))
    sets = retrieve_all(embeddings, targets, cfg["k"])
    save_influencers(sets, out / "influencers.jsonl")
    inputs = _dataset_inputs(cfg["data"]) | _file_inputs(cfg["embeddings"])
    print(f"retrieve: {len(sets)} influencer sets (k={cfg['k']}) -> {out}")
    return inputs, {"seed": cfg["seed"], "targets": targets}, EXIT_OK


def _load_templates(cfg: dict):
    templates = {}
    if cfg.get("topology_template"):
        templates["topology"] = load_template(cfg["topology_template"], "topology")
    if cfg.get("text_template"):
        templates["text"] = load_template(cfg["text_template"], "text")
    return templates or None


def _run_attack(cfg: dict, out: Path):
    graph = load_graph(cfg["data"])
    targets = _resolve_targets(cfg, graph)
    if targets is None:
        raise ConfigurationError("attack needs --targets or --num-targets")
    vocab = build_vocabulary(graph, cfg["max_vocab"])
    features = featurize(graph.texts, vocab)
    started = time.perf_counter()
    _, embeddings = _train_embeddings(graph, features, cfg)
    train_s = time.perf_counter() - started

    budgets = Budgets.for_targets(
        len(targets),
        per_node_edge_budget=cfg["edge_budget"],
        text_token_budget=cfg["text_budget"],
    )
    oracle = OracleBackend(graph, embeddings, vocab)
    if cfg["backend"] == "oracle":
        backend = oracle
    elif cfg["backend"] == "llm":
        llm_config = LLMConfig(
            model=cfg["model"],
            base_url=cfg["base_url"],
            temperature=cfg["temperature"],
            timeout=cfg["timeout"],
            max_attempts=cfg["max_attempts"],
        )
        backend = LLMBackend(llm_config, fallback=oracle)
    else:
        raise ConfigurationError(f"unknown backend kind {cfg['backend']!r}")

    started = time.perf_counter()
    exhausted_message = None
    try:
        plan = attack(
            graph,
            targets,
            embeddings,
            backend,
            budgets,
            templates=_load_templates(cfg),
            k=cfg["k"],
            seed=cfg["seed"],
            anchor_mismatch=cfg["anchor_mismatch"],
        )
    except BackendExhaustedError as exc:
        plan, exhausted_message = exc.plan, str(exc)
    attack_s = time.perf_counter() - started

    save_plan(plan, out / "plan.jsonl")
    completed = len(plan.entries)
    if backend.query_count != 2 * completed:
        raise PlanInconsistencyError(
            f"query accounting violated: {backend.query_count} queries "
            f"for {completed} completed targets"
        )
    if exhausted_message is None or cfg["allow_partial"]:
        applied = apply_plan(graph, plan, budgets)
        save_graph(applied.graph, out / "perturbed")

    extra = {
        "seed": cfg["seed"],
        "backend_kind": cfg["backend"],
        "targets": targets,
        "completed": completed,
        "skipped": {str(t): r for t, r in sorted(plan.skipped.items())},
        "query_count": backend.query_count,
        "retry_count": backend.retry_count,
        "fallback_count": backend.fallback_count,
        "timings": {
            "encoder_train_s": round(train_s, 3),
            "attack_s": round(attack_s, 3),
        },
    }
    if cfg["backend"] == "llm":
        extra["cost_estimate_usd"] = round(COST_PER_NODE_USD * completed, 6)
    if exhausted_message is not None:
        extra["error"] = exhausted_message
        print(f"error: {exhausted_message}", file=sys.stderr)
        return _dataset_inputs(cfg["data"]), extra, EXIT_BACKEND
    print(
        f"attack: {completed}/{len(targets)} targets, "
        f"{backend.query_count} queries -> {out}"
    )
    return _dataset_inputs(cfg["data"]), extra, EXIT_OK


def _run_evaluate(cfg: dict, out: Path):
    clean = load_graph(cfg["clean"])
    perturbed = load_graph(cfg["perturbed"])
    plan = load_plan(cfg["plan"])
    targets = plan.targets()
    if not targets:
        raise ConfigurationError("plan has no completed targets to evaluate")

    # the vocabulary is frozen on the clean corpus; perturbed text is
    # featurized against it so victims never see attacker-invented terms
    vocab = build_vocabulary(clean, cfg["max_vocab"])
    clean_x = featurize(clean.texts, vocab)
    perturbed_x = featurize(perturbed.texts, vocab)

    kinds = [k for k in cfg["victims"].split(",") if k]
    for kind in kinds:
        if kind not in VICTIM_KINDS:
            raise ConfigurationError(
                f"unknown victim {kind!r}; choose from {', '.join(VICTIM_KINDS)}"
            )
    victim_config = VictimConfig(
        hidden=cfg["hidden"],
        learning_rate=cfg["learning_rate"],
        epochs=cfg["epochs"],
        weight_decay=cfg["weight_decay"],
        sgc_steps=cfg["sgc_steps"],
        seed=cfg["seed"],
    )
    victims = {}
    for kind in kinds:
        try:
            victims[kind] = train_victim(kind, clean, clean_x, victim_config)
        except TrainingError as exc:
            raise TrainingError(f"victim {kind}: {exc}") from exc

    label = cfg["attacker_label"]
    attackers = {label: (perturbed, perturbed_x)}
    for spec in cfg["baseline"] or []:
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise ConfigurationError(
                f"baseline must look like NAME=PLAN_PATH, got {spec!r}"
            )
        baseline_plan = load_plan(path)
        applied = apply_plan(clean, baseline_plan, _plan_budgets(baseline_plan, clean))
        attackers[name] = (applied.graph, featurize(applied.graph.texts, vocab))

    rows = []
    victims_out = {}
    for kind in sorted(victims):
        model = victims[kind]
        clean_acc = accuracy(model, clean, clean_x, targets)
        per_attacker = {}
        for name in sorted(attackers):
            graph_a, features_a = attackers[name]
            perturbed_acc = accuracy(model, graph_a, features_a, targets)
            rows.append((kind, name, clean_acc, perturbed_acc))
            per_attacker[name] = {
                "clean_accuracy": clean_acc,
                "perturbed_accuracy": perturbed_acc,
                "drop": clean_acc - perturbed_acc,
            }
        victims_out[kind] = {
            "val_accuracy": model.val_accuracy,
            "attackers": per_attacker,
        }

    ordered = sorted(victims)
    report = AttackReport(
        attacker=label,
        targets=targets,
        query_count=2 * len(plan.entries),
        victims=victims_out,
        aggregates_clean=aggregate(
            [victims_out[k]["attackers"][label]["clean_accuracy"] for k in ordered]
        ),
        aggregates_perturbed=aggregate(
            [victims_out[k]["attackers"][label]["perturbed_accuracy"] for k in ordered]
        ),
        audit=bound_audit(clean, perturbed, clean_x, perturbed_x, vocab),
        synergy={
            kind: row.as_dict()
            for kind, row in synergy_test(
                clean,
                plan,
                _plan_budgets(plan, clean),
                victims,
                lambda texts: featurize(texts, vocab),
                targets=targets,
            ).items()
        },
        skipped=plan.skipped,
        extra={"baselines": sorted(set(attackers) - {label})},
    )
    _write_json(out / "report.json", report.as_dict())

    lines = ["victim,attacker,clean_accuracy,perturbed_accuracy,drop"]
    for kind, name, clean_acc, perturbed_acc in sorted(rows):
        lines.append(
            f"{kind},{name},{clean_acc:.6f},{perturbed_acc:.6f},"
            f"{clean_acc - perturbed_acc:.6f}"
        )
    (out / "summary.csv").write_text("\n".join(lines) + "\n")

    inputs = (
        _dataset_inputs(cfg["clean"])
        | _dataset_inputs(cfg["perturbed"])
        | _file_inputs(cfg["plan"])
    )
    drops = ", ".join(
        f"{k}={victims_out[k]['attackers'][label]['drop']:.3f}" for k in ordered
    )
    print(f"evaluate: drops {drops} -> {out}")
    return inputs, {"seed": cfg["seed"], "victims": ordered}, EXIT_OK


def _run_audit(cfg: dict, out: Path):
    clean = load_graph(cfg["clean"])
    perturbed = load_graph(cfg["perturbed"])
    vocab = build_vocabulary(clean, cfg["max_vocab"])
    clean_x = featurize(clean.texts, vocab)
    perturbed_x = featurize(perturbed.texts, vocab)
    audit = bound_audit(clean, perturbed, clean_x, perturbed_x, vocab)
    audit["perturb_ratio"] = audit["edge_ratio"]
    audit["single_flip_bound"] = 2.0 / clean.edge_count if clean.edge_count else 0.0
    audit["node_count"] = clean.node_count
    audit["edge_count_clean"] = clean.edge_count
    audit["edge_count_perturbed"] = perturbed.edge_count
    if cfg.get("report"):
        report = json.loads(Path(cfg["report"]).read_text())
        audit["average_accuracy_clean"] = report["aggregates_clean"]["average"]
        audit["average_accuracy_perturbed"] = report["aggregates_perturbed"]["average"]
    _write_json(out / "audit.json", audit)
    inputs = _dataset_inputs(cfg["clean"]) | _dataset_inputs(cfg["perturbed"])
    if cfg.get("report"):
        inputs |= _file_inputs(cfg["report"])
    print(
        f"audit: delta_h_edge {audit['delta_H_edge']:+.5f}, "
        f"perturb ratio {audit['perturb_ratio']:.5f} -> {out}"
    )
    return inputs, {}, EXIT_OK


# ---------------------------------------------------------------------------
# command table and entry point

_ENCODER_FLAGS = [
    ("hidden", "int", 64, "encoder hidden width"),
    ("learning_rate", "float", 0.01, "encoder Adam learning rate"),
    ("epochs", "int", 200, "encoder training epochs"),
    ("weight_decay", "float", 5e-4, "encoder L2 weight decay"),
]

_TARGET_FLAGS = [
    ("targets", "str", None, "explicit comma-separated target node ids"),
    ("num_targets", "int", None, "sample this many targets from --target-split"),
    ("target_split", "str", "test", "split to sample targets from"),
]

_COMMANDS = {
    "synth": (
        [
            ("node_count", "int", 300, "number of nodes"),
            ("class_count", "int", 4, "number of classes"),
            ("p_in", "float", 0.05, "intra-class edge probability"),
            ("p_out", "float", 0.005, "inter-class edge probability"),
            ("tokens_per_text", "int", 6, "tokens drawn per node text"),
            ("class_vocab_size", "int", 8, "terms per class vocabulary"),
            ("shared_vocab_size", "int", 12, "terms shared across classes"),
            ("noise_rate", "float", 0.05, "probability of a one-off noise token"),
            ("seed", "int", 0, "generation seed"),
            ("train_frac", "float", 0.6, "train split fraction"),
            ("val_frac", "float", 0.2, "validation split fraction"),
            ("test_frac", "float", 0.2, "test split fraction"),
        ],
        _run_synth,
        "generate a synthetic text-attributed graph",
    ),
    "encode": (
        [
            ("data", "str", _REQUIRED, "dataset directory"),
            ("max_vocab", "int", 2000, "vocabulary size cap"),
            ("seed", "int", 0, "training seed"),
            *_ENCODER_FLAGS,
        ],
        _run_encode,
        "train the surrogate encoder and dump embeddings",
    ),
    "retrieve": (
        [
            ("data", "str", _REQUIRED, "dataset directory"),
            ("embeddings", "str", _REQUIRED, "embeddings file from encode"),
            ("k", "int", DEFAULT_K, "influencers per target"),
            ("seed", "int", 0, "sampling seed"),
            *_TARGET_FLAGS,
        ],
        _run_retrieve,
        "dump influencer sets (all nodes unless targets are given)",
    ),
    "attack": (
        [
            ("data", "str", _REQUIRED, "dataset directory"),
            ("backend", "str", "oracle", "attacker backend: oracle or llm"),
            ("model", "str", "gpt-4o-mini", "chat model name (llm backend)"),
            ("base_url", "str", None, "API base URL (llm backend)"),
            ("temperature", "float", 0.0, "sampling temperature (llm backend)"),
            ("timeout", "float", 60.0, "request timeout seconds (llm backend)"),
            ("max_attempts", "int", 3, "transport attempts per query (llm backend)"),
            ("edge_budget", "int", 2, "per-node structural edit budget"),
            ("text_budget", "int", 12, "per-node token edit budget"),
            ("k", "int", DEFAULT_K, "influencers retrieved per target"),
            ("seed", "int", 0, "run seed (encoder, sampling, prompts)"),
            ("max_vocab", "int", 2000, "vocabulary size cap"),
            ("topology_template", "str", None, "custom topology prompt file"),
            ("text_template", "str", None, "custom text prompt file"),
            ("anchor_mismatch", "bool", False, "ablation: mis-anchor the text step"),
            ("allow_partial", "bool", False, "write perturbed graph even if exhausted"),
            *_TARGET_FLAGS,
            *_ENCODER_FLAGS,
        ],
        _run_attack,
        "plan and apply a cross-modal attack",
    ),
    "evaluate": (
        [
            ("clean", "str", _REQUIRED, "clean dataset directory"),
            ("perturbed", "str", _REQUIRED, "perturbed dataset directory"),
            ("plan", "str", _REQUIRED, "plan file from attack"),
            ("victims", "str", "gcn,sgc,sage_mean", "comma-separated victim kinds"),
            ("attacker_label", "str", "tagsiege", "row label for the main attacker"),
            ("baseline", "list", [], "extra NAME=PLAN_PATH row (repeatable)"),
            ("max_vocab", "int", 2000, "vocabulary size cap"),
            ("seed", "int", 0, "victim training seed"),
            ("sgc_steps", "int", 2, "SGC propagation steps"),
            *_ENCODER_FLAGS,
        ],
        _run_evaluate,
        "train victims on the clean graph and report drops",
    ),
    "audit": (
        [
            ("clean", "str", _REQUIRED, "clean dataset directory"),
            ("perturbed", "str", _REQUIRED, "perturbed dataset directory"),
            ("max_vocab", "int", 2000, "vocabulary size cap"),
            ("report", "str", None, "report.json to pull accuracy aggregates from"),
        ],
        _run_audit,
        "stealth audit: edit counts and homophily deltas",
    ),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tagsiege",
        description="black-box cross-modal attacks on text-attributed graphs",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, (spec, _, help_text) in _COMMANDS.items():
        cmd = sub.add_parser(command, help=help_text, description=help_text)
        cmd.add_argument("--out", required=True, help="output directory")
        cmd.add_argument("--config", help="flat key=value config file")
        _add_flags(cmd, spec)
    replay = sub.add_parser(
        "replay",
        help="re-run a recorded command bit-identically",
        description="re-run the command recorded in a manifest",
    )
    replay.add_argument("manifest", help="manifest.json from a previous run")
    replay.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_replay(args: argparse.Namespace) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    command = manifest.get("command")
    if command not in _COMMANDS:
        raise ConfigurationError(f"manifest names unknown command {command!r}")
    for path, digest in manifest.get("inputs", {}).items():
        if not Path(path).exists():
            raise ConfigurationError(f"replay input missing: {path}")
        if _sha256_file(Path(path)) != digest:
            raise ConfigurationError(f"replay input changed since recording: {path}")
    spec, runner, _ = _COMMANDS[command]
    config = manifest["config"]
    missing = [name for name, _, _, _ in spec if name not in config]
    if missing:
        raise ConfigurationError(f"manifest config lacks keys: {', '.join(missing)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs, extra, code = runner(config, out)
    _write_manifest(out, command, config, inputs, extra)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            return _cmd_replay(args)
        spec, runner, _ = _COMMANDS[args.command]
        config = _resolve_options(spec, args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        inputs, extra, code = runner(config, out)
        _write_manifest(out, args.command, config, inputs, extra)
        return code
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except TagSiegeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
