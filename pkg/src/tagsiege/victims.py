"""Victim GNNs: GCN, SGC and mean-aggregation SAGE.

These stand in for the deployed models under attack. They are trained once on
the clean graph, frozen, and then queried on whatever graph the evaluation
hands them (clean or perturbed) — propagation is always recomputed from that
graph. They share nothing with the attacker: no surrogate embeddings, no
plan, no backend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .encoder import normalize_adjacency
from .errors import ConfigurationError, DegenerateInputError, ParseError, ShapeError, TrainingError
from .graph import TextAttributedGraph
from .nnops import Adam, check_finite, cross_entropy_with_grad, glorot, relu
from .seeding import substream

VICTIM_KINDS = ("gcn", "sgc", "sage_mean")


@dataclass
class VictimConfig:
    hidden: int = 64
    learning_rate: float = 0.01
    epochs: int = 200
    weight_decay: float = 5e-4
    sgc_steps: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1 or self.epochs < 1 or self.sgc_steps < 1:
            raise ConfigurationError("hidden, epochs and sgc_steps must be >= 1")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ConfigurationError("learning_rate > 0 and weight_decay >= 0 required")


@dataclass
class VictimModel:
    kind: str
    weights: dict[str, np.ndarray]
    config: VictimConfig
    val_accuracy: float | None = None

    def __post_init__(self):
        if self.kind not in VICTIM_KINDS:
            raise ConfigurationError(f"unknown victim kind {self.kind!r}")
        for name, w in self.weights.items():
            if not np.all(np.isfinite(w)):
                raise TrainingError(f"weight {name} contains non-finite values")


def mean_aggregation(graph: TextAttributedGraph) -> sp.csr_matrix:
    """Row-normalized adjacency D^{-1} A; isolated nodes get an all-zero row."""
    n = graph.node_count
    rows, cols = [], []
    for u, v in graph.edges:
        rows += [u, v]
        cols += [v, u]
    a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return (sp.diags(inv) @ a).tocsr()


def gcn_logits(
    a_hat: sp.csr_matrix,
    features: np.ndarray,
    w1: np.ndarray,
    w2: np.ndarray,
    linear: bool = False,
) -> np.ndarray:
    """Two-layer GCN forward; `linear=True` swaps relu for identity."""
    h = a_hat @ (features @ w1)
    if not linear:
        h = relu(h)
    return a_hat @ (h @ w2)


def sgc_logits(
    a_hat: sp.csr_matrix, features: np.ndarray, w: np.ndarray, steps: int
) -> np.ndarray:
    """K propagation steps then one linear map."""
    propagated = features
    for _ in range(steps):
        propagated = a_hat @ propagated
    return propagated @ w


def sage_logits(
    m: sp.csr_matrix,
    features: np.ndarray,
    weights: dict[str, np.ndarray],
) -> np.ndarray:
    """Mean-SAGE: each layer mixes the node's own signal with its mean neighbor."""
    h_pre = features @ weights["ws1"] + (m @ features) @ weights["wn1"]
    h = relu(h_pre)
    return h @ weights["ws2"] + (m @ h) @ weights["wn2"]


def victim_logits(
    model: VictimModel, graph: TextAttributedGraph, features: np.ndarray
) -> np.ndarray:
    """Forward pass with propagation rebuilt from the *given* graph."""
    first = next(iter(model.weights.values()))
    if features.shape[1] != first.shape[0]:
        raise ShapeError(
            f"feature dim {features.shape[1]} != weight fan-in {first.shape[0]}"
        )
    if model.kind == "gcn":
        return gcn_logits(
            normalize_adjacency(graph), features, model.weights["w1"], model.weights["w2"]
        )
    if model.kind == "sgc":
        return sgc_logits(
            normalize_adjacency(graph), features, model.weights["w"], model.config.sgc_steps
        )
    return sage_logits(mean_aggregation(graph), features, model.weights)


def _train_gcn(a_hat, X, labels, rows, cfg):
    rng = substream(cfg.seed, "victim-gcn")
    w1 = glorot(rng, X.shape[1], cfg.hidden)
    w2 = glorot(rng, cfg.hidden, int(labels.max()) + 1)
    opt = Adam([w1, w2], lr=cfg.learning_rate)
    u = a_hat @ X
    for _ in range(cfg.epochs):
        h_pre = u @ w1
        h = relu(h_pre)
        q = a_hat @ h
        logits = q @ w2
        loss, dlogits = cross_entropy_with_grad(logits, labels, rows)
        check_finite(loss, "gcn loss")
        dw2 = q.T @ dlogits + cfg.weight_decay * w2
        dh = a_hat @ (dlogits @ w2.T)
        dh_pre = dh * (h_pre > 0)
        dw1 = u.T @ dh_pre + cfg.weight_decay * w1
        opt.step([dw1, dw2])
    return {"w1": w1, "w2": w2}


def _train_sgc(a_hat, X, labels, rows, cfg):
    rng = substream(cfg.seed, "victim-sgc")
    propagated = X
    for _ in range(cfg.sgc_steps):
        propagated = a_hat @ propagated
    w = glorot(rng, X.shape[1], int(labels.max()) + 1)
    opt = Adam([w], lr=cfg.learning_rate)
    for _ in range(cfg.epochs):
        logits = propagated @ w
        loss, dlogits = cross_entropy_with_grad(logits, labels, rows)
        check_finite(loss, "sgc loss")
        dw = propagated.T @ dlogits + cfg.weight_decay * w
        opt.step([dw])
    return {"w": w}


def _train_sage(m, X, labels, rows, cfg):
    rng = substream(cfg.seed, "victim-sage")
    classes = int(labels.max()) + 1
    weights = {
        "ws1": glorot(rng, X.shape[1], cfg.hidden),
        "wn1": glorot(rng, X.shape[1], cfg.hidden),
        "ws2": glorot(rng, cfg.hidden, classes),
        "wn2": glorot(rng, cfg.hidden, classes),
    }
    names = ("ws1", "wn1", "ws2", "wn2")
    opt = Adam([weights[k] for k in names], lr=cfg.learning_rate)
    x_nbr = m @ X
    for _ in range(cfg.epochs):
        h_pre = X @ weights["ws1"] + x_nbr @ weights["wn1"]
        h = relu(h_pre)
        h_nbr = m @ h
        logits = h @ weights["ws2"] + h_nbr @ weights["wn2"]
        loss, dlogits = cross_entropy_with_grad(logits, labels, rows)
        check_finite(loss, "sage loss")
        dws2 = h.T @ dlogits + cfg.weight_decay * weights["ws2"]
        dwn2 = h_nbr.T @ dlogits + cfg.weight_decay * weights["wn2"]
        dh = dlogits @ weights["ws2"].T + m.T @ (dlogits @ weights["wn2"].T)
        dh_pre = dh * (h_pre > 0)
        dws1 = X.T @ dh_pre + cfg.weight_decay * weights["ws1"]
        dwn1 = x_nbr.T @ dh_pre + cfg.weight_decay * weights["wn1"]
        opt.step([dws1, dwn1, dws2, dwn2])
    return weights


def train_victim(
    kind: str,
    graph: TextAttributedGraph,
    features: np.ndarray,
    config: VictimConfig | None = None,
) -> VictimModel:
    """Fit one victim on the clean graph's train split; deterministic by seed."""
    if kind not in VICTIM_KINDS:
        raise ConfigurationError(f"unknown victim kind {kind!r}")
    config = config or VictimConfig()
    if features.shape[0] != graph.node_count:
        raise ShapeError(
            f"feature rows {features.shape[0]} != node count {graph.node_count}"
        )
    rows = np.array(graph.split_nodes("train"), dtype=int)
    if rows.size == 0:
        raise TrainingError("graph has no train nodes")
    labels = np.array(graph.labels, dtype=int)

    if kind == "gcn":
        weights = _train_gcn(normalize_adjacency(graph), features, labels, rows, config)
    elif kind == "sgc":
        weights = _train_sgc(normalize_adjacency(graph), features, labels, rows, config)
    else:
        weights = _train_sage(mean_aggregation(graph), features, labels, rows, config)

    model = VictimModel(kind=kind, weights=weights, config=config)
    val = graph.split_nodes("val")
    if val:
        model.val_accuracy = accuracy(model, graph, features, list(val))
    return model


def predict(
    model: VictimModel, graph: TextAttributedGraph, features: np.ndarray
) -> np.ndarray:
    """Per-node argmax labels; ties resolve to the lowest class id."""
    logits = victim_logits(model, graph, features)
    return np.argmax(logits, axis=1)


def accuracy(
    model: VictimModel,
    graph: TextAttributedGraph,
    features: np.ndarray,
    node_set: list[int],
) -> float:
    if not node_set:
        raise DegenerateInputError("accuracy over an empty node set")
    preds = predict(model, graph, features)
    labels = np.array(graph.labels)
    nodes = np.array(sorted(node_set), dtype=int)
    return float(np.mean(preds[nodes] == labels[nodes]))


def save_victim(model: VictimModel, path: str | Path) -> None:
    payload = {
        "kind": model.kind,
        "hidden": model.config.hidden,
        "sgc_steps": model.config.sgc_steps,
        "seed": model.config.seed,
        "val_accuracy": model.val_accuracy,
        "weights": {
            name: [[float(x) for x in row] for row in w]
            for name, w in sorted(model.weights.items())
        },
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")))


def load_victim(path: str | Path) -> VictimModel:
    p = Path(path)
    try:
        payload = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", str(p), exc.lineno) from exc
    for key in ("kind", "weights"):
        if key not in payload:
            raise ParseError(f"victim checkpoint missing {key!r}", str(p), 0)
    weights = {
        name: np.array(w, dtype=float) for name, w in payload["weights"].items()
    }
    config = VictimConfig(
        hidden=int(payload.get("hidden", 64)),
        sgc_steps=int(payload.get("sgc_steps", 2)),
        seed=int(payload.get("seed", 0)),
    )
    return VictimModel(
        kind=payload["kind"],
        weights=weights,
        config=config,
        val_accuracy=payload.get("val_accuracy"),
    )
