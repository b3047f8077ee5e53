"""Attack metrics: homophily, the stealth bound audit, aggregates, synergy.

Homophily is measured as feature-cosine similarity (edge-level and
node-centric). The bound audit never asserts the homophily inequality — its
constants are existential — it reports every component plus the observed
ratio so stealth regressions show up in review.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateInputError, ShapeError
from .graph import TextAttributedGraph
from .plan import (
    Budgets,
    PerturbationPlan,
    apply_plan,
    apply_text_only,
    edit_counts,
    structure_only,
)
from .text_features import token_edit_distance
from .victims import VictimModel, accuracy


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def _check_features(graph: TextAttributedGraph, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    if features.shape[0] != graph.node_count:
        raise ShapeError(
            f"feature rows {features.shape[0]} != node count {graph.node_count}"
        )
    if not graph.edges:
        raise DegenerateInputError("homophily of an edgeless graph is undefined")
    return features


def homophily_edge(graph: TextAttributedGraph, features: np.ndarray) -> float:
    """Mean cosine similarity across edge endpoints."""
    features = _check_features(graph, features)
    return float(np.mean([
        _cosine(features[u], features[v]) for u, v in graph.sorted_edges()
    ]))


def homophily_node(graph: TextAttributedGraph, features: np.ndarray) -> float:
    """Mean over non-isolated nodes of their mean neighbor cosine similarity."""
    features = _check_features(graph, features)
    values = []
    for node in range(graph.node_count):
        nbrs = graph.neighbors(node)
        if not nbrs:
            continue
        values.append(
            float(np.mean([_cosine(features[node], features[n]) for n in nbrs]))
        )
    return float(np.mean(values))


def label_homophily_edge(graph: TextAttributedGraph) -> float:
    """Fraction of edges joining same-label endpoints (diagnostics only)."""
    if not graph.edges:
        raise DegenerateInputError("homophily of an edgeless graph is undefined")
    same = sum(1 for u, v in graph.edges if graph.labels[u] == graph.labels[v])
    return same / graph.edge_count


def bound_audit(
    clean: TextAttributedGraph,
    perturbed: TextAttributedGraph,
    features_clean: np.ndarray,
    features_pert: np.ndarray,
    vocab=None,
) -> dict[str, float]:
    """Every component of the homophily-stability bound, plus the observed ratio.

    Keys: homophily before/after (edge and node), their deltas, the edge edit
    ratio Δ_E, text drift τ (max and mean over changed nodes), the empirical
    per-token Lipschitz estimate of the featurizer, and
    |ΔH_edge| / (Δ_E + L̂·τ_max) as `empirical_ratio` (0 when the denominator
    vanishes). Nothing is asserted here — the constants are unknown.
    """
    h_edge_clean = homophily_edge(clean, features_clean)
    h_edge_pert = homophily_edge(perturbed, features_pert)
    h_node_clean = homophily_node(clean, features_clean)
    h_node_pert = homophily_node(perturbed, features_pert)
    edge_edits, text_edits, edge_ratio = edit_counts(clean, perturbed)

    drifts: list[float] = []
    lipschitz = 0.0
    features_clean = np.asarray(features_clean, dtype=float)
    features_pert = np.asarray(features_pert, dtype=float)
    for i, (old, new) in enumerate(zip(clean.texts, perturbed.texts)):
        if old == new:
            continue
        drift = float(np.linalg.norm(features_pert[i] - features_clean[i]))
        drifts.append(drift)
        edits = token_edit_distance(old, new)
        if edits > 0:
            lipschitz = max(lipschitz, drift / edits)

    tau_max = max(drifts) if drifts else 0.0
    tau_mean = float(np.mean(drifts)) if drifts else 0.0
    delta_h_edge = h_edge_pert - h_edge_clean
    denominator = edge_ratio + lipschitz * tau_max
    ratio = abs(delta_h_edge) / denominator if denominator > 0 else 0.0
    return {
        "homophily_edge_clean": h_edge_clean,
        "homophily_edge_perturbed": h_edge_pert,
        "homophily_node_clean": h_node_clean,
        "homophily_node_perturbed": h_node_pert,
        "delta_H_edge": delta_h_edge,
        "delta_H_node": h_node_pert - h_node_clean,
        "edge_edits": float(edge_edits),
        "text_edits": float(text_edits),
        "edge_ratio": edge_ratio,
        "tau_max": tau_max,
        "tau_mean": tau_mean,
        "lipschitz_est": lipschitz,
        "empirical_ratio": ratio,
    }


def aggregate(accuracies: Sequence[float]) -> dict:
    """Average, 3-MAX and robustness-weighted summaries of per-victim accuracy.

    three_max is None (flagged) below three victims. Weighted sorts
    descending and applies normalized geometric weights 2^{-i}.
    """
    values = [float(a) for a in accuracies]
    if not values:
        raise DegenerateInputError("aggregate of zero victim rows")
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise DegenerateInputError(f"accuracy {v} outside [0, 1]")
    ordered = sorted(values, reverse=True)
    weights = np.array([2.0 ** -i for i in range(len(ordered))])
    weights /= weights.sum()
    out = {
        "average": float(np.mean(values)),
        "weighted": float(np.dot(weights, ordered)),
        "three_max": None,
        "three_max_available": len(values) >= 3,
    }
    if out["three_max_available"]:
        out["three_max"] = float(np.mean(ordered[:3]))
    return out


@dataclass
class SynergyRow:
    drop_struct: float
    drop_text: float
    drop_joint: float

    @property
    def synergy_hard(self) -> bool:
        """Joint at least as damaging as the better single modality."""
        return self.drop_joint >= max(self.drop_struct, self.drop_text)

    @property
    def synergy_soft(self) -> bool:
        """Joint strictly beats the sum of the parts."""
        return self.drop_joint > self.drop_struct + self.drop_text

    def as_dict(self) -> dict:
        return {
            "drop_struct": self.drop_struct,
            "drop_text": self.drop_text,
            "drop_joint": self.drop_joint,
            "synergy_hard": self.synergy_hard,
            "synergy_soft": self.synergy_soft,
        }


def synergy_test(
    clean: TextAttributedGraph,
    plan: PerturbationPlan,
    budgets: Budgets,
    victims: dict[str, VictimModel],
    featurize_fn: Callable[[Sequence[str]], np.ndarray],
    targets: list[int] | None = None,
) -> dict[str, SynergyRow]:
    """Accuracy drops under structure-only, text-only and joint perturbation.

    Victims stay frozen; only the graph they are evaluated on changes. Drops
    are measured on the plan's target nodes unless `targets` overrides that.
    """
    if targets is None:
        targets = plan.targets()
    if not targets:
        return {
            name: SynergyRow(0.0, 0.0, 0.0) for name in victims
        }
    features_clean = featurize_fn(clean.texts)

    struct_graph = apply_plan(clean, structure_only(plan), budgets).graph
    text_graph = apply_text_only(clean, plan, budgets)
    joint_graph = apply_plan(clean, plan, budgets).graph

    variants = {
        "struct": (struct_graph, features_clean),
        "text": (text_graph, featurize_fn(text_graph.texts)),
        "joint": (joint_graph, featurize_fn(joint_graph.texts)),
    }
    out: dict[str, SynergyRow] = {}
    for name, model in victims.items():
        clean_acc = accuracy(model, clean, features_clean, targets)
        drops = {
            key: clean_acc - accuracy(model, graph, feats, targets)
            for key, (graph, feats) in variants.items()
        }
        out[name] = SynergyRow(
            drop_struct=drops["struct"],
            drop_text=drops["text"],
            drop_joint=drops["joint"],
        )
    return out


@dataclass
class AttackReport:
    """Everything one evaluation run learned, ready for JSON serialization."""

    attacker: str
    targets: list[int]
    query_count: int
    victims: dict[str, dict] = field(default_factory=dict)
    aggregates_clean: dict = field(default_factory=dict)
    aggregates_perturbed: dict = field(default_factory=dict)
    audit: dict = field(default_factory=dict)
    synergy: dict[str, dict] = field(default_factory=dict)
    skipped: dict[int, str] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "attacker": self.attacker,
            "targets": list(self.targets),
            "query_count": self.query_count,
            "victims": self.victims,
            "aggregates_clean": self.aggregates_clean,
            "aggregates_perturbed": self.aggregates_perturbed,
            "audit": self.audit,
            "synergy": self.synergy,
            "skipped": {str(k): v for k, v in sorted(self.skipped.items())},
            "extra": self.extra,
        }
