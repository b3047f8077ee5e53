"""Perturbation plans: budgets, validation and application to a graph.

A plan maps target nodes to one edge deletion, one edge insertion and an
optional text rewrite. Budgets cap edge edits per node and globally, and text
edits per node (token set symmetric difference) and globally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BudgetError, ParseError, PlanInconsistencyError, ShapeError
from .graph import TextAttributedGraph, canonical_edge
from .text_features import token_edit_distance


@dataclass(frozen=True)
class Budgets:
    """Edit allowances for one attack run."""

    per_node_edge_budget: int = 2
    global_edge_budget: int = 0
    text_token_budget: int = 0
    global_text_budget: int = 0

    def __post_init__(self):
        for name in (
            "per_node_edge_budget",
            "global_edge_budget",
            "text_token_budget",
            "global_text_budget",
        ):
            if getattr(self, name) < 0:
                raise BudgetError(f"{name} must be >= 0")

    @classmethod
    def for_targets(
        cls,
        target_count: int,
        per_node_edge_budget: int = 2,
        text_token_budget: int = 12,
    ) -> "Budgets":
        """Global budgets sized so every target can spend its full local budget."""
        return cls(
            per_node_edge_budget=per_node_edge_budget,
            global_edge_budget=per_node_edge_budget * target_count,
            text_token_budget=text_token_budget,
            global_text_budget=text_token_budget * target_count,
        )


@dataclass(frozen=True)
class PlanEntry:
    target: int
    delete_neighbor: int | None
    add_influencer: int
    keyword: str | None = None
    new_text: str | None = None
    rationale: str = ""
    intended_label: int | None = None

    @property
    def edge_edit_count(self) -> int:
        return (0 if self.delete_neighbor is None else 1) + 1

    @property
    def has_text_edit(self) -> bool:
        return self.new_text is not None


@dataclass
class PerturbationPlan:
    entries: dict[int, PlanEntry] = field(default_factory=dict)
    skipped: dict[int, str] = field(default_factory=dict)

    def add(self, entry: PlanEntry) -> None:
        if entry.target in self.entries:
            raise PlanInconsistencyError(f"duplicate plan entry for target {entry.target}")
        self.entries[entry.target] = entry

    def skip(self, target: int, reason: str) -> None:
        self.skipped[target] = reason

    def targets(self) -> list[int]:
        return sorted(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class PlanAudit:
    edge_edits: int
    text_edits_total: int
    per_node_edge_edits: dict[int, int]
    per_node_text_edits: dict[int, int]


@dataclass(frozen=True)
class AppliedPlan:
    graph: TextAttributedGraph
    audit: PlanAudit


def _validate_entry(graph: TextAttributedGraph, entry: PlanEntry) -> None:
    t = entry.target
    if not 0 <= t < graph.node_count:
        raise PlanInconsistencyError(f"target {t} is not a node")
    if entry.delete_neighbor is not None:
        d = entry.delete_neighbor
        if not graph.has_edge(t, d):
            raise PlanInconsistencyError(
                f"target {t}: cannot delete edge to {d}; no such edge"
            )
    a = entry.add_influencer
    if not 0 <= a < graph.node_count:
        raise PlanInconsistencyError(f"target {t}: insertion endpoint {a} is not a node")
    if a == t:
        raise PlanInconsistencyError(f"target {t}: insertion would be a self-loop")
    if graph.has_edge(t, a) and entry.delete_neighbor != a:
        raise PlanInconsistencyError(
            f"target {t}: edge to {a} already present; insertion is a no-op"
        )
    if entry.new_text is not None and not entry.new_text.strip():
        raise PlanInconsistencyError(f"target {t}: rewritten text is empty")


def apply_plan(
    graph: TextAttributedGraph,
    plan: PerturbationPlan,
    budgets: Budgets,
) -> AppliedPlan:
    """Validate a plan against the clean graph and budgets, then apply it.

    All checks happen against the clean graph; every target is edited at most
    once so entries cannot interact. An empty plan returns the graph unchanged.
    """
    edges = set(graph.edges)
    texts = list(graph.texts)
    per_node_edge: dict[int, int] = {}
    per_node_text: dict[int, int] = {}
    edge_total = 0
    text_total = 0

    for target in sorted(plan.entries):
        entry = plan.entries[target]
        _validate_entry(graph, entry)

        cost = entry.edge_edit_count
        if cost > budgets.per_node_edge_budget:
            raise BudgetError(
                f"{cost} edge edits exceed per-node budget {budgets.per_node_edge_budget}",
                node=target,
            )
        if edge_total + cost > budgets.global_edge_budget:
            raise BudgetError(
                f"global edge budget {budgets.global_edge_budget} exhausted", node=target
            )
        if entry.delete_neighbor is not None:
            edges.discard(canonical_edge(target, entry.delete_neighbor))
        edges.add(canonical_edge(target, entry.add_influencer))
        per_node_edge[target] = cost
        edge_total += cost

        if entry.new_text is not None:
            dist = token_edit_distance(graph.texts[target], entry.new_text)
            if dist > budgets.text_token_budget:
                raise BudgetError(
                    f"text edit distance {dist} exceeds per-node budget "
                    f"{budgets.text_token_budget}",
                    node=target,
                )
            if text_total + dist > budgets.global_text_budget:
                raise BudgetError(
                    f"global text budget {budgets.global_text_budget} exhausted", node=target
                )
            texts[target] = entry.new_text
            per_node_text[target] = dist
            text_total += dist

    perturbed = graph.with_changes(edges=edges, texts=texts)
    audit = PlanAudit(
        edge_edits=edge_total,
        text_edits_total=text_total,
        per_node_edge_edits=per_node_edge,
        per_node_text_edits=per_node_text,
    )
    return AppliedPlan(graph=perturbed, audit=audit)


def structure_only(plan: PerturbationPlan) -> PerturbationPlan:
    """The same plan with every text edit stripped."""
    out = PerturbationPlan(skipped=dict(plan.skipped))
    for entry in plan.entries.values():
        out.add(PlanEntry(
            target=entry.target,
            delete_neighbor=entry.delete_neighbor,
            add_influencer=entry.add_influencer,
            rationale=entry.rationale,
            intended_label=entry.intended_label,
        ))
    return out


def apply_text_only(
    graph: TextAttributedGraph,
    plan: PerturbationPlan,
    budgets: Budgets,
) -> TextAttributedGraph:
    """Apply just the text edits of a plan, with the same budget accounting."""
    texts = list(graph.texts)
    total = 0
    for target in sorted(plan.entries):
        entry = plan.entries[target]
        if entry.new_text is None:
            continue
        if not entry.new_text.strip():
            raise PlanInconsistencyError(f"target {target}: rewritten text is empty")
        dist = token_edit_distance(graph.texts[target], entry.new_text)
        if dist > budgets.text_token_budget:
            raise BudgetError(
                f"text edit distance {dist} exceeds per-node budget "
                f"{budgets.text_token_budget}",
                node=target,
            )
        if total + dist > budgets.global_text_budget:
            raise BudgetError(
                f"global text budget {budgets.global_text_budget} exhausted", node=target
            )
        texts[target] = entry.new_text
        total += dist
    return graph.with_changes(texts=texts)


def edit_counts(
    clean: TextAttributedGraph, perturbed: TextAttributedGraph
) -> tuple[int, int, float]:
    """(edge edits, text token edits, edge edit ratio) between two graphs.

    Edge edits are the symmetric difference of the edge sets; the ratio is
    relative to the clean edge count. Text edits sum token set symmetric
    differences over changed nodes.
    """
    if clean.node_count != perturbed.node_count:
        raise ShapeError(
            f"node counts differ: {clean.node_count} vs {perturbed.node_count}"
        )
    edge_edits = len(clean.edges.symmetric_difference(perturbed.edges))
    text_edits = sum(
        token_edit_distance(a, b)
        for a, b in zip(clean.texts, perturbed.texts)
        if a != b
    )
    ratio = edge_edits / clean.edge_count if clean.edge_count else 0.0
    return edge_edits, text_edits, ratio


def save_plan(plan: PerturbationPlan, path: str | Path) -> None:
    """One JSON object per line: entries sorted by target, then skips."""
    with Path(path).open("w") as fh:
        for target in sorted(plan.entries):
            e = plan.entries[target]
            rec = {
                "target": e.target,
                "delete_neighbor": e.delete_neighbor,
                "add_influencer": e.add_influencer,
                "keyword": e.keyword,
                "new_text": e.new_text,
                "rationale": e.rationale,
                "intended_label": e.intended_label,
            }
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")
        for target in sorted(plan.skipped):
            rec = {"target": target, "skipped": plan.skipped[target]}
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")


def load_plan(path: str | Path) -> PerturbationPlan:
    plan = PerturbationPlan()
    p = Path(path)
    with p.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", str(p), lineno) from exc
            if "skipped" in rec:
                plan.skip(int(rec["target"]), str(rec["skipped"]))
                continue
            try:
                entry = PlanEntry(
                    target=int(rec["target"]),
                    delete_neighbor=(
                        None if rec.get("delete_neighbor") is None
                        else int(rec["delete_neighbor"])
                    ),
                    add_influencer=int(rec["add_influencer"]),
                    keyword=rec.get("keyword"),
                    new_text=rec.get("new_text"),
                    rationale=rec.get("rationale", ""),
                    intended_label=(
                        None if rec.get("intended_label") is None
                        else int(rec["intended_label"])
                    ),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad plan record: {exc}", str(p), lineno) from exc
            plan.add(entry)
    return plan
