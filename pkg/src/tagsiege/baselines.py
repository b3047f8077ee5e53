"""Structure-only baseline attackers: RND and FLIP.

Both spend the same Budgets type as the main pipeline and leave every text
untouched, so evaluation rows compare like for like.
"""

from __future__ import annotations

from .graph import TextAttributedGraph
from .plan import Budgets, PerturbationPlan, PlanEntry
from .seeding import substream


def rnd_attack(
    graph: TextAttributedGraph,
    targets: list[int],
    budgets: Budgets,
    seed: int = 0,
) -> PerturbationPlan:
    """Random deletion among neighbors plus random insertion to a non-neighbor.

    Per-node budget 1 buys the insertion only; 0 buys nothing. Deterministic
    given the seed (one substream per target).
    """
    plan = PerturbationPlan()
    spent = 0
    for target in sorted(set(targets)):
        local = budgets.per_node_edge_budget
        rng = substream(seed, f"rnd-{target}")
        neighbors = graph.neighbors(target)
        delete = None
        if local >= 2 and neighbors:
            delete = int(neighbors[rng.integers(0, len(neighbors))])
        non_neighbors = [
            v for v in range(graph.node_count)
            if v != target and not graph.has_edge(target, v)
        ]
        if local < 1 or not non_neighbors:
            continue
        insert = int(non_neighbors[rng.integers(0, len(non_neighbors))])
        cost = (2 if delete is not None else 1)
        if spent + cost > budgets.global_edge_budget:
            break
        spent += cost
        plan.add(PlanEntry(
            target=target,
            delete_neighbor=delete,
            add_influencer=insert,
            rationale="rnd baseline",
        ))
    return plan


def flip_attack(
    graph: TextAttributedGraph,
    targets: list[int],
    budgets: Budgets,
) -> PerturbationPlan:
    """Cut the lowest-degree neighbor, wire up the highest-degree non-neighbor.

    All ties break toward the lower node id; degrees are read off the clean
    graph. Fully deterministic, no randomness involved.
    """
    plan = PerturbationPlan()
    spent = 0
    degree = [graph.degree(v) for v in range(graph.node_count)]
    for target in sorted(set(targets)):
        local = budgets.per_node_edge_budget
        neighbors = graph.neighbors(target)
        delete = None
        if local >= 2 and neighbors:
            delete = min(neighbors, key=lambda v: (degree[v], v))
        non_neighbors = [
            v for v in range(graph.node_count)
            if v != target and not graph.has_edge(target, v)
        ]
        if local < 1 or not non_neighbors:
            continue
        insert = min(non_neighbors, key=lambda v: (-degree[v], v))
        cost = (2 if delete is not None else 1)
        if spent + cost > budgets.global_edge_budget:
            break
        spent += cost
        plan.add(PlanEntry(
            target=target,
            delete_neighbor=delete,
            add_influencer=insert,
            rationale="flip baseline",
        ))
    return plan
