import pytest

from tagsiege.baselines import flip_attack, rnd_attack
from tagsiege.graph import TextAttributedGraph
from tagsiege.plan import Budgets, apply_plan, edit_counts
from tagsiege.seeding import substream


def wheel_graph(n=20, seed=17):
    """Hub node 0 plus a rim; degrees vary widely."""
    rng = substream(seed, "baseline-graph")
    edges = [(0, i) for i in range(1, n)]
    edges += [(i, i + 1) for i in range(1, n - 1)]
    # sprinkle extra chords so degree ranks are not all tied
    for _ in range(6):
        u, v = sorted(rng.integers(1, n, size=2).tolist())
        if u != v:
            edges.append((u, v))
    return TextAttributedGraph.build(
        texts=[f"node {i} words" for i in range(n)],
        labels=[i % 2 for i in range(n)],
        splits=["train"] * n,
        edges=edges,
    )


def test_rnd_zero_budget_is_empty():
    g = wheel_graph()
    plan = rnd_attack(g, [1, 2, 3], Budgets(per_node_edge_budget=0,
                                            global_edge_budget=0), seed=1)
    assert len(plan) == 0


def test_rnd_deterministic_and_valid():
    g = wheel_graph()
    targets = [1, 5, 9, 13]
    budgets = Budgets.for_targets(len(targets))
    p1 = rnd_attack(g, targets, budgets, seed=7)
    p2 = rnd_attack(g, targets, budgets, seed=7)
    assert p1.entries == p2.entries
    applied = apply_plan(g, p1, budgets)
    edge_edits, text_edits, _ = edit_counts(g, applied.graph)
    assert edge_edits == 2 * len(p1)
    assert text_edits == 0  # structure-only


def test_rnd_different_seeds_differ():
    g = wheel_graph()
    targets = list(range(1, 11))
    budgets = Budgets.for_targets(len(targets))
    p1 = rnd_attack(g, targets, budgets, seed=1)
    p2 = rnd_attack(g, targets, budgets, seed=2)
    assert any(
        p1.entries[t].add_influencer != p2.entries[t].add_influencer
        for t in p1.entries
    )


def test_rnd_respects_choices():
    g = wheel_graph()
    budgets = Budgets.for_targets(5)
    plan = rnd_attack(g, [2, 4, 6, 8, 10], budgets, seed=5)
    for t, e in plan.entries.items():
        assert e.delete_neighbor in g.neighbors(t)
        assert not g.has_edge(t, e.add_influencer)
        assert e.new_text is None and e.keyword is None


def test_rnd_insertion_only_when_budget_one():
    g = wheel_graph()
    budgets = Budgets(per_node_edge_budget=1, global_edge_budget=10)
    plan = rnd_attack(g, [3, 4], budgets, seed=2)
    for e in plan.entries.values():
        assert e.delete_neighbor is None


def test_rnd_global_budget_stops_late_targets():
    g = wheel_graph()
    budgets = Budgets(per_node_edge_budget=2, global_edge_budget=4)
    plan = rnd_attack(g, [1, 2, 3, 4, 5], budgets, seed=3)
    assert len(plan) == 2  # 2 edits each


def test_flip_deletes_lowest_degree_neighbor_inserts_highest_degree():
    g = wheel_graph()
    degree = [g.degree(v) for v in range(g.node_count)]
    budgets = Budgets.for_targets(3)
    plan = flip_attack(g, [5, 9, 14], budgets)
    for t, e in plan.entries.items():
        nbrs = g.neighbors(t)
        assert e.delete_neighbor == min(nbrs, key=lambda v: (degree[v], v))
        non_nbrs = [v for v in range(g.node_count)
                    if v != t and not g.has_edge(t, v)]
        assert e.add_influencer == min(non_nbrs, key=lambda v: (-degree[v], v))


def test_flip_star_leaf_forced_choice():
    g = TextAttributedGraph.build(
        texts=["hub", "leaf one", "leaf two", "leaf three"],
        labels=[0, 1, 1, 1],
        splits=["train"] * 4,
        edges=[(0, 1), (0, 2), (0, 3)],
    )
    plan = flip_attack(g, [1], Budgets.for_targets(1))
    entry = plan.entries[1]
    assert entry.delete_neighbor == 0   # the hub is the only neighbor
    assert entry.add_influencer == 2    # leaves tie on degree; lowest id wins


def test_flip_tie_breaks_by_lowest_id():
    # nodes 1 and 2 both have max degree among non-neighbors of 4
    g = TextAttributedGraph.build(
        texts=["a", "b", "c", "d", "e"],
        labels=[0, 0, 1, 1, 0],
        splits=["train"] * 5,
        edges=[(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)],
    )
    plan = flip_attack(g, [4], Budgets.for_targets(1))
    # non-neighbors of 4: 0, 1, 2 (degrees 2, 2, 2) -> id 0
    assert plan.entries[4].add_influencer == 0


def test_flip_is_deterministic_and_applies():
    g = wheel_graph()
    targets = [2, 7, 11]
    budgets = Budgets.for_targets(len(targets))
    p1 = flip_attack(g, targets, budgets)
    p2 = flip_attack(g, targets, budgets)
    assert p1.entries == p2.entries
    applied = apply_plan(g, p1, budgets)
    edge_edits, text_edits, _ = edit_counts(g, applied.graph)
    assert edge_edits == 2 * len(targets)
    assert text_edits == 0
