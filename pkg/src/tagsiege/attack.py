"""Per-target attack orchestration.

For each target: retrieve dissimilar candidates, issue ONE topology query
(covering both the deletion and the insertion choice) and ONE text query
anchored on the chosen insertion node, then assemble a budget-respecting
plan entry. Per-target failures land in the plan's skip list; the run only
fails when nothing survives.
"""

from __future__ import annotations

import logging

import numpy as np

from .backends import (
    AttackerBackend,
    TextDecision,
    TopologyDecision,
    validate_text_decision,
    validate_topology_decision,
)
from .errors import (
    BackendError,
    BackendExhaustedError,
    ConfigurationError,
    IsolatedNodeError,
    RetrievalExhaustedError,
    TagSiegeError,
)
from .graph import TextAttributedGraph
from .plan import Budgets, PerturbationPlan, PlanEntry
from .prompts import (
    PromptTemplate,
    TextPrompt,
    TopologyPrompt,
    build_text_prompt,
    build_topology_prompt,
)
from .retrieval import DEFAULT_K, retrieve_influencers
from .seeding import substream

log = logging.getLogger("tagsiege.attack")


def select_deletion(
    backend: AttackerBackend,
    prompt: TopologyPrompt,
    neighbor_ids: tuple[int, ...],
    decision: TopologyDecision | None = None,
) -> int | None:
    """The neighbor to disconnect; reuses `decision` instead of re-querying.

    Passing the decision from a prior select_insertion call keeps the run at
    one topology query per target.
    """
    if not neighbor_ids:
        raise IsolatedNodeError(f"target {prompt.target} has no neighbors")
    decision = decision or backend.topology_decision(prompt)
    reason = validate_topology_decision(prompt, decision.delete_choice, decision.add_choice)
    if reason:
        raise BackendError(f"target {prompt.target}: {reason}")
    return decision.delete_choice


def select_insertion(
    backend: AttackerBackend,
    prompt: TopologyPrompt,
    candidate_ids: tuple[int, ...],
    decision: TopologyDecision | None = None,
) -> int:
    """The candidate to wire in; reuses `decision` instead of re-querying."""
    if not candidate_ids:
        raise RetrievalExhaustedError(f"target {prompt.target}: no candidates")
    decision = decision or backend.topology_decision(prompt)
    reason = validate_topology_decision(prompt, decision.delete_choice, decision.add_choice)
    if reason:
        raise BackendError(f"target {prompt.target}: {reason}")
    return decision.add_choice


def generate_text_edit(
    backend: AttackerBackend,
    prompt: TextPrompt,
    original_text: str,
    influencer_text: str,
    budget: int,
    decision: TextDecision | None = None,
) -> tuple[str, str]:
    """(keyword, new_text) satisfying containment, retention and budget."""
    if not influencer_text:
        raise ConfigurationError("influencer text is empty")
    if budget < 1:
        raise ConfigurationError("text budget must allow at least one token edit")
    decision = decision or backend.text_decision(prompt, budget)
    reason = validate_text_decision(
        original_text, decision.keyword, decision.rewritten_text, budget
    )
    if reason:
        raise BackendError(f"target {prompt.target}: invalid rewrite: {reason}")
    return decision.keyword, decision.rewritten_text


def _next_best_candidate(
    prompt: TopologyPrompt, chosen: int, embeddings: np.ndarray
) -> int | None:
    """Runner-up candidate by dissimilarity, for the anchor-mismatch ablation."""
    t = prompt.target
    norms = np.linalg.norm(embeddings, axis=1)

    def similarity(c: int) -> float:
        if norms[t] == 0.0 or norms[c] == 0.0:
            return 0.0
        return float(embeddings[t] @ embeddings[c] / (norms[t] * norms[c]))

    others = [c for c in prompt.candidate_ids if c != chosen]
    if not others:
        return None
    return min(others, key=lambda c: (similarity(c), c))


def attack(
    graph: TextAttributedGraph,
    targets: list[int],
    embeddings: np.ndarray,
    backend: AttackerBackend,
    budgets: Budgets,
    templates: dict[str, PromptTemplate] | None = None,
    *,
    k: int = DEFAULT_K,
    seed: int = 0,
    anchor_mismatch: bool = False,
) -> PerturbationPlan:
    """Run the full pipeline over `targets` and return the perturbation plan.

    anchor_mismatch deliberately anchors the text rewrite on the runner-up
    candidate instead of the inserted one — the ablation that demonstrates
    why cross-modal alignment matters. Leave it off for the real attack.
    """
    templates = templates or {}
    topo_template = templates.get("topology")
    text_template = templates.get("text")
    plan = PerturbationPlan()
    embeddings = np.asarray(embeddings, dtype=float)

    for target in targets:
        if not 0 <= target < graph.node_count:
            raise ConfigurationError(f"target {target} is not a node")

    for target in sorted(set(targets)):
        queries_before = backend.query_count
        try:
            influencers = retrieve_influencers(embeddings, target, k=k)
            rng = substream(seed, f"candidates-{target}")
            isolated = graph.degree(target) == 0
            prompt = build_topology_prompt(
                graph,
                target,
                influencers,
                template=topo_template,
                rng=rng,
                allow_isolated=isolated,
            )
            decision = backend.topology_decision(prompt)
            delete_choice = (
                None
                if isolated
                else select_deletion(backend, prompt, prompt.neighbor_ids, decision=decision)
            )
            add_choice = select_insertion(
                backend, prompt, prompt.candidate_ids, decision=decision
            )

            anchor = add_choice
            if anchor_mismatch:
                runner_up = _next_best_candidate(prompt, add_choice, embeddings)
                if runner_up is not None:
                    anchor = runner_up

            text_prompt = build_text_prompt(graph, target, anchor, template=text_template)
            keyword, new_text = generate_text_edit(
                backend,
                text_prompt,
                graph.texts[target],
                graph.texts[anchor],
                budgets.text_token_budget,
            )

            intended = graph.labels[add_choice]
            if intended == graph.labels[target]:
                log.warning(
                    "target %d: influencer %d shares its label; anchor is a no-op",
                    target,
                    add_choice,
                )
            plan.add(
                PlanEntry(
                    target=target,
                    delete_neighbor=delete_choice,
                    add_influencer=add_choice,
                    keyword=keyword,
                    new_text=new_text,
                    rationale=decision.reasoning_summary,
                    intended_label=intended,
                )
            )
        except TagSiegeError as exc:
            # a skipped target contributes no logical queries; roll back so
            # query_count stays exactly two per completed target
            backend.query_count = queries_before
            log.warning("target %d skipped: %s", target, exc)
            plan.skip(target, str(exc))

    if targets and not plan.entries:
        raise BackendExhaustedError(
            f"all {len(set(targets))} targets failed; first reason: "
            f"{next(iter(plan.skipped.values()))}",
            plan=plan,
        )
    return plan
