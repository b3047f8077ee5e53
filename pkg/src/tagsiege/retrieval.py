"""Influencer retrieval: most-dissimilar nodes in embedding space.

For each target we keep the K nodes whose embeddings have the largest cosine
dissimilarity to the target's — the candidates most likely to drag the target
across a decision boundary when wired in.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateVectorWarning, ParseError, ShapeError

DEFAULT_K = 5


def cosine_dissimilarity(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cos(a, b), in [0, 2]. Zero-norm inputs fall back to 1.0 (orthogonal)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"vector shapes differ: {a.shape} vs {b.shape}")
    # scale by the largest component first so squaring cannot under/overflow
    sa = np.max(np.abs(a), initial=0.0)
    sb = np.max(np.abs(b), initial=0.0)
    if sa == 0.0 or sb == 0.0:
        warnings.warn(
            "cosine against a zero vector; treating as orthogonal",
            DegenerateVectorWarning,
            stacklevel=2,
        )
        return 1.0
    a = a / sa
    b = b / sb
    return float(1.0 - np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def _dissimilarity_row(embeddings: np.ndarray, target: int) -> np.ndarray:
    """Cosine dissimilarity of every node to the target, vectorized."""
    scales = np.max(np.abs(embeddings), axis=1)
    if np.any(scales == 0.0):
        # rare path: fall back to the scalar helper so zero vectors warn once each
        return np.array([
            0.0 if i == target else
            cosine_dissimilarity(embeddings[target], embeddings[i])
            for i in range(embeddings.shape[0])
        ])
    scaled = embeddings / scales[:, None]
    norms = np.linalg.norm(scaled, axis=1)
    t = scaled[target]
    return 1.0 - (scaled @ t) / (norms * norms[target])


@dataclass(frozen=True)
class InfluencerSet:
    target: int
    candidates: tuple[int, ...]  # most dissimilar first


def retrieve_influencers(
    embeddings: np.ndarray, target: int, k: int = DEFAULT_K
) -> InfluencerSet:
    """Top-k most-dissimilar nodes to the target, ties broken by lower id."""
    embeddings = np.asarray(embeddings, dtype=float)
    n = embeddings.shape[0]
    if not 0 <= target < n:
        raise ShapeError(f"target {target} outside embedding rows [0, {n})")
    if k < 1:
        raise ShapeError("k must be >= 1")
    dissim = _dissimilarity_row(embeddings, target)
    ids = np.arange(n)
    # lexsort: last key is primary -> sort by -dissim, then id ascending
    order = np.lexsort((ids, -dissim))
    ranked = [int(i) for i in order if i != target]
    return InfluencerSet(target=target, candidates=tuple(ranked[: min(k, n - 1)]))


def retrieve_all(
    embeddings: np.ndarray, targets: list[int], k: int = DEFAULT_K
) -> dict[int, InfluencerSet]:
    return {t: retrieve_influencers(embeddings, t, k) for t in targets}


def save_influencers(sets: dict[int, InfluencerSet], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for target in sorted(sets):
            rec = {"target": target, "candidates": list(sets[target].candidates)}
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")


def load_influencers(path: str | Path) -> dict[int, InfluencerSet]:
    p = Path(path)
    out: dict[int, InfluencerSet] = {}
    with p.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                target = int(rec["target"])
                candidates = tuple(int(c) for c in rec["candidates"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad influencer record: {exc}", str(p), lineno) from exc
            if target in out:
                raise ParseError(f"duplicate target {target}", str(p), lineno)
            out[target] = InfluencerSet(target=target, candidates=candidates)
    return out
