"""Tokenization, TF-IDF features and text drift measurement.

The featurizer is deliberately simple and fully pinned down so that feature
vectors are reproducible across runs and machines: lowercase alphanumeric
tokens, a document-frequency-capped vocabulary frozen on the clean corpus,
and smoothed-idf-weighted raw term counts with no length normalization.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInputError, ParseError, ShapeError
from .graph import TextAttributedGraph

_TOKEN_RE = re.compile(r"[0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercased maximal alphanumeric runs, in order of appearance."""
    return _TOKEN_RE.findall(text.lower())


def token_edit_distance(old: str, new: str) -> int:
    """Size of the symmetric difference between the two token *sets*.

    Duplicates and word order are free; only adding or removing distinct
    tokens costs budget.
    """
    return len(set(tokenize(old)).symmetric_difference(tokenize(new)))


@dataclass(frozen=True)
class Vocabulary:
    """Term -> column index, plus the document frequencies behind the idf."""

    index: dict[str, int]
    document_frequency: dict[str, int]
    document_count: int
    max_size: int

    @classmethod
    def from_texts(cls, texts: Iterable[str], max_size: int = 2000) -> "Vocabulary":
        texts = list(texts)
        if not texts:
            raise DegenerateInputError("cannot build a vocabulary from an empty corpus")
        if max_size < 1:
            raise DegenerateInputError("vocabulary max_size must be >= 1")
        df: dict[str, int] = {}
        for text in texts:
            for term in set(tokenize(text)):
                df[term] = df.get(term, 0) + 1
        if not df:
            raise DegenerateInputError("corpus contains no alphanumeric tokens")
        # Most frequent first; ties broken lexicographically so the cut is stable.
        ranked = sorted(df, key=lambda t: (-df[t], t))[:max_size]
        index = {term: i for i, term in enumerate(ranked)}
        return cls(
            index=index,
            document_frequency={t: df[t] for t in ranked},
            document_count=len(texts),
            max_size=max_size,
        )

    def __len__(self) -> int:
        return len(self.index)

    def idf(self, term: str) -> float:
        df = self.document_frequency[term]
        return math.log((1 + self.document_count) / (1 + df)) + 1.0

    def idf_vector(self) -> np.ndarray:
        out = np.empty(len(self.index))
        for term, i in self.index.items():
            out[i] = self.idf(term)
        return out


def build_vocabulary(graph: TextAttributedGraph, max_size: int = 2000) -> Vocabulary:
    return Vocabulary.from_texts(graph.texts, max_size=max_size)


def featurize(
    texts: Sequence[str], vocab: Vocabulary, normalize: bool = False
) -> np.ndarray:
    """Dense (n, |V|) TF-IDF matrix: raw term count times smoothed idf.

    Terms outside the vocabulary are dropped; texts with no known terms get a
    zero row. With normalize=True rows are scaled to unit L2 norm (zero rows
    stay zero).
    """
    idf = vocab.idf_vector()
    out = np.zeros((len(texts), len(vocab)))
    for row, text in enumerate(texts):
        for term in tokenize(text):
            col = vocab.index.get(term)
            if col is not None:
                out[row, col] += 1.0
    out *= idf
    if normalize:
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        np.divide(out, norms, out=out, where=norms > 0)
    return out


def text_drift(x_old: np.ndarray, x_new: np.ndarray) -> float:
    """L2 distance between two feature vectors of equal dimension."""
    x_old = np.asarray(x_old, dtype=float)
    x_new = np.asarray(x_new, dtype=float)
    if x_old.shape != x_new.shape:
        raise ShapeError(f"feature shapes differ: {x_old.shape} vs {x_new.shape}")
    return float(np.linalg.norm(x_new - x_old))


def estimate_lipschitz(
    clean_texts: Sequence[str],
    perturbed_texts: Sequence[str],
    vocab: Vocabulary,
) -> float:
    """Max observed feature drift per token edit over the changed pairs."""
    if len(clean_texts) != len(perturbed_texts):
        raise ShapeError(
            f"text lists differ in length: {len(clean_texts)} vs {len(perturbed_texts)}"
        )
    changed = [
        (a, b) for a, b in zip(clean_texts, perturbed_texts) if a != b
    ]
    changed = [(a, b) for a, b in changed if token_edit_distance(a, b) > 0]
    if not changed:
        raise DegenerateInputError("no text pair differs; nothing to estimate")
    best = 0.0
    for old, new in changed:
        xa = featurize([old], vocab)[0]
        xb = featurize([new], vocab)[0]
        best = max(best, text_drift(xa, xb) / token_edit_distance(old, new))
    return best


def save_embeddings(vectors: np.ndarray, path: str | Path) -> None:
    """One {"id", "vec"} object per node per line."""
    vectors = np.asarray(vectors, dtype=float)
    with Path(path).open("w") as fh:
        for i, row in enumerate(vectors):
            rec = {"id": i, "vec": [float(x) for x in row]}
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")


def load_embeddings(path: str | Path, node_count: int | None = None) -> np.ndarray:
    """Read an embedding JSONL back into a dense (n, d) array."""
    p = Path(path)
    rows: dict[int, list[float]] = {}
    dim: int | None = None
    with p.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                node_id = int(rec["id"])
                vec = [float(x) for x in rec["vec"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad embedding record: {exc}", str(p), lineno) from exc
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ParseError(
                    f"embedding dimension {len(vec)} != {dim}", str(p), lineno
                )
            if node_id in rows:
                raise ParseError(f"duplicate embedding id {node_id}", str(p), lineno)
            rows[node_id] = vec
    if not rows:
        raise ParseError("embedding file is empty", str(p), 0)
    n = len(rows)
    if sorted(rows) != list(range(n)):
        raise ParseError("embedding ids are not dense in [0, n)", str(p), 0)
    if node_count is not None and n != node_count:
        raise ShapeError(f"embedding file has {n} rows for {node_count} nodes")
    return np.array([rows[i] for i in range(n)], dtype=float)
