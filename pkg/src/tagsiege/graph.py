"""Text-attributed graph data model, validation and disk formats.

Graphs are undirected, simple (no self-loops, no multi-edges) and immutable
after construction; every node carries a text, a class label and a split tag.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable

from .errors import GraphValidationError, ParseError

Edge = tuple[int, int]

SPLITS = ("train", "val", "test")


def canonical_edge(u: int, v: int) -> Edge:
    """Unordered pair stored as (min, max); self-loops are rejected."""
    if u == v:
        raise GraphValidationError(f"self-loop at node {u}")
    return (u, v) if u < v else (v, u)


def canonicalize_edges(pairs: Iterable[tuple[int, int]]) -> frozenset[Edge]:
    """Deduplicate and canonicalize an edge list."""
    return frozenset(canonical_edge(u, v) for u, v in pairs)


@dataclass(frozen=True)
class TextAttributedGraph:
    node_count: int
    edges: frozenset[Edge]
    texts: tuple[str, ...]
    labels: tuple[int, ...]
    splits: tuple[str, ...]
    class_count: int

    def __post_init__(self):
        n = self.node_count
        if n <= 0:
            raise GraphValidationError("graph needs at least one node")
        for name, seq in (("texts", self.texts), ("labels", self.labels), ("splits", self.splits)):
            if len(seq) != n:
                raise GraphValidationError(f"{name} has {len(seq)} entries for {n} nodes")
        if self.class_count < 1:
            raise GraphValidationError("class_count must be >= 1")
        for i, text in enumerate(self.texts):
            if not text:
                raise GraphValidationError(f"node {i} has empty text")
        for i, label in enumerate(self.labels):
            if not 0 <= label < self.class_count:
                raise GraphValidationError(
                    f"node {i} label {label} outside [0, {self.class_count})"
                )
        for i, split in enumerate(self.splits):
            if split not in SPLITS:
                raise GraphValidationError(f"node {i} split {split!r} not in {SPLITS}")
        for u, v in self.edges:
            if u == v:
                raise GraphValidationError(f"self-loop at node {u}")
            if not (u < v):
                raise GraphValidationError(f"edge ({u}, {v}) not in canonical (min, max) order")
            if v >= n or u < 0:
                raise GraphValidationError(f"edge ({u}, {v}) references a missing node")

    @classmethod
    def build(
        cls,
        texts: Iterable[str],
        labels: Iterable[int],
        splits: Iterable[str],
        edges: Iterable[tuple[int, int]],
        class_count: int | None = None,
    ) -> "TextAttributedGraph":
        """Construct from raw sequences; edges are canonicalized and deduplicated."""
        texts = tuple(texts)
        labels = tuple(int(x) for x in labels)
        splits = tuple(splits)
        if class_count is None:
            class_count = max(labels, default=-1) + 1
        return cls(
            node_count=len(texts),
            edges=canonicalize_edges(edges),
            texts=texts,
            labels=labels,
            splits=splits,
            class_count=class_count,
        )

    @cached_property
    def adjacency(self) -> dict[int, tuple[int, ...]]:
        """Sorted neighbor tuple per node (empty tuple for isolated nodes)."""
        nbrs: dict[int, list[int]] = {i: [] for i in range(self.node_count)}
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return {i: tuple(sorted(vs)) for i, vs in nbrs.items()}

    def neighbors(self, node: int) -> tuple[int, ...]:
        return self.adjacency[node]

    def degree(self, node: int) -> int:
        return len(self.adjacency[node])

    def has_edge(self, u: int, v: int) -> bool:
        return canonical_edge(u, v) in self.edges

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def split_nodes(self, split: str) -> tuple[int, ...]:
        if split not in SPLITS:
            raise GraphValidationError(f"unknown split {split!r}")
        return tuple(i for i, s in enumerate(self.splits) if s == split)

    def with_changes(self, *, edges=None, texts=None) -> "TextAttributedGraph":
        """Fresh graph sharing everything except the given fields."""
        kwargs = {}
        if edges is not None:
            kwargs["edges"] = frozenset(edges)
        if texts is not None:
            kwargs["texts"] = tuple(texts)
        return replace(self, **kwargs)

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)


NODE_FILE = "nodes.jsonl"
EDGE_FILE_CSV = "edges.csv"
EDGE_FILE_JSONL = "edges.jsonl"


def _parse_node_line(raw: str, path: str, lineno: int) -> dict:
    try:
        rec = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path, lineno) from exc
    if not isinstance(rec, dict):
        raise ParseError("node record is not an object", path, lineno)
    for key in ("id", "text", "label", "split"):
        if key not in rec:
            raise ParseError(f"node record missing {key!r}", path, lineno)
    return rec


def _read_edge_file(path: Path) -> list[tuple[int, int]]:
    pairs: list[tuple[int, int]] = []
    if path.suffix == ".jsonl":
        with path.open() as fh:
            for lineno, raw in enumerate(fh, start=1):
                if not raw.strip():
                    continue
                try:
                    rec = json.loads(raw)
                    pairs.append((int(rec["src"]), int(rec["dst"])))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ParseError(f"bad edge record: {exc}", str(path), lineno) from exc
        return pairs
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if lineno == 1 and not row[0].strip().lstrip("-").isdigit():
                continue  # header row
            if len(row) < 2:
                raise ParseError("edge row needs two columns", str(path), lineno)
            try:
                pairs.append((int(row[0]), int(row[1])))
            except ValueError as exc:
                raise ParseError(f"non-integer edge endpoint: {exc}", str(path), lineno) from exc
    return pairs


def load_graph(path: str | Path) -> TextAttributedGraph:
    """Load a dataset directory holding nodes.jsonl plus edges.csv or edges.jsonl."""
    root = Path(path)
    node_path = root / NODE_FILE
    if not node_path.exists():
        raise ParseError(f"missing {NODE_FILE} under {root}", str(root), 0)

    records: dict[int, dict] = {}
    with node_path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            rec = _parse_node_line(raw, str(node_path), lineno)
            try:
                node_id = int(rec["id"])
            except (TypeError, ValueError) as exc:
                raise ParseError("node id is not an integer", str(node_path), lineno) from exc
            if node_id in records:
                raise ParseError(f"duplicate node id {node_id}", str(node_path), lineno)
            records[node_id] = rec
    if not records:
        raise ParseError("node file is empty", str(node_path), 0)
    n = len(records)
    if sorted(records) != list(range(n)):
        raise GraphValidationError("node ids are not dense in [0, node_count)")

    edge_path = root / EDGE_FILE_CSV
    if not edge_path.exists():
        edge_path = root / EDGE_FILE_JSONL
    if not edge_path.exists():
        raise ParseError(f"missing {EDGE_FILE_CSV} or {EDGE_FILE_JSONL} under {root}", str(root), 0)
    pairs = _read_edge_file(edge_path)
    for u, v in pairs:
        if not (0 <= u < n and 0 <= v < n):
            raise GraphValidationError(f"edge ({u}, {v}) references a missing node")

    ordered = [records[i] for i in range(n)]
    return TextAttributedGraph.build(
        texts=(str(r["text"]) for r in ordered),
        labels=(int(r["label"]) for r in ordered),
        splits=(str(r["split"]) for r in ordered),
        edges=pairs,
    )


def save_graph(graph: TextAttributedGraph, path: str | Path) -> None:
    """Write the dataset directory (nodes.jsonl + edges.csv) with deterministic bytes."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    with (root / NODE_FILE).open("w") as fh:
        for i in range(graph.node_count):
            rec = {
                "id": i,
                "text": graph.texts[i],
                "label": graph.labels[i],
                "split": graph.splits[i],
            }
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")
    with (root / EDGE_FILE_CSV).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst"])
        for u, v in graph.sorted_edges():
            writer.writerow([u, v])
