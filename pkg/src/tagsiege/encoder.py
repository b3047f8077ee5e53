"""Surrogate graph encoder: a two-layer GCN trained with manual backprop.

The attacker owns this model outright (it never touches the victim), so it is
kept small and auditable: symmetric-normalized propagation, relu, full-batch
Adam, and a finite-difference gradient check over every weight coordinate.
Node embeddings are the penultimate (post-relu) hidden activations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ParseError, ShapeError, TrainingError
from .graph import TextAttributedGraph
from .nnops import Adam, check_finite, cross_entropy_with_grad, glorot, relu
from .seeding import substream


def normalize_adjacency(graph: TextAttributedGraph) -> sp.csr_matrix:
    """Symmetric renormalized adjacency D^{-1/2} (A + I) D^{-1/2} as CSR."""
    n = graph.node_count
    rows, cols = [], []
    for u, v in graph.edges:
        rows += [u, v]
        cols += [v, u]
    rows += list(range(n))
    cols += list(range(n))
    data = np.ones(len(rows))
    a_tilde = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    deg = np.asarray(a_tilde.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)  # deg >= 1 thanks to the self loop
    d_half = sp.diags(inv_sqrt)
    return (d_half @ a_tilde @ d_half).tocsr()


@dataclass
class EncoderConfig:
    hidden: int = 64
    learning_rate: float = 0.01
    epochs: int = 200
    weight_decay: float = 5e-4
    seed: int = 0
    embed_dim: int | None = None

    def __post_init__(self):
        if self.hidden < 1:
            raise ConfigurationError("hidden width must be >= 1")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning rate must be positive")
        if self.weight_decay < 0:
            raise ConfigurationError("weight decay must be >= 0")
        if self.embed_dim is not None and self.embed_dim != self.hidden:
            raise ConfigurationError(
                "embeddings are the hidden activations, so embed_dim must "
                f"equal hidden ({self.embed_dim} != {self.hidden})"
            )


@dataclass
class EncoderParams:
    w1: np.ndarray  # (input_dim, hidden)
    w2: np.ndarray  # (hidden, class_count)

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.w1.copy(), self.w2.copy())


@dataclass
class TrainedEncoder:
    params: EncoderParams
    config: EncoderConfig
    loss_history: list[float] = field(default_factory=list)


def forward(
    params: EncoderParams, a_hat: sp.csr_matrix, features: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Return (logits, embeddings); embeddings are the post-relu hidden layer."""
    if features.shape[1] != params.w1.shape[0]:
        raise ShapeError(
            f"feature dim {features.shape[1]} != weight fan-in {params.w1.shape[0]}"
        )
    h_pre = a_hat @ (features @ params.w1)
    h = relu(h_pre)
    logits = a_hat @ (h @ params.w2)
    return logits, h


def _loss_and_grads(
    params: EncoderParams,
    a_hat: sp.csr_matrix,
    features: np.ndarray,
    labels: np.ndarray,
    train_rows: np.ndarray,
    weight_decay: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    u = a_hat @ features           # propagate once, reuse for the W1 gradient
    h_pre = u @ params.w1
    h = relu(h_pre)
    q = a_hat @ h
    logits = q @ params.w2

    loss, dlogits = cross_entropy_with_grad(logits, labels, train_rows)
    loss += 0.5 * weight_decay * (
        float(np.sum(params.w1 ** 2)) + float(np.sum(params.w2 ** 2))
    )

    dw2 = q.T @ dlogits + weight_decay * params.w2
    dq = dlogits @ params.w2.T
    dh = a_hat @ dq                # a_hat is symmetric, so A^T == A
    dh_pre = dh * (h_pre > 0)
    dw1 = u.T @ dh_pre + weight_decay * params.w1
    return loss, dw1, dw2


def init_params(
    input_dim: int, hidden: int, class_count: int, seed: int
) -> EncoderParams:
    rng = substream(seed, "encoder-init")
    return EncoderParams(
        w1=glorot(rng, input_dim, hidden),
        w2=glorot(rng, hidden, class_count),
    )


def train_encoder(
    graph: TextAttributedGraph,
    features: np.ndarray,
    config: EncoderConfig | None = None,
) -> TrainedEncoder:
    """Fit on the train split; deterministic given the config seed."""
    config = config or EncoderConfig()
    train_rows = np.array(graph.split_nodes("train"), dtype=int)
    if train_rows.size == 0:
        raise TrainingError("graph has no train nodes")
    labels = np.array(graph.labels, dtype=int)
    a_hat = normalize_adjacency(graph)
    params = init_params(features.shape[1], config.hidden, graph.class_count, config.seed)
    opt = Adam([params.w1, params.w2], lr=config.learning_rate)
    history: list[float] = []
    for _ in range(config.epochs):
        loss, dw1, dw2 = _loss_and_grads(
            params, a_hat, features, labels, train_rows, config.weight_decay
        )
        check_finite(loss, "training loss")
        history.append(loss)
        opt.step([dw1, dw2])
    return TrainedEncoder(params=params, config=config, loss_history=history)


def encode(
    trained: TrainedEncoder, graph: TextAttributedGraph, features: np.ndarray
) -> np.ndarray:
    _, z = forward(trained.params, normalize_adjacency(graph), features)
    return z


def gradient_check(
    params: EncoderParams,
    a_hat: sp.csr_matrix,
    features: np.ndarray,
    labels: np.ndarray,
    train_rows: np.ndarray,
    weight_decay: float = 0.0,
    step: float = 1e-5,
    kink_tol: float = 1e-3,
) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Coordinates of W1 whose perturbation could flip a relu unit (some
    pre-activation within kink_tol of zero on a row the coordinate feeds)
    are skipped: the numeric difference is one-sided there and disagreement
    is expected rather than a bug.
    """
    u = a_hat @ features
    h_pre = u @ params.w1

    def loss_at(p: EncoderParams) -> float:
        val, _, _ = _loss_and_grads(p, a_hat, features, labels, train_rows, weight_decay)
        return val

    _, dw1, dw2 = _loss_and_grads(
        params, a_hat, features, labels, train_rows, weight_decay
    )
    worst = 0.0
    for which, analytic in (("w1", dw1), ("w2", dw2)):
        w = getattr(params, which)
        for a in range(w.shape[0]):
            for b in range(w.shape[1]):
                if which == "w1":
                    feeding = np.abs(u[:, a]) > 0
                    if np.any(np.abs(h_pre[feeding, b]) < kink_tol):
                        continue
                orig = w[a, b]
                w[a, b] = orig + step
                up = loss_at(params)
                w[a, b] = orig - step
                down = loss_at(params)
                w[a, b] = orig
                numeric = (up - down) / (2 * step)
                denom = max(abs(analytic[a, b]), abs(numeric), 1e-8)
                worst = max(worst, abs(analytic[a, b] - numeric) / denom)
    return worst


def save_checkpoint(trained: TrainedEncoder, path: str | Path) -> None:
    payload = {
        "kind": "gcn-encoder",
        "hidden": trained.config.hidden,
        "input_dim": trained.params.w1.shape[0],
        "class_count": trained.params.w2.shape[1],
        "seed": trained.config.seed,
        "w1": [[float(x) for x in row] for row in trained.params.w1],
        "w2": [[float(x) for x in row] for row in trained.params.w2],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")))


def load_checkpoint(path: str | Path) -> TrainedEncoder:
    p = Path(path)
    try:
        payload = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", str(p), exc.lineno) from exc
    for key in ("kind", "hidden", "w1", "w2"):
        if key not in payload:
            raise ParseError(f"checkpoint missing {key!r}", str(p), 0)
    if payload["kind"] != "gcn-encoder":
        raise ParseError(f"unexpected checkpoint kind {payload['kind']!r}", str(p), 0)
    w1 = np.array(payload["w1"], dtype=float)
    w2 = np.array(payload["w2"], dtype=float)
    if w1.ndim != 2 or w2.ndim != 2 or w1.shape[1] != w2.shape[0]:
        raise ShapeError(f"checkpoint weight shapes do not chain: {w1.shape}, {w2.shape}")
    if w1.shape[1] != payload["hidden"]:
        raise ShapeError("checkpoint hidden width disagrees with weight shape")
    config = EncoderConfig(hidden=int(payload["hidden"]), seed=int(payload.get("seed", 0)))
    return TrainedEncoder(params=EncoderParams(w1=w1, w2=w2), config=config)
