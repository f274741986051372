"""Node and word embeddings via random walks and skip-gram training.

Walks follow the usefulness-weighted transition distribution with the
usual second-order bias: stepping back is reweighted by 1/p, moving to
a neighbor of the previous node keeps its weight, and moving farther
away is reweighted by 1/q.  Walks feed the same skip-gram trainer used
for word embeddings over sentence token sequences.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .graph import HeteroGraph, NodeId

logger = logging.getLogger(__name__)


class EmbeddingError(Exception):
    """Raised for unusable embedding input or a malformed embedding file."""


@dataclass
class EmbeddingTable:
    """Identifier-to-vector map with a fixed dimension."""

    dim: int
    vectors: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, key: str) -> bool:
        return key in self.vectors

    def get(self, key: str) -> np.ndarray | None:
        return self.vectors.get(key)


def save_table(table: EmbeddingTable, path) -> None:
    """Header line "count dim", then one id and its components per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table.vectors)} {table.dim}\n")
        for key in sorted(table.vectors):
            vec = table.vectors[key]
            fh.write(key + " " + " ".join(f"{v:.17g}" for v in vec) + "\n")


def load_table(path) -> EmbeddingTable:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingError("embedding file header must be 'count dim'")
        count, dim = int(header[0]), int(header[1])
        vectors: dict[str, np.ndarray] = {}
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise EmbeddingError(
                    f"embedding row for {parts[0]!r} has {len(parts) - 1} "
                    f"components, expected {dim}"
                )
            vectors[parts[0]] = np.array([float(v) for v in parts[1:]], dtype=float)
    if len(vectors) != count:
        raise EmbeddingError(
            f"embedding file header promises {count} rows, found {len(vectors)}"
        )
    return EmbeddingTable(dim=dim, vectors=vectors)


@dataclass
class WalkParams:
    walks_per_node: int = 10
    walk_length: int = 40
    return_param: float = 1.0   # p: back-step mass is divided by this
    inout_param: float = 1.0    # q: forward-step mass is divided by this

    def validate(self) -> None:
        if self.walks_per_node < 1 or self.walk_length < 1:
            raise ValueError("walk counts and lengths must be positive")
        if self.return_param <= 0 or self.inout_param <= 0:
            raise ValueError("walk bias parameters must be positive")


def _walk_rows(graph: HeteroGraph, eud):
    """Per-node successor arrays and probabilities under the usefulness."""
    operator = graph.transition_operator(eud)
    matrix = operator.matrix
    rows = []
    successor_sets = []
    for i in range(len(graph)):
        lo, hi = matrix.indptr[i], matrix.indptr[i + 1]
        cols = matrix.indices[lo:hi].astype(np.int64)
        probs = matrix.data[lo:hi].astype(float)
        rows.append((cols, probs))
        successor_sets.append(frozenset(int(c) for c in cols))
    return rows, successor_sets


def step_distribution(rows, successor_sets, prev: int | None, cur: int, p: float, q: float):
    """Next-step distribution from cur given the previously visited node.

    With p = q = 1, or on the first step, this is exactly the one-step
    transition distribution.
    """
    cols, probs = rows[cur]
    if len(cols) == 0:
        return cols, probs
    if prev is None or (p == 1.0 and q == 1.0):
        return cols, probs
    bias = np.empty(len(cols))
    prev_succ = successor_sets[prev]
    for k, c in enumerate(cols):
        if c == prev:
            bias[k] = 1.0 / p
        elif int(c) in prev_succ:
            bias[k] = 1.0
        else:
            bias[k] = 1.0 / q
    weighted = probs * bias
    return cols, weighted / weighted.sum()


def generate_walks(
    graph: HeteroGraph, eud, params: WalkParams, seed: int = 0
) -> list[list[NodeId]]:
    """Biased random walks starting from every node in canonical order.

    A walk stops early at a node with no outgoing mass, so an isolated
    node yields length-1 walks.
    """
    params.validate()
    rows, successor_sets = _walk_rows(graph, eud)
    rng = np.random.default_rng(seed)
    walks: list[list[NodeId]] = []
    p, q = params.return_param, params.inout_param
    for start in range(len(graph)):
        for _ in range(params.walks_per_node):
            path = [start]
            prev: int | None = None
            while len(path) < params.walk_length:
                cur = path[-1]
                cols, probs = step_distribution(rows, successor_sets, prev, cur, p, q)
                if len(cols) == 0:
                    break
                pick = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
                pick = min(pick, len(cols) - 1)  # cumsum may land below 1 by rounding
                prev = cur
                path.append(int(cols[pick]))
            walks.append([graph.nodes[i] for i in path])
    return walks


def negative_sampling_loss(center: np.ndarray, context: np.ndarray, negatives: np.ndarray):
    """Skip-gram negative-sampling loss and gradients for one pair.

    Returns (loss, grad_center, grad_context, grad_negatives) where the
    loss is -log sigma(context . center) - sum_k log sigma(-neg_k . center).
    """
    center = np.asarray(center, dtype=float)
    context = np.asarray(context, dtype=float)
    negatives = np.atleast_2d(np.asarray(negatives, dtype=float))
    pos_score = float(context @ center)
    neg_scores = negatives @ center
    # log sigma(x) = -log(1 + exp(-x)), stable via logaddexp
    loss = float(np.logaddexp(0.0, -pos_score) + np.logaddexp(0.0, neg_scores).sum())
    pos_sig = 1.0 / (1.0 + np.exp(-pos_score))
    neg_sig = 1.0 / (1.0 + np.exp(-neg_scores))
    grad_context = (pos_sig - 1.0) * center
    grad_negatives = neg_sig[:, None] * center[None, :]
    grad_center = (pos_sig - 1.0) * context + neg_sig @ negatives
    return loss, grad_center, grad_context, grad_negatives


@dataclass
class SkipGramParams:
    dim: int = 128
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025

    def validate(self) -> None:
        if self.dim < 1 or self.window < 1 or self.negatives < 0 or self.epochs < 1:
            raise ValueError("skip-gram sizes must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


def train_skipgram(
    sequences, params: SkipGramParams, seed: int = 0
) -> EmbeddingTable:
    """Train skip-gram with negative sampling over token sequences.

    The vocabulary is every token, sorted; the noise distribution is the
    unigram distribution raised to the 3/4 power.  The window size per
    position is drawn uniformly from 1..window.  The table returned
    holds the input-side vectors.
    """
    params.validate()
    sequences = [list(seq) for seq in sequences if seq]
    if not sequences:
        raise EmbeddingError("no non-empty sequence to train on")
    counts: dict[str, int] = {}
    for seq in sequences:
        for tok in seq:
            counts[tok] = counts.get(tok, 0) + 1
    vocab = sorted(counts)
    index = {tok: i for i, tok in enumerate(vocab)}
    freq = np.array([counts[t] for t in vocab], dtype=float)
    noise_cdf = np.cumsum(freq**0.75)
    noise_cdf /= noise_cdf[-1]

    rng = np.random.default_rng(seed)
    dim = params.dim
    w_in = (rng.random((len(vocab), dim)) - 0.5) / dim
    w_out = np.zeros((len(vocab), dim))

    encoded = [[index[t] for t in seq] for seq in sequences]
    total = params.epochs * sum(len(seq) for seq in encoded)
    base_lr = params.learning_rate
    processed = 0
    for _ in range(params.epochs):
        for seq in encoded:
            for pos, center in enumerate(seq):
                lr = base_lr * max(1e-4, 1.0 - processed / total)
                processed += 1
                span = int(rng.integers(1, params.window + 1))
                lo = max(0, pos - span)
                hi = min(len(seq), pos + span + 1)
                for ctx_pos in range(lo, hi):
                    if ctx_pos == pos:
                        continue
                    context = seq[ctx_pos]
                    draws = rng.random(params.negatives)
                    negs = np.searchsorted(noise_cdf, draws, side="right")
                    negs = np.minimum(negs, len(vocab) - 1)
                    negs = negs[negs != context]
                    _, g_center, g_context, g_negs = negative_sampling_loss(
                        w_in[center], w_out[context], w_out[negs]
                    )
                    w_out[context] -= lr * g_context
                    if len(negs):
                        # duplicate draws must both apply, hence add.at
                        np.add.at(w_out, negs, -lr * g_negs)
                    w_in[center] -= lr * g_center
    return EmbeddingTable(
        dim=dim, vectors={tok: w_in[index[tok]].copy() for tok in vocab}
    )


def embed_nodes(
    graph: HeteroGraph,
    eud,
    walk_params: WalkParams,
    sg_params: SkipGramParams,
    seed: int = 0,
) -> EmbeddingTable:
    """Walk the graph and train node vectors; keys are "kind:key" labels."""
    walks = generate_walks(graph, eud, walk_params, seed=seed)
    sequences = [[node.label() for node in walk] for walk in walks]
    table = train_skipgram(sequences, sg_params, seed=seed)
    return table
