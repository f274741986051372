"""Seq2seq extractive summarizer: CNN sentences, LSTM documents,
attention-gated selection probabilities.

Every candidate sentence is encoded by width-{3,4,5} convolutions with
max-over-time pooling; each reference document runs its own LSTM over
its sentence vectors.  A sequential decoder walks the flat candidate
sequence and scores, for each position, an attention mix of four
signals: sentence salience, redundancy against what is already likely
selected, relevance to the target's own text, and relevance to the
target's graph neighborhood.  The selection probability gates a learned
combination of the sentence state and its attention context.

All gradients are hand-derived reverse-mode; the only trainable state
is the parameter dict of the model (graph-side vectors stay frozen).
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingTable
from .selection import fill_word_budget, rank_by_score

logger = logging.getLogger(__name__)

PROB_CLAMP = 1e-7
CHECKPOINT_MAGIC = b"RWSM"
CHECKPOINT_VERSION = 1


class ModelError(Exception):
    """Raised for malformed model input or an unreadable checkpoint."""


class TrainingError(Exception):
    """Raised when optimization produces a non-finite loss."""


@dataclass(frozen=True)
class AttentionConfig:
    """Switches for the four attention score terms."""

    salience: bool = True
    novelty: bool = True
    text_relevance: bool = True
    graph_relevance: bool = True

    @staticmethod
    def full() -> "AttentionConfig":
        return AttentionConfig(True, True, True, True)

    @staticmethod
    def none() -> "AttentionConfig":
        """Ablation with every score term off: attention goes uniform."""
        return AttentionConfig(False, False, False, False)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class SummarizerModel:
    """Parameter container with a fixed tensor order.

    Vocabulary row 0 is the shared unknown-token vector; known tokens
    occupy rows 1..V in the order of the word table's sorted keys.
    """

    def __init__(self, dim: int, widths, vocab: list[str], params: dict[str, np.ndarray]):
        self.dim = int(dim)
        self.widths = tuple(sorted(int(w) for w in widths))
        if not self.widths or min(self.widths) < 1:
            raise ModelError("filter widths must be positive")
        self.vocab = list(vocab)
        self.token_row = {tok: i + 1 for i, tok in enumerate(self.vocab)}
        self.params = params
        self.param_order = self._param_order(self.widths)

    @staticmethod
    def _param_order(widths) -> list[str]:
        order = ["word_embeddings"]
        for q in widths:
            order += [f"conv_kernel_{q}", f"conv_bias_{q}"]
        order += ["lstm_wx", "lstm_wh", "lstm_b"]
        order += ["attn_salience", "attn_novelty", "attn_text", "attn_graph"]
        order += ["gate_w", "gate_b"]
        return order

    @classmethod
    def initialize(
        cls,
        dim: int,
        word_table: EmbeddingTable,
        widths=(3, 4, 5),
        seed: int = 0,
        init_scale: float = 0.1,
    ) -> "SummarizerModel":
        if word_table.dim != dim:
            raise ModelError(
                f"word table dimension {word_table.dim} does not match model dimension {dim}"
            )
        rng = np.random.default_rng(seed)
        vocab = sorted(word_table.vectors)
        d = dim

        def uniform(shape):
            return rng.uniform(-init_scale, init_scale, size=shape)

        embeddings = np.empty((len(vocab) + 1, d))
        embeddings[0] = uniform(d)  # unknown-token row, trained like the rest
        for i, tok in enumerate(vocab):
            embeddings[i + 1] = word_table.vectors[tok]

        params: dict[str, np.ndarray] = {"word_embeddings": embeddings}
        for q in sorted(widths):
            params[f"conv_kernel_{q}"] = uniform((d, q * d))
            params[f"conv_bias_{q}"] = uniform(d)
        params["lstm_wx"] = uniform((4 * d, d))
        params["lstm_wh"] = uniform((4 * d, d))
        bias = np.zeros(4 * d)
        bias[d : 2 * d] = 1.0  # open forget gates early in training
        params["lstm_b"] = bias
        for name in ("attn_salience", "attn_novelty", "attn_text", "attn_graph"):
            params[name] = uniform((d, d))
        params["gate_w"] = uniform(2 * d)
        params["gate_b"] = uniform(1)
        return cls(dim, widths, vocab, params)

    def token_rows(self, tokens) -> np.ndarray:
        return np.array([self.token_row.get(t, 0) for t in tokens], dtype=np.int64)

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(self.params[name]) for name in self.param_order}


@dataclass
class TargetInstance:
    """One training or inference example: a target and its candidates.

    docs lists (reference id, sentences) in reference order; sentences
    are token tuples.  graph_target and graph_docs hold the frozen
    graph-embedding vectors of the target and of each flat candidate's
    source paper.
    """

    target_id: str
    docs: tuple[tuple[str, tuple[tuple[str, ...], ...]], ...]
    target_sentences: tuple[tuple[str, ...], ...]
    graph_target: np.ndarray
    graph_docs: np.ndarray
    labels: tuple[int, ...] | None = None

    def flat_sentences(self) -> list[tuple[str, ...]]:
        return [s for _, sentences in self.docs for s in sentences]

    def doc_spans(self) -> list[tuple[int, int]]:
        spans, start = [], 0
        for _, sentences in self.docs:
            spans.append((start, start + len(sentences)))
            start += len(sentences)
        return spans

    def token_counts(self) -> list[int]:
        return [len(s) for s in self.flat_sentences()]


def build_instance(
    seq,
    target_sentences,
    node_table: EmbeddingTable,
    labels=None,
) -> TargetInstance:
    """Assemble a TargetInstance from a labeled candidate sequence.

    seq is a corpus.LabeledSequence; target_sentences are the target
    paper's own accepted sentences (token tuples).  Graph vectors come
    from node_table under "paper:<id>" keys; a missing paper falls back
    to the zero vector with a warning.
    """
    dim = node_table.dim

    def paper_vector(paper_id: str) -> np.ndarray:
        vec = node_table.get(f"paper:{paper_id}")
        if vec is None:
            logger.warning("no graph vector for paper %s; using zeros", paper_id)
            return np.zeros(dim)
        return vec

    docs = []
    graph_docs = []
    for doc_id, start, end in seq.boundaries:
        sentences = tuple(s.tokens for s in seq.sentences[start:end])
        docs.append((doc_id, sentences))
        vec = paper_vector(doc_id)
        graph_docs.extend([vec] * len(sentences))
    if labels is None:
        labels = seq.labels
    return TargetInstance(
        target_id=seq.target_id,
        docs=tuple(docs),
        target_sentences=tuple(tuple(s) for s in target_sentences),
        graph_target=paper_vector(seq.target_id),
        graph_docs=np.array(graph_docs, dtype=float),
        labels=None if labels is None else tuple(labels),
    )


@dataclass
class EncodedTarget:
    """Everything the decoder needs, with optional padded tail rows."""

    hidden: np.ndarray       # (m, d) sentence states
    text_query: np.ndarray   # (d,) target text vector
    graph_query: np.ndarray  # (d,) target graph vector
    graph_docs: np.ndarray   # (m, d) per-candidate source-paper graph vectors
    valid: np.ndarray        # (m,) bool, False on padding
    token_counts: np.ndarray # (m,) int, 0 on padding


# ---------------------------------------------------------------------------
# Sentence encoder


def conv_feature_maps(kernel: np.ndarray, bias: np.ndarray, token_rows: np.ndarray) -> np.ndarray:
    """Feature maps of one filter bank over a sentence.

    token_rows is (p, d); a kernel of width q sees p - q + 1 windows and
    the result is (p - q + 1, d) of tanh features.
    """
    d = token_rows.shape[1]
    q = kernel.shape[1] // d
    windows = _windows(token_rows, q)
    return np.tanh(windows @ kernel.T + bias)


def _windows(X: np.ndarray, q: int) -> np.ndarray:
    p, d = X.shape
    if p < q:
        raise ModelError(f"sentence of {p} tokens is shorter than filter width {q}")
    n = p - q + 1
    return np.stack([X[i : i + q].reshape(q * d) for i in range(n)])


def _sentence_forward(model: SummarizerModel, tokens):
    rows = model.token_rows(tokens)
    X = model.params["word_embeddings"][rows]
    pooled_sum = np.zeros(model.dim)
    per_width = {}
    for q in model.widths:
        windows = _windows(X, q)
        G = np.tanh(
            windows @ model.params[f"conv_kernel_{q}"].T + model.params[f"conv_bias_{q}"]
        )
        argmax = G.argmax(axis=0)
        pooled_sum += G[argmax, np.arange(model.dim)]
        per_width[q] = (windows, G, argmax)
    emb = pooled_sum / len(model.widths)
    return emb, (rows, per_width)


def encode_sentence(model: SummarizerModel, tokens) -> np.ndarray:
    """CNN embedding of one token sequence: pooled maps averaged over widths."""
    emb, _ = _sentence_forward(model, tokens)
    return emb


def _sentence_backward(model, cache, g_emb, grads, gE_rows):
    rows, per_width = cache
    d = model.dim
    gX = np.zeros((len(rows), d))
    share = g_emb / len(model.widths)
    for q, (windows, G, argmax) in per_width.items():
        n = G.shape[0]
        gG = np.zeros_like(G)
        gG[argmax, np.arange(d)] = share
        gpre = gG * (1.0 - G * G)
        grads[f"conv_kernel_{q}"] += gpre.T @ windows
        grads[f"conv_bias_{q}"] += gpre.sum(axis=0)
        gwin = (gpre @ model.params[f"conv_kernel_{q}"]).reshape(n, q, d)
        for offset in range(q):
            gX[offset : offset + n] += gwin[:, offset, :]
    gE_rows.append((rows, gX))


# ---------------------------------------------------------------------------
# Document encoder


def _lstm_forward(model: SummarizerModel, X: np.ndarray):
    d = model.dim
    Wx, Wh, b = model.params["lstm_wx"], model.params["lstm_wh"], model.params["lstm_b"]
    T = X.shape[0]
    H = np.zeros((T, d))
    I = np.zeros((T, d)); F = np.zeros((T, d)); O = np.zeros((T, d)); G = np.zeros((T, d))
    C = np.zeros((T, d)); TC = np.zeros((T, d))
    h = np.zeros(d)
    c = np.zeros(d)
    for t in range(T):
        z = Wx @ X[t] + Wh @ h + b
        I[t] = _sigmoid(z[:d])
        F[t] = _sigmoid(z[d : 2 * d])
        O[t] = _sigmoid(z[2 * d : 3 * d])
        G[t] = np.tanh(z[3 * d :])
        c = F[t] * c + I[t] * G[t]
        C[t] = c
        TC[t] = np.tanh(c)
        h = O[t] * TC[t]
        H[t] = h
    return H, (X, H, I, F, O, G, C, TC)


def encode_document(model: SummarizerModel, sentence_vectors: np.ndarray) -> np.ndarray:
    """Hidden state per sentence from a zero-initialized single-layer LSTM."""
    H, _ = _lstm_forward(model, np.asarray(sentence_vectors, dtype=float))
    return H


def _lstm_backward(model, cache, gH, grads):
    X, H, I, F, O, G, C, TC = cache
    d = model.dim
    T = X.shape[0]
    Wx, Wh = model.params["lstm_wx"], model.params["lstm_wh"]
    gX = np.zeros_like(X)
    gh_rec = np.zeros(d)
    gc_rec = np.zeros(d)
    for t in range(T - 1, -1, -1):
        gh = gH[t] + gh_rec
        go = gh * TC[t]
        gc = gc_rec + gh * O[t] * (1.0 - TC[t] * TC[t])
        c_prev = C[t - 1] if t > 0 else np.zeros(d)
        h_prev = H[t - 1] if t > 0 else np.zeros(d)
        gi = gc * G[t]
        gg = gc * I[t]
        gf = gc * c_prev
        gc_rec = gc * F[t]
        gz = np.concatenate(
            [
                gi * I[t] * (1.0 - I[t]),
                gf * F[t] * (1.0 - F[t]),
                go * O[t] * (1.0 - O[t]),
                gg * (1.0 - G[t] * G[t]),
            ]
        )
        grads["lstm_wx"] += np.outer(gz, X[t])
        grads["lstm_wh"] += np.outer(gz, h_prev)
        grads["lstm_b"] += gz
        gX[t] = Wx.T @ gz
        gh_rec = Wh.T @ gz
    return gX


# ---------------------------------------------------------------------------
# Target encoding


def _encode_target_full(model: SummarizerModel, inst: TargetInstance):
    """Forward pass up to the decoder, keeping every cache for backprop."""
    flat = inst.flat_sentences()
    if not flat:
        raise ModelError(f"target {inst.target_id!r} has no candidate sentence")
    if inst.graph_docs.shape != (len(flat), model.dim):
        raise ModelError(
            f"graph vectors of target {inst.target_id!r} do not match "
            f"{len(flat)} sentences of dimension {model.dim}"
        )
    if inst.graph_target.shape != (model.dim,):
        raise ModelError("target graph vector dimension mismatch")

    sent_caches = []
    sent_vecs = np.zeros((len(flat), model.dim))
    for k, tokens in enumerate(flat):
        emb, cache = _sentence_forward(model, tokens)
        sent_vecs[k] = emb
        sent_caches.append(cache)

    spans = inst.doc_spans()
    H = np.zeros_like(sent_vecs)
    doc_caches = []
    for start, end in spans:
        H_doc, cache = _lstm_forward(model, sent_vecs[start:end])
        H[start:end] = H_doc
        doc_caches.append(cache)

    target_caches = []
    if inst.target_sentences:
        t_vecs = np.zeros((len(inst.target_sentences), model.dim))
        for k, tokens in enumerate(inst.target_sentences):
            emb, cache = _sentence_forward(model, tokens)
            t_vecs[k] = emb
            target_caches.append(cache)
        Ht, t_lstm_cache = _lstm_forward(model, t_vecs)
        phi = Ht.mean(axis=0)
    else:
        logger.warning(
            "target %s has no accepted sentence of its own; text query is zero",
            inst.target_id,
        )
        Ht, t_lstm_cache = None, None
        phi = np.zeros(model.dim)

    enc = EncodedTarget(
        hidden=H,
        text_query=phi,
        graph_query=np.asarray(inst.graph_target, dtype=float),
        graph_docs=np.asarray(inst.graph_docs, dtype=float),
        valid=np.ones(len(flat), dtype=bool),
        token_counts=np.array(inst.token_counts(), dtype=np.int64),
    )
    caches = {
        "sentences": sent_caches,
        "docs": doc_caches,
        "spans": spans,
        "target_sentences": target_caches,
        "target_lstm": t_lstm_cache,
    }
    return enc, caches


def encode_target(
    model: SummarizerModel, inst: TargetInstance, pad_to: int | None = None
) -> EncodedTarget:
    """Encode candidates and target; optionally pad with inert tail rows."""
    enc, _ = _encode_target_full(model, inst)
    if pad_to is not None and pad_to > enc.hidden.shape[0]:
        extra = pad_to - enc.hidden.shape[0]
        enc = EncodedTarget(
            hidden=np.vstack([enc.hidden, np.zeros((extra, model.dim))]),
            text_query=enc.text_query,
            graph_query=enc.graph_query,
            graph_docs=np.vstack([enc.graph_docs, np.zeros((extra, model.dim))]),
            valid=np.concatenate([enc.valid, np.zeros(extra, dtype=bool)]),
            token_counts=np.concatenate(
                [enc.token_counts, np.zeros(extra, dtype=np.int64)]
            ),
        )
    return enc


# ---------------------------------------------------------------------------
# Decoder


def _attention_terms(model, cfg, enc, valid_idx):
    """Per-candidate score pieces that do not depend on the decode step."""
    Hv = enc.hidden[valid_idx]
    static = np.zeros(len(valid_idx))
    if cfg.text_relevance:
        static = static + Hv @ (model.params["attn_text"].T @ enc.text_query)
    if cfg.graph_relevance:
        static = static + enc.graph_docs[valid_idx] @ (
            model.params["attn_graph"].T @ enc.graph_query
        )
    return Hv, static


def _softmax(e: np.ndarray) -> np.ndarray:
    shifted = e - e.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def attention_scores(
    model: SummarizerModel,
    cfg: AttentionConfig,
    enc: EncodedTarget,
    j: int,
    dynamic: np.ndarray,
) -> np.ndarray:
    """Attention weights of decode step j over the whole sequence.

    dynamic is the probability-weighted sum of the states before j
    (zero at the first step).  Invalid positions get weight zero; the
    rest is a softmax, so the weights sum to one.
    """
    if not enc.valid[j]:
        raise ModelError(f"cannot attend from masked position {j}")
    valid_idx = np.flatnonzero(enc.valid)
    Hv, static = _attention_terms(model, cfg, enc, valid_idx)
    e = static.copy()
    if cfg.salience:
        e += Hv @ (model.params["attn_salience"].T @ enc.hidden[j])
    if cfg.novelty:
        e -= Hv @ (model.params["attn_novelty"].T @ np.asarray(dynamic, dtype=float))
    weights = np.zeros(enc.hidden.shape[0])
    weights[valid_idx] = _softmax(e)
    return weights


def _decode(model, cfg, enc):
    """Sequential pass over valid positions; returns probabilities and caches."""
    valid_idx = np.flatnonzero(enc.valid)
    if len(valid_idx) == 0:
        raise ModelError("no valid candidate to decode")
    Hv, static = _attention_terms(model, cfg, enc, valid_idx)
    d = model.dim
    w, b = model.params["gate_w"], model.params["gate_b"]
    probs = np.zeros(enc.hidden.shape[0])
    dynamic = np.zeros(d)
    steps = []
    for j in valid_idx:
        h_j = enc.hidden[j]
        e = static.copy()
        if cfg.salience:
            e += Hv @ (model.params["attn_salience"].T @ h_j)
        if cfg.novelty:
            e -= Hv @ (model.params["attn_novelty"].T @ dynamic)
        a = _softmax(e)
        hbar = a @ Hv
        z = float(w[:d] @ h_j + w[d:] @ hbar + b[0])
        p = float(_sigmoid(z))
        steps.append({"j": int(j), "dynamic": dynamic.copy(), "a": a, "hbar": hbar, "p": p})
        probs[j] = p
        dynamic = dynamic + p * h_j
    return probs, {"valid_idx": valid_idx, "Hv": Hv, "steps": steps}


def decode_sequence(model: SummarizerModel, cfg: AttentionConfig, enc: EncodedTarget) -> np.ndarray:
    """Selection probability per position; zero on masked padding."""
    probs, _ = _decode(model, cfg, enc)
    return probs


def loss(probabilities, labels, valid) -> float:
    """Summed negative log-likelihood of the labels over valid positions.

    Probabilities are clamped away from 0 and 1 so a supremely confident
    wrong prediction stays finite.
    """
    probabilities = np.asarray(probabilities, dtype=float)
    labels = np.asarray(labels, dtype=float)
    valid = np.asarray(valid, dtype=bool)
    p = np.clip(probabilities[valid], PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = labels[valid]
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum())


# ---------------------------------------------------------------------------
# Backward pass


def compute_gradients(model: SummarizerModel, cfg: AttentionConfig, inst: TargetInstance):
    """Loss, probabilities and parameter gradients for one target.

    The returned gradient dict covers every trainable tensor; tensors a
    disabled attention term would use get zero gradient.
    """
    if inst.labels is None:
        raise ModelError(f"target {inst.target_id!r} has no labels to train on")
    enc, caches = _encode_target_full(model, inst)
    probs, dec = _decode(model, cfg, enc)
    labels = np.asarray(inst.labels, dtype=float)
    if labels.shape != probs.shape:
        raise ModelError(
            f"target {inst.target_id!r}: {len(labels)} labels for {len(probs)} sentences"
        )
    loss_value = loss(probs, labels, enc.valid)

    grads = model.zero_grads()
    d = model.dim
    valid_idx = dec["valid_idx"]
    Hv = dec["Hv"]
    steps = dec["steps"]
    w = model.params["gate_w"]
    W_s = model.params["attn_salience"]
    W_n = model.params["attn_novelty"]
    W_t = model.params["attn_text"]
    Psi_v = enc.graph_docs[valid_idx]

    gH = np.zeros_like(enc.hidden)
    gphi = np.zeros(d)
    gp = np.zeros(len(probs))
    # Loss term: with the clamp inactive this is (p - y) / (p (1 - p));
    # inside the clamped tails the loss is locally constant in p.
    for j in valid_idx:
        p = probs[j]
        if PROB_CLAMP < p < 1.0 - PROB_CLAMP:
            gp[j] = (p - labels[j]) / (p * (1.0 - p))

    for rank in range(len(steps) - 1, -1, -1):
        step = steps[rank]
        j = step["j"]
        a, hbar, p, dynamic = step["a"], step["hbar"], step["p"], step["dynamic"]
        h_j = enc.hidden[j]

        gz = gp[j] * p * (1.0 - p)
        grads["gate_w"][:d] += gz * h_j
        grads["gate_w"][d:] += gz * hbar
        grads["gate_b"][0] += gz
        gH[j] += gz * w[:d]
        ghbar = gz * w[d:]

        ga = Hv @ ghbar
        ge = a * (ga - float(a @ ga))
        geH = ge @ Hv
        gH[valid_idx] += np.outer(a, ghbar)
        if cfg.salience:
            grads["attn_salience"] += np.outer(h_j, geH)
            gH[j] += W_s @ geH
            gH[valid_idx] += np.outer(ge, W_s.T @ h_j)
        if cfg.novelty:
            grads["attn_novelty"] -= np.outer(dynamic, geH)
            gdyn = -(W_n @ geH)
            gH[valid_idx] -= np.outer(ge, W_n.T @ dynamic)
        else:
            gdyn = None
        if cfg.text_relevance:
            grads["attn_text"] += np.outer(enc.text_query, geH)
            gphi += W_t @ geH
            gH[valid_idx] += np.outer(ge, W_t.T @ enc.text_query)
        if cfg.graph_relevance:
            grads["attn_graph"] += np.outer(enc.graph_query, ge @ Psi_v)

        if gdyn is not None and rank > 0:
            # dynamic = sum over earlier steps of p_i h_i, with raw p_i
            prev = valid_idx[:rank]
            gp[prev] += enc.hidden[prev] @ gdyn
            gH[prev] += probs[prev][:, None] * gdyn[None, :]

    # Backprop through the document encoders and sentence encoders.
    flat_count = len(caches["sentences"])
    g_sent = np.zeros((flat_count, d))
    for (start, end), cache in zip(caches["spans"], caches["docs"]):
        g_sent[start:end] = _lstm_backward(model, cache, gH[start:end], grads)

    gE_rows: list[tuple[np.ndarray, np.ndarray]] = []
    for k in range(flat_count):
        _sentence_backward(model, caches["sentences"][k], g_sent[k], grads, gE_rows)

    # The text query is the mean of the target's own hidden states.
    if caches["target_lstm"] is not None and np.any(gphi):
        t_count = len(caches["target_sentences"])
        gHt = np.tile(gphi / t_count, (t_count, 1))
        g_tsent = _lstm_backward(model, caches["target_lstm"], gHt, grads)
        for k in range(t_count):
            _sentence_backward(
                model, caches["target_sentences"][k], g_tsent[k], grads, gE_rows
            )

    gE = grads["word_embeddings"]
    for rows, gX in gE_rows:
        np.add.at(gE, rows, gX)

    return loss_value, probs, grads


# ---------------------------------------------------------------------------
# Optimization


@dataclass
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("Adam decay rates must lie in [0, 1)")


class Adam:
    """Standard Adam with bias correction, applied tensor by tensor."""

    def __init__(self, config: TrainConfig):
        self.config = config
        self.step_count = 0
        self.first: dict[str, np.ndarray] = {}
        self.second: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        cfg = self.config
        self.step_count += 1
        t = self.step_count
        for name, grad in grads.items():
            if name not in self.first:
                self.first[name] = np.zeros_like(params[name])
                self.second[name] = np.zeros_like(params[name])
            m = self.first[name]
            v = self.second[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * grad
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * grad * grad
            m_hat = m / (1.0 - cfg.beta1**t)
            v_hat = v / (1.0 - cfg.beta2**t)
            params[name] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)


@dataclass
class TrainResult:
    model: SummarizerModel
    epoch_losses: list[float]


def train(
    model: SummarizerModel,
    instances,
    attention: AttentionConfig,
    config: TrainConfig,
) -> TrainResult:
    """Optimize in place; one target's sequence is one optimizer step.

    Targets are visited in the given order every epoch; the returned
    trace holds the mean per-target loss of each epoch.
    """
    config.validate()
    instances = list(instances)
    if not instances:
        raise ModelError("no training instance")
    optimizer = Adam(config)
    epoch_losses: list[float] = []
    for epoch in range(config.epochs):
        total = 0.0
        for inst in instances:
            loss_value, _, grads = compute_gradients(model, attention, inst)
            if not np.isfinite(loss_value):
                raise TrainingError(
                    f"non-finite loss on target {inst.target_id!r} "
                    f"in epoch {epoch + 1}"
                )
            optimizer.step(model.params, grads)
            total += loss_value
        epoch_losses.append(total / len(instances))
        logger.info(
            "epoch %d/%d: mean loss %.6f", epoch + 1, config.epochs, epoch_losses[-1]
        )
    return TrainResult(model=model, epoch_losses=epoch_losses)


def extract_summary(
    model: SummarizerModel,
    cfg: AttentionConfig,
    enc: EncodedTarget,
    word_budget: int = 500,
) -> list[int]:
    """Indices of the selected sentences, in original sequence order.

    Sentences are ranked by selection probability (ties to the lower
    index) and greedily accepted while they fit the word budget.
    """
    probs = decode_sequence(model, cfg, enc)
    ranking = rank_by_score(probs, enc.valid)
    return fill_word_budget(ranking, enc.token_counts, word_budget)


# ---------------------------------------------------------------------------
# Checkpoints


def _tensor_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def save_checkpoint(model: SummarizerModel, path, manifest_path=None) -> None:
    """Versioned binary checkpoint: header, vocabulary, tensors as f32 LE."""
    header = CHECKPOINT_MAGIC + struct.pack(
        "<III", CHECKPOINT_VERSION, model.dim, len(model.widths)
    )
    header += struct.pack(f"<{len(model.widths)}I", *model.widths)
    header += struct.pack("<I", len(model.vocab))
    chunks = [header]
    for tok in model.vocab:
        raw = tok.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)) + raw)
    manifest_lines = []
    for name in model.param_order:
        data = _tensor_bytes(model.params[name])
        chunks.append(data)
        shape = "x".join(str(s) for s in model.params[name].shape)
        digest = hashlib.sha256(data).hexdigest()
        manifest_lines.append(f"{name}\t{shape}\t{digest}")
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))
    if manifest_path is not None:
        with open(manifest_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(manifest_lines) + "\n")


def load_checkpoint(path) -> SummarizerModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ModelError("not a summarizer checkpoint")
    offset = 4
    version, dim, n_widths = struct.unpack_from("<III", blob, offset)
    offset += 12
    if version != CHECKPOINT_VERSION:
        raise ModelError(
            f"checkpoint version {version} is not supported "
            f"(expected {CHECKPOINT_VERSION})"
        )
    widths = struct.unpack_from(f"<{n_widths}I", blob, offset)
    offset += 4 * n_widths
    (vocab_size,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    vocab = []
    for _ in range(vocab_size):
        (length,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        vocab.append(blob[offset : offset + length].decode("utf-8"))
        offset += length

    d = dim
    shapes = {"word_embeddings": (vocab_size + 1, d)}
    for q in widths:
        shapes[f"conv_kernel_{q}"] = (d, q * d)
        shapes[f"conv_bias_{q}"] = (d,)
    shapes["lstm_wx"] = (4 * d, d)
    shapes["lstm_wh"] = (4 * d, d)
    shapes["lstm_b"] = (4 * d,)
    for name in ("attn_salience", "attn_novelty", "attn_text", "attn_graph"):
        shapes[name] = (d, d)
    shapes["gate_w"] = (2 * d,)
    shapes["gate_b"] = (1,)

    params = {}
    for name in SummarizerModel._param_order(sorted(widths)):
        shape = shapes[name]
        count = int(np.prod(shape))
        raw = blob[offset : offset + 4 * count]
        if len(raw) != 4 * count:
            raise ModelError(f"checkpoint truncated inside tensor {name}")
        params[name] = np.frombuffer(raw, dtype="<f4").astype(float).reshape(shape)
        offset += 4 * count
    if offset != len(blob):
        raise ModelError("checkpoint has trailing bytes")
    return SummarizerModel(dim, widths, vocab, params)
