"""Classical extractive baselines over a candidate sequence.

Each baseline ranks the flat candidate sentences of a target with a
deterministic classical heuristic, then fills the same word budget the
learned extractor uses.  All four operate on the already normalized
tokens, so they share the vocabulary treatment of the main model.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from .selection import fill_word_budget

LUHN = "luhn"
MMR = "mmr"
LEXRANK = "lexrank"
SUMBASIC = "sumbasic"
BASELINE_KINDS = (LUHN, MMR, LEXRANK, SUMBASIC)

_MAX_GAP = 4          # Luhn: insignificant tokens tolerated inside a cluster
_MMR_LAMBDA = 0.7
_LEXRANK_THRESHOLD = 0.1
_LEXRANK_DAMPING = 0.85


class BaselineError(Exception):
    """Raised for an unknown baseline kind or empty input."""


def _require_sentences(sentences):
    sentences = [list(s) for s in sentences]
    if not sentences:
        raise BaselineError("no candidate sentence to rank")
    return sentences


def rank_luhn(sentences) -> list[int]:
    """Frequency-cluster significance ranking.

    Significant words are the top quartile of distinct words by
    frequency.  Within a sentence, significant words at most four
    positions apart form a cluster; a cluster scores (significant
    count)^2 / span, and the sentence takes its best cluster.
    """
    sentences = _require_sentences(sentences)
    counts = Counter(tok for sent in sentences for tok in sent)
    by_count = sorted(counts.values(), reverse=True)
    cutoff = by_count[max(0, math.ceil(len(by_count) / 4) - 1)]
    significant = {tok for tok, c in counts.items() if c >= cutoff}

    scores = []
    for sent in sentences:
        marks = [i for i, tok in enumerate(sent) if tok in significant]
        best = 0.0
        start = 0
        while start < len(marks):
            end = start
            while end + 1 < len(marks) and marks[end + 1] - marks[end] <= _MAX_GAP + 1:
                end += 1
            span = marks[end] - marks[start] + 1
            inside = end - start + 1
            best = max(best, inside * inside / span)
            start = end + 1
        scores.append(best)
    return sorted(range(len(sentences)), key=lambda i: (-scores[i], i))


def _tfidf_matrix(sentences) -> np.ndarray:
    vocab = sorted({tok for sent in sentences for tok in sent})
    index = {tok: k for k, tok in enumerate(vocab)}
    n = len(sentences)
    tf = np.zeros((n, len(vocab)))
    for i, sent in enumerate(sentences):
        for tok in sent:
            tf[i, index[tok]] += 1.0
    df = (tf > 0).sum(axis=0)
    idf = np.log(n / df) if n else df
    return tf * idf[None, :]


def _cosine_matrix(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    unit = vectors / safe[:, None]
    sims = unit @ unit.T
    sims[norms == 0.0, :] = 0.0
    sims[:, norms == 0.0] = 0.0
    return sims


def rank_mmr(sentences) -> list[int]:
    """Maximal marginal relevance against the centroid query.

    Picks, at each step, the sentence with the best balance of query
    similarity and dissimilarity to everything already picked; the pick
    order is the ranking.
    """
    sentences = _require_sentences(sentences)
    vectors = _tfidf_matrix(sentences)
    query = vectors.mean(axis=0)
    qnorm = np.linalg.norm(query)
    sims = _cosine_matrix(vectors)
    if qnorm == 0.0:
        query_sim = np.zeros(len(sentences))
    else:
        norms = np.linalg.norm(vectors, axis=1)
        safe = np.where(norms == 0.0, 1.0, norms)
        query_sim = (vectors @ query) / (safe * qnorm)
        query_sim[norms == 0.0] = 0.0

    order: list[int] = []
    remaining = list(range(len(sentences)))
    while remaining:
        best_idx, best_score = None, None
        for i in remaining:
            redundancy = max((sims[i, j] for j in order), default=0.0)
            score = _MMR_LAMBDA * query_sim[i] - (1.0 - _MMR_LAMBDA) * redundancy
            if best_score is None or score > best_score:
                best_idx, best_score = i, score
        order.append(best_idx)
        remaining.remove(best_idx)
    return order


def rank_lexrank(sentences) -> list[int]:
    """Graph centrality over thresholded cosine similarity.

    Similarities below the threshold are cut; the remaining weights are
    row-normalized and power-iterated with damping until the scores
    settle.  Self-similarity is excluded.
    """
    sentences = _require_sentences(sentences)
    n = len(sentences)
    if n == 1:
        return [0]
    sims = _cosine_matrix(_tfidf_matrix(sentences))
    np.fill_diagonal(sims, 0.0)
    sims[sims < _LEXRANK_THRESHOLD] = 0.0
    row_sums = sims.sum(axis=1)
    uniform = np.full(n, 1.0 / n)
    matrix = np.where(
        row_sums[:, None] > 0.0, sims / np.where(row_sums == 0.0, 1.0, row_sums)[:, None],
        uniform[None, :],
    )
    x = uniform.copy()
    for _ in range(200):
        x_new = (1.0 - _LEXRANK_DAMPING) * uniform + _LEXRANK_DAMPING * (x @ matrix)
        if np.abs(x_new - x).sum() < 1e-12:
            x = x_new
            break
        x = x_new
    return sorted(range(n), key=lambda i: (-x[i], i))


def rank_sumbasic(sentences) -> list[int]:
    """Word-probability selection with squared down-weighting.

    Each round picks the best-weighted sentence containing the current
    most probable word, then squares the probability of every word in
    it so later rounds prefer fresh content.
    """
    sentences = _require_sentences(sentences)
    total = sum(len(s) for s in sentences)
    if total == 0:
        return list(range(len(sentences)))
    prob = {tok: c / total for tok, c in
            Counter(tok for sent in sentences for tok in sent).items()}

    order: list[int] = []
    remaining = set(range(len(sentences)))
    while remaining:
        # Highest-probability word still available; ties alphabetical.
        best_tok = None
        for i in remaining:
            for tok in sentences[i]:
                if (
                    best_tok is None
                    or prob[tok] > prob[best_tok]
                    or (prob[tok] == prob[best_tok] and tok < best_tok)
                ):
                    best_tok = tok
        holders = [
            i for i in sorted(remaining)
            if best_tok in sentences[i] or not sentences[i]
        ]
        if not holders:
            holders = sorted(remaining)
        weights = [
            (sum(prob[t] for t in sentences[i]) / len(sentences[i]))
            if sentences[i] else 0.0
            for i in holders
        ]
        pick = holders[int(np.argmax(weights))]
        order.append(pick)
        remaining.remove(pick)
        for tok in set(sentences[pick]):
            prob[tok] = prob[tok] ** 2
    return order


_RANKERS = {
    LUHN: rank_luhn,
    MMR: rank_mmr,
    LEXRANK: rank_lexrank,
    SUMBASIC: rank_sumbasic,
}


def baseline_rank(kind: str, sentences) -> list[int]:
    try:
        ranker = _RANKERS[kind]
    except KeyError:
        raise BaselineError(
            f"unknown baseline {kind!r}; expected one of {', '.join(BASELINE_KINDS)}"
        ) from None
    return ranker(sentences)


def baseline_summarize(kind: str, sentences, token_counts, word_budget: int) -> list[int]:
    """Rank with the chosen baseline and fill the word budget.

    Returns selected indices in original sequence order, exactly like
    the learned extractor's selection step.
    """
    ranking = baseline_rank(kind, sentences)
    return fill_word_budget(ranking, token_counts, word_budget)
