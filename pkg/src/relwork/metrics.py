"""ROUGE scoring over token sequences.

Candidate and reference are token lists that already went through the
shared normalization, so scores here are a pure function of the tokens.
An optional byte limit truncates the reference at a token boundary
before scoring, mirroring length-capped evaluation campaigns.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass


class EvaluationError(Exception):
    """Raised when a score is undefined (empty reference after truncation)."""


@dataclass(frozen=True)
class RougeScore:
    recall: float
    precision: float
    f1: float


def _f_score(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def truncate_tokens(tokens, byte_limit: int | None):
    """Longest token prefix whose space-joined UTF-8 form fits byte_limit."""
    tokens = list(tokens)
    if byte_limit is None:
        return tokens
    out, used = [], 0
    for tok in tokens:
        cost = len(tok.encode("utf-8")) + (1 if out else 0)
        if used + cost > byte_limit:
            break
        out.append(tok)
        used += cost
    return out


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate, reference, n: int, byte_limit: int | None = None) -> RougeScore:
    """Clipped n-gram overlap recall/precision/F1.

    Each n-gram's match count is clipped to its count on the other side,
    so repetition cannot inflate the score.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    reference = truncate_tokens(reference, byte_limit)
    if not reference:
        raise EvaluationError("reference is empty after truncation")
    cand_counts = _ngrams(list(candidate), n)
    ref_counts = _ngrams(reference, n)
    overlap = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
    total_cand = sum(cand_counts.values())
    total_ref = sum(ref_counts.values())
    recall = overlap / total_ref if total_ref else 0.0
    precision = overlap / total_cand if total_cand else 0.0
    return RougeScore(recall=recall, precision=precision, f1=_f_score(precision, recall))


def _lcs_length(a, b) -> int:
    # One rolling row keeps memory linear in the shorter side.
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, reference, byte_limit: int | None = None) -> RougeScore:
    """Longest-common-subsequence recall/precision/F1."""
    reference = truncate_tokens(reference, byte_limit)
    if not reference:
        raise EvaluationError("reference is empty after truncation")
    candidate = list(candidate)
    lcs = _lcs_length(candidate, reference) if candidate else 0
    recall = lcs / len(reference)
    precision = lcs / len(candidate) if candidate else 0.0
    return RougeScore(recall=recall, precision=precision, f1=_f_score(precision, recall))
