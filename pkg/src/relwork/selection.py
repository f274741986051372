"""Shared summary assembly: turn a sentence ranking into a selection.

Every summarizer in the package, learned or classical, produces a
ranking over candidate sentences; the summary is built the same way
from any of them, so the budget-filling step lives here.
"""

from __future__ import annotations


def rank_by_score(scores, valid=None) -> list[int]:
    """Indices ordered by descending score, ties to the lower index."""
    if valid is None:
        indices = list(range(len(scores)))
    else:
        indices = [i for i in range(len(scores)) if valid[i]]
    return sorted(indices, key=lambda i: (-scores[i], i))


def fill_word_budget(ranking, token_counts, word_budget: int) -> list[int]:
    """Greedy selection along the ranking while the budget holds.

    A sentence is taken when it still fits; later, shorter sentences may
    still be taken after a long one is skipped.  The result is sorted
    back into original sequence order.
    """
    if word_budget < 1:
        raise ValueError("word budget must be positive")
    chosen: list[int] = []
    used = 0
    for idx in ranking:
        cost = token_counts[idx]
        if used + cost <= word_budget:
            chosen.append(idx)
            used += cost
    return sorted(chosen)
