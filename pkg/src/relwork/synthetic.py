"""Deterministic synthetic corpora for demos, tuning and verification.

Two generators live here.  The study corpus is sixty papers in three
topical clusters; each cluster's targets cite mostly their own cluster,
and their gold sections quote content sentences of their references,
with the heavily cited references quoted the most.  The planted
instance is a thirty-paper corpus whose targets reach their references
only through citation edges, so recovering the reference ranking
requires concentrating the walk on edge type one.
"""

from __future__ import annotations

import numpy as np

from .text import normalize

TOPIC_WORDS = (
    (
        "graph", "spectral", "laplacian", "eigenvalue", "partition",
        "conductance", "manifold", "diffusion", "adjacency", "modularity",
        "vertex", "subgraph", "spectrum", "relaxation", "eigenvector",
        "clustering", "connectivity", "degree", "affinity", "cut",
    ),
    (
        "translation", "neural", "encoder", "decoder", "attention",
        "recurrent", "alignment", "vocabulary", "bilingual", "beam",
        "decoding", "phrase", "fluency", "bleu", "gating",
        "morphology", "reordering", "lexicon", "parallel", "softmax",
    ),
    (
        "bayesian", "posterior", "prior", "likelihood", "inference",
        "sampler", "marginal", "gibbs", "variational", "latent",
        "dirichlet", "mixture", "hyperparameter", "conjugate", "monte-carlo",
        "evidence", "density", "credible", "burn-in", "proposal",
    ),
)

FILLER_WORDS = (
    "model", "method", "approach", "result", "experiment", "data",
    "evaluation", "performance", "analysis", "propose", "show", "improve",
    "baseline", "task", "framework", "novel", "effective", "study",
    "present", "compare", "training", "test", "learn", "function",
    "problem", "algorithm", "paper", "work", "section", "report",
    "demonstrate", "achieve", "consider", "describe", "provide",
)

_CLUSTERS = 3
_SOURCES_PER_CLUSTER = 15
_TARGETS_PER_CLUSTER = 5
_OWN_REFS = 12
_CROSS_REFS_PER_CLUSTER = 3
_MIN_GOLD_TOKENS = 500


def _pick(rng: np.random.Generator, words, count: int) -> list[str]:
    idx = rng.choice(len(words), size=min(count, len(words)), replace=False)
    return [words[i] for i in sorted(int(j) for j in idx)]


def _content_sentence(rng: np.random.Generator, cluster: int) -> str:
    tokens = _pick(rng, TOPIC_WORDS[cluster], int(rng.integers(5, 8)))
    tokens += _pick(rng, FILLER_WORDS, int(rng.integers(4, 7)))
    order = rng.permutation(len(tokens))
    return " ".join(tokens[i] for i in order) + "."


def _filler_sentence(rng: np.random.Generator) -> str:
    tokens = _pick(rng, FILLER_WORDS, int(rng.integers(8, 13)))
    order = rng.permutation(len(tokens))
    return " ".join(tokens[i] for i in order) + "."


def _source_id(cluster: int, index: int) -> str:
    return f"c{cluster}s{index:02d}"


def _target_id(cluster: int, index: int) -> str:
    return f"c{cluster}t{index}"


def synthetic_corpus(seed: int = 0) -> list[dict]:
    """Sixty papers: three fifteen-source clusters plus five targets each.

    Content sentences are dense in the cluster's topic vocabulary and are
    what gold sections quote; filler sentences share a common vocabulary
    across clusters.  Targets cite twelve own-cluster sources with high
    related-work counts and six cross-cluster decoys with none, so the
    importance ordering puts the quoted references first.
    """
    rng = np.random.default_rng(seed)
    records: list[dict] = []
    content_sentences: dict[str, list[str]] = {}

    for cluster in range(_CLUSTERS):
        authors = [f"author-c{cluster}-{k}" for k in range(6)]
        keywords = [f"topic-c{cluster}-{k}" for k in range(5)]
        venue = f"venue-c{cluster}"
        for s in range(_SOURCES_PER_CLUSTER):
            pid = _source_id(cluster, s)
            year = 2005 + s % 9
            abstract = [
                _content_sentence(rng, cluster),
                _content_sentence(rng, cluster),
                _filler_sentence(rng),
            ]
            body = []
            content: list[str] = [abstract[0], abstract[1]]
            for section, n_content, n_filler in (
                ("introduction", 2, 2),
                ("method", 4, 2),
                ("experiments", 2, 3),
            ):
                block = [(True, _content_sentence(rng, cluster)) for _ in range(n_content)]
                block += [(False, _filler_sentence(rng)) for _ in range(n_filler)]
                order = rng.permutation(len(block))
                for i in order:
                    is_content, text = block[i]
                    body.append([section, text])
                    if is_content:
                        content.append(text)
            content_sentences[pid] = content
            refs = []
            if s > 0:
                n_refs = int(rng.integers(1, min(4, s) + 1))
                for r in _pick(rng, list(range(s)), n_refs):
                    refs.append([
                        _source_id(cluster, int(r)),
                        int(rng.integers(0, 3)),
                        int(rng.integers(1, 5)),
                    ])
            records.append({
                "id": pid,
                "title": " ".join(_pick(rng, TOPIC_WORDS[cluster], 4)),
                "year": year,
                "authors": _pick(rng, authors, 2),
                "keywords": _pick(rng, keywords, 2),
                "venue": venue if rng.random() < 0.85 else "venue-shared",
                "abstract": abstract,
                "body": body,
                "refs": refs,
                "related_work": "",
            })

    # Quota of gold sentences per reference rank: early (heavily cited)
    # references are quoted the most.
    quotas = [5, 5, 5, 5, 4, 4, 4, 4, 3, 3, 3, 3]

    for cluster in range(_CLUSTERS):
        authors = [f"author-c{cluster}-{k}" for k in range(6)]
        keywords = [f"topic-c{cluster}-{k}" for k in range(5)]
        for t in range(_TARGETS_PER_CLUSTER):
            pid = _target_id(cluster, t)
            own = _pick(rng, list(range(_SOURCES_PER_CLUSTER)), _OWN_REFS)
            rw_counts = [6, 6, 5, 5, 4, 4, 3, 3, 2, 2, 2, 2]
            refs = []
            ordered_own = []
            for rank, s in enumerate(own):
                rid = _source_id(cluster, int(s))
                refs.append([rid, rw_counts[rank], rw_counts[rank] + int(rng.integers(1, 4))])
                ordered_own.append(rid)
            for other in range(_CLUSTERS):
                if other == cluster:
                    continue
                for s in _pick(rng, list(range(_SOURCES_PER_CLUSTER)), _CROSS_REFS_PER_CLUSTER):
                    refs.append([
                        _source_id(other, int(s)),
                        0,
                        int(rng.integers(1, 3)),
                    ])
            # Reference order by descending related-work count mirrors the
            # downstream ordering; quote each reference's content sentences.
            by_importance = sorted(
                range(_OWN_REFS),
                key=lambda k: (-refs[k][1], -refs[k][2], refs[k][0]),
            )
            gold_parts: list[str] = []
            for rank, k in enumerate(by_importance):
                pool = content_sentences[refs[k][0]]
                take = min(quotas[rank], len(pool))
                picked = _pick(rng, list(range(len(pool))), take)
                gold_parts.extend(pool[i] for i in picked)
            gold = " ".join(gold_parts)
            extra_rank = 0
            while len(normalize(gold)) < _MIN_GOLD_TOKENS:
                pool = content_sentences[refs[by_importance[extra_rank]][0]]
                gold_parts.append(pool[int(rng.integers(0, len(pool)))])
                gold = " ".join(gold_parts)
                extra_rank = (extra_rank + 1) % _OWN_REFS

            abstract = [_content_sentence(rng, cluster) for _ in range(3)]
            body = []
            for section, n_content, n_filler in (
                ("introduction", 3, 2),
                ("method", 3, 2),
            ):
                for _ in range(n_content):
                    body.append([section, _content_sentence(rng, cluster)])
                for _ in range(n_filler):
                    body.append([section, _filler_sentence(rng)])
            records.append({
                "id": pid,
                "title": " ".join(_pick(rng, TOPIC_WORDS[cluster], 4)),
                "year": 2015,
                "authors": _pick(rng, authors, 2),
                "keywords": _pick(rng, keywords, 2),
                "venue": f"venue-c{cluster}",
                "abstract": abstract,
                "body": body,
                "refs": refs,
                "related_work": gold,
            })

    records.sort(key=lambda rec: rec["id"])
    return records


def planted_instance(seed: int = 0) -> list[dict]:
    """Thirty papers whose targets reach their references only by citing.

    Four targets each cite five plain papers with distinct related-work
    counts; the targets share authors, keywords and venues exclusively
    with decoy papers they never cite.  Concentrating the walk on
    citation edges therefore reproduces each reference ranking exactly,
    while other edge types lead to decoys.
    """
    rng = np.random.default_rng(seed)
    records: list[dict] = []

    plain_ids = [f"p{k:02d}" for k in range(12)]
    for k, pid in enumerate(plain_ids):
        records.append({
            "id": pid,
            "title": f"plain study {k}",
            "year": 2000 + k % 8,
            "authors": [f"plain-author-{k % 6}"],
            "keywords": [f"plain-topic-{k % 4}"],
            "venue": "plain-venue",
            "abstract": [_filler_sentence(rng)],
            "body": [["body", _filler_sentence(rng)]],
            "refs": [],
            "related_work": "",
        })

    decoy_ids = [f"d{k:02d}" for k in range(14)]
    for k, pid in enumerate(decoy_ids):
        records.append({
            "id": pid,
            "title": f"decoy study {k}",
            "year": 2001 + k % 8,
            "authors": [f"shared-author-{k % 8}"],
            "keywords": [f"shared-topic-{k % 4}"],
            "venue": f"shared-venue-{k % 2}",
            "abstract": [_filler_sentence(rng)],
            "body": [["body", _filler_sentence(rng)]],
            "refs": [],
            "related_work": "",
        })

    for t in range(4):
        start = (3 * t) % len(plain_ids)
        chosen = sorted(
            plain_ids[(start + j) % len(plain_ids)] for j in range(5)
        )
        refs = [[rid, 5 - j, 6 - j] for j, rid in enumerate(chosen)]
        records.append({
            "id": f"t{t}",
            "title": f"target study {t}",
            "year": 2010,
            "authors": [f"shared-author-{2 * t}", f"shared-author-{2 * t + 1}"],
            "keywords": [f"shared-topic-{t}"],
            "venue": f"shared-venue-{t % 2}",
            "abstract": [_filler_sentence(rng)],
            "body": [["body", _filler_sentence(rng)]],
            "refs": refs,
            "related_work": "",
        })

    records.sort(key=lambda rec: rec["id"])
    return records


def planted_targets(records) -> list[tuple[str, list[str]]]:
    """(target id, ordered reference ids) pairs of the planted instance."""
    targets = []
    for rec in records:
        if rec["id"].startswith("t"):
            ordered = sorted(rec["refs"], key=lambda r: (-r[1], -r[2], r[0]))
            targets.append((rec["id"], [r[0] for r in ordered]))
    return targets
