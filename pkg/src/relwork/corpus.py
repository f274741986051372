"""Corpus ingestion, reference ordering, candidate sequences and labeling.

A corpus is a JSONL file, one paper per line.  Each record carries the
paper's metadata, its sentence-split abstract and body, its reference
list with citation counts, and (for target papers) the gold related-work
section used for supervision and evaluation.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace

from .text import Sentence, normalize, preprocess_sentence

logger = logging.getLogger(__name__)


class CorpusError(Exception):
    """Raised for unusable corpus input (duplicate ids, empty sequences)."""


@dataclass(frozen=True)
class Reference:
    """One entry of a paper's reference list.

    rw_count is how often the reference is cited inside the citing
    paper's related-work section, full_count how often in the full text.
    resolved marks whether the referenced paper exists in the corpus.
    """

    paper_id: str
    rw_count: int
    full_count: int
    resolved: bool = False


@dataclass
class CorpusRecord:
    paper_id: str
    title: str
    year: int
    authors: tuple[str, ...]
    keywords: tuple[str, ...]
    venue: str
    abstract: tuple[str, ...]
    body: tuple[tuple[str, str], ...]  # (section name, sentence)
    references: tuple[Reference, ...]
    related_work: str

    def raw_sentences(self) -> list[str]:
        """All sentences in document order: abstract first, then body."""
        return list(self.abstract) + [text for _, text in self.body]

    def accepted_sentences(self) -> list[Sentence]:
        """Sentences surviving preprocessing, in document order."""
        out = []
        for pos, raw in enumerate(self.raw_sentences()):
            sent = preprocess_sentence(raw, self.paper_id, pos)
            if sent is not None:
                out.append(sent)
        return out


class Corpus:
    """A set of papers indexed by id, with per-line ingestion errors kept."""

    def __init__(self, records: dict[str, CorpusRecord], errors=None):
        self.records = records
        self.errors: list[tuple[int, str]] = list(errors or [])

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self.records

    def __getitem__(self, paper_id: str) -> CorpusRecord:
        return self.records[paper_id]

    def __iter__(self):
        return iter(self.records.values())

    def ids(self) -> list[str]:
        return sorted(self.records)


def _parse_record(obj: dict) -> CorpusRecord:
    paper_id = obj["id"]
    if not isinstance(paper_id, str) or not paper_id:
        raise ValueError("id must be a non-empty string")
    year = int(obj["year"])
    refs = []
    for entry in obj.get("refs", []):
        rid, rw, full = entry[0], int(entry[1]), int(entry[2])
        if rw < 0 or full < 0:
            raise ValueError(f"negative citation count for reference {rid}")
        if rid == paper_id:
            raise ValueError("paper lists itself among its references")
        refs.append(Reference(paper_id=rid, rw_count=rw, full_count=full))
    body = tuple((str(sec), str(text)) for sec, text in obj.get("body", []))
    return CorpusRecord(
        paper_id=paper_id,
        title=str(obj.get("title", "")),
        year=year,
        authors=tuple(str(a) for a in obj.get("authors", [])),
        keywords=tuple(str(k) for k in obj.get("keywords", [])),
        venue=str(obj.get("venue", "")),
        abstract=tuple(str(s) for s in obj.get("abstract", [])),
        body=body,
        references=tuple(refs),
        related_work=str(obj.get("related_work", "")),
    )


def ingest_corpus(path) -> Corpus:
    """Read a JSONL corpus.

    A malformed line is reported (with its line number) and skipped;
    ingestion continues.  A duplicate paper id is fatal.  After reading,
    every reference is marked resolved when its target is in the corpus.
    """
    records: dict[str, CorpusRecord] = {}
    errors: list[tuple[int, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = _parse_record(json.loads(line))
            except (ValueError, KeyError, TypeError, IndexError) as exc:
                logger.warning("line %d: skipping malformed record: %s", lineno, exc)
                errors.append((lineno, str(exc)))
                continue
            if record.paper_id in records:
                raise CorpusError(
                    f"line {lineno}: duplicate paper id {record.paper_id!r}"
                )
            records[record.paper_id] = record
    for record in records.values():
        record.references = tuple(
            replace(ref, resolved=ref.paper_id in records)
            for ref in record.references
        )
    return Corpus(records, errors)


def write_corpus(records, path) -> None:
    """Serialize records (dicts or CorpusRecord) back to JSONL."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            if isinstance(rec, CorpusRecord):
                rec = {
                    "id": rec.paper_id,
                    "title": rec.title,
                    "year": rec.year,
                    "authors": list(rec.authors),
                    "keywords": list(rec.keywords),
                    "venue": rec.venue,
                    "abstract": list(rec.abstract),
                    "body": [list(pair) for pair in rec.body],
                    "refs": [
                        [r.paper_id, r.rw_count, r.full_count]
                        for r in rec.references
                    ],
                    "related_work": rec.related_work,
                }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def order_references(record: CorpusRecord) -> list[str]:
    """Resolved reference ids ordered by importance to the citing paper.

    Sort key: related-work citation count descending, then full-text
    count descending, then paper id ascending.  Unresolved references
    are dropped; a paper with no resolved references is unusable.
    """
    resolved = [r for r in record.references if r.resolved]
    if not resolved:
        raise CorpusError(f"paper {record.paper_id!r} has no resolved references")
    resolved.sort(key=lambda r: (-r.rw_count, -r.full_count, r.paper_id))
    return [r.paper_id for r in resolved]


@dataclass
class LabeledSequence:
    """The flat candidate-sentence sequence for one target paper.

    boundaries lists (reference id, start, end) spans over sentences,
    in reference order; references contributing no accepted sentence are
    omitted.  labels is None until the oracle (or a model) assigns them.
    """

    target_id: str
    sentences: tuple[Sentence, ...]
    boundaries: tuple[tuple[str, int, int], ...]
    labels: tuple[int, ...] | None = None

    def __len__(self) -> int:
        return len(self.sentences)

    def token_counts(self) -> list[int]:
        return [len(s) for s in self.sentences]


def build_candidate_sequence(record: CorpusRecord, corpus: Corpus) -> LabeledSequence:
    """Concatenate the accepted sentences of the ordered references."""
    sentences: list[Sentence] = []
    boundaries: list[tuple[str, int, int]] = []
    for rid in order_references(record):
        accepted = corpus[rid].accepted_sentences()
        if not accepted:
            continue
        start = len(sentences)
        sentences.extend(accepted)
        boundaries.append((rid, start, len(sentences)))
    if not sentences:
        raise CorpusError(
            f"paper {record.paper_id!r}: no reference sentence survived preprocessing"
        )
    return LabeledSequence(
        target_id=record.paper_id,
        sentences=tuple(sentences),
        boundaries=tuple(boundaries),
    )


def _bigrams(tokens) -> Counter:
    return Counter(zip(tokens, tokens[1:]))


def default_positive_budget(seq: LabeledSequence, gold_tokens) -> int:
    """Positive-label budget: gold length over mean candidate sentence length."""
    counts = seq.token_counts()
    mean_len = sum(counts) / len(counts)
    return max(1, math.ceil(len(gold_tokens) / mean_len))


def label_oracle(
    seq: LabeledSequence, gold_text: str, max_positives: int | None = None
) -> LabeledSequence:
    """Greedy extractive labels approximating the best bigram recall.

    Repeatedly picks the candidate whose bigrams add the most still
    uncovered gold bigram mass (ties to the lower index) until the
    budget is reached or no candidate adds anything.  Covered mass is
    clipped per bigram, so a duplicate of an already chosen sentence
    has zero gain.  The marginal gains are those of a monotone
    submodular coverage objective, so this greedy selection is within
    1 - 1/e of the best same-size subset.
    """
    gold_tokens = normalize(gold_text)
    gold = _bigrams(gold_tokens)
    if max_positives is None:
        max_positives = default_positive_budget(seq, gold_tokens)
    labels = [0] * len(seq)
    if not gold:
        logger.warning(
            "target %s: gold section has no bigram; labeling all zero",
            seq.target_id,
        )
        return replace(seq, labels=tuple(labels))

    sentence_bigrams = [_bigrams(s.tokens) for s in seq.sentences]
    residual = Counter(gold)
    chosen = 0
    while chosen < max_positives:
        best_gain, best_idx = 0, -1
        for idx, bg in enumerate(sentence_bigrams):
            if labels[idx]:
                continue
            gain = sum(min(c, residual[g]) for g, c in bg.items())
            if gain > best_gain:
                best_gain, best_idx = gain, idx
        if best_idx < 0:
            break
        labels[best_idx] = 1
        chosen += 1
        for g, c in sentence_bigrams[best_idx].items():
            residual[g] = max(0, residual[g] - c)
    if chosen == 0:
        logger.warning(
            "target %s: no candidate overlaps the gold section; labeling all zero",
            seq.target_id,
        )
    return replace(seq, labels=tuple(labels))


def is_eligible_target(
    record: CorpusRecord, min_references: int = 15, min_gold_words: int = 500
) -> bool:
    """Target eligibility: enough resolved references and a long enough gold."""
    resolved = sum(1 for r in record.references if r.resolved)
    if resolved < min_references:
        return False
    return len(normalize(record.related_work)) >= min_gold_words
