"""Shared corpus builders for the pipeline and CLI tests."""

import json

import pytest

from relwork.text import Sentence


def make_sentence(tokens, doc_id="d0", position=0):
    return Sentence(tokens=tuple(tokens), doc_id=doc_id, position=position)


def micro_records():
    """Nine papers: six sources and three targets quoting their sources.

    Every sentence clears the 7..80 token filter and each target's gold
    section copies sentences of its two most cited references, so the
    label oracle, the graph builder and the evaluator all have work to
    do at a size where the whole pipeline runs in seconds.
    """
    records = []
    source_sentences = {}
    for k in range(6):
        sid = f"s{k}"
        sents = [
            f"paper {sid} studies topic{k} alpha{k} beta{k} gamma{k} carefully",
            f"the method of {sid} uses topic{k} delta{k} epsilon{k} features",
            f"experiments for {sid} report topic{k} zeta{k} eta{k} improvements",
        ]
        source_sentences[sid] = sents
        records.append({
            "id": sid,
            "title": f"study of topic{k}",
            "year": 2008 + k,
            "authors": [f"author{k % 3}", f"author{(k + 1) % 3}"],
            "keywords": [f"topic{k}", "shared"],
            "venue": "venue-a" if k % 2 == 0 else "venue-b",
            "abstract": sents[:2],
            "body": [["method", sents[2]]],
            "refs": [[f"s{j}", 1, 2] for j in range(k)][:2],
            "related_work": "",
        })
    for t in range(3):
        tid = f"t{t}"
        cited = [f"s{(t + j) % 6}" for j in range(4)]
        refs = [[cited[0], 3, 4], [cited[1], 2, 3], [cited[2], 1, 2], [cited[3], 1, 1]]
        gold = " ".join(
            ". ".join(source_sentences[cited[0]])
            + ". "
            + ". ".join(source_sentences[cited[1]])
            for _ in range(1)
        )
        records.append({
            "id": tid,
            "title": f"survey {t} of several topics",
            "year": 2015,
            "authors": [f"author{t}"],
            "keywords": ["shared", f"focus{t}"],
            "venue": "venue-a",
            "abstract": [
                f"this survey {tid} revisits topic{t} alpha{t} beta{t} broadly",
                f"we compare methods for topic{t} gamma{t} delta{t} carefully",
            ],
            "body": [["introduction",
                      f"prior work on topic{t} epsilon{t} zeta{t} is reviewed here"]],
            "refs": refs,
            "related_work": gold,
        })
    return records


def write_jsonl(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


@pytest.fixture
def micro_corpus_path(tmp_path):
    path = tmp_path / "corpus.jsonl"
    write_jsonl(micro_records(), path)
    return path


def micro_config():
    """Pipeline configuration sized for the micro corpus."""
    from relwork.pipeline import PipelineConfig

    config = PipelineConfig()
    config.eligibility.min_references = 2
    config.eligibility.min_gold_words = 10
    config.split.folds = 2
    config.evolution.population_size = 4
    config.evolution.generations = 1
    config.embedding.dim = 4
    config.embedding.walks_per_node = 2
    config.embedding.walk_length = 8
    config.embedding.window = 3
    config.embedding.negatives = 2
    config.embedding.epochs = 1
    config.model.dim = 4
    config.model.widths = (3,)
    config.model.epochs = 2
    config.evaluation.word_budget = 60
    return config
