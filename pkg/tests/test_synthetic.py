"""Synthetic corpus generator tests."""

from relwork.corpus import ingest_corpus, write_corpus
from relwork.synthetic import planted_instance, planted_targets, synthetic_corpus
from relwork.text import normalize


class TestStudyCorpus:
    def test_shape_and_determinism(self):
        records = synthetic_corpus(seed=0)
        assert len(records) == 60
        ids = [rec["id"] for rec in records]
        assert ids == sorted(ids)
        targets = [rec for rec in records if rec["related_work"]]
        assert len(targets) == 15
        again = synthetic_corpus(seed=0)
        assert records == again
        assert synthetic_corpus(seed=1) != records

    def test_targets_cite_their_cluster_with_counts(self):
        records = synthetic_corpus(seed=0)
        by_id = {rec["id"]: rec for rec in records}
        for rec in records:
            if not rec["related_work"]:
                continue
            cluster = rec["id"][1]
            own = [r for r in rec["refs"] if r[0][1] == cluster]
            cross = [r for r in rec["refs"] if r[0][1] != cluster]
            assert len(own) == 12
            assert len(cross) == 6
            assert all(count > 0 for _, count, _ in own)
            assert all(count == 0 for _, count, _ in cross)
            assert len(normalize(rec["related_work"])) >= 500
            for rid, _, _ in rec["refs"]:
                assert rid in by_id

    def test_ingests_cleanly(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_corpus(synthetic_corpus(seed=0), path)
        corpus = ingest_corpus(path)
        assert corpus.errors == []
        assert len(corpus) == 60
        for record in corpus:
            assert all(ref.resolved for ref in record.references)


class TestPlantedInstance:
    def test_shape_and_reachability(self):
        records = planted_instance(seed=0)
        assert len(records) == 30
        by_id = {rec["id"]: rec for rec in records}
        targets = planted_targets(records)
        assert [tid for tid, _ in targets] == ["t0", "t1", "t2", "t3"]
        for tid, ordered in targets:
            assert len(ordered) == 5
            # ranking is by importance; counts strictly decrease
            counts = {r[0]: r[1] for r in by_id[tid]["refs"]}
            values = [counts[rid] for rid in ordered]
            assert values == sorted(values, reverse=True)
            # references are plain papers only; shared metadata points
            # at decoys, never at the cited references
            assert all(rid.startswith("p") for rid in ordered)
            assert all(by_id[rid]["venue"] == "plain-venue" for rid in ordered)
            assert by_id[tid]["venue"].startswith("shared-venue")

    def test_deterministic(self):
        assert planted_instance(seed=0) == planted_instance(seed=0)
