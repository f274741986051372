"""Heterogeneous graph construction and personalized PageRank tests."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import write_jsonl
from relwork.corpus import ingest_corpus
from relwork.graph import (
    AUTHOR,
    CITED_BY,
    CITES,
    CONTRIBUTION,
    COAUTHOR,
    GraphError,
    HeteroGraph,
    KEYWORD,
    KEYWORD_COOCCUR,
    MENTIONED_IN,
    MENTIONS,
    NodeId,
    PAPER,
    PUBLISHED_IN,
    PUBLISHES,
    VENUE,
    WRITTEN_BY,
    build_graph,
    check_usefulness,
    load_graph,
    load_usefulness,
    pagerank_with_priors,
    recommend_top_n,
    save_graph,
    save_usefulness,
    uniform_usefulness,
)

SENT = "one two three four five six seven"


def corpus_from(records, tmp_path):
    path = tmp_path / "c.jsonl"
    write_jsonl(records, path)
    return ingest_corpus(path)


def paper(pid, year=2010, authors=("a1",), keywords=("k1",), venue="v1", refs=()):
    return {
        "id": pid, "title": pid, "year": year,
        "authors": list(authors), "keywords": list(keywords), "venue": venue,
        "abstract": [SENT], "body": [], "refs": [list(r) for r in refs],
        "related_work": "",
    }


def random_graph(rng, max_nodes=6):
    """Random multi-kind graph with random typed edges, at least one edge."""
    n = int(rng.integers(2, max_nodes + 1))
    kinds = [PAPER, AUTHOR, KEYWORD, VENUE]
    nodes = [NodeId(PAPER, "p0")]
    nodes += [
        NodeId(kinds[int(rng.integers(0, 4))], f"n{i}") for i in range(1, n)
    ]
    edges = []
    for _ in range(int(rng.integers(1, 3 * n))):
        s, d = rng.integers(0, n, size=2)
        edges.append((
            nodes[int(s)], int(rng.integers(1, 11)), nodes[int(d)],
            float(rng.uniform(0.1, 2.0)),
        ))
    return HeteroGraph(nodes, edges)


def dense_pagerank(graph, eud, prior_vec, damping):
    """Linear-solve reference: x = (1-a) prior + a P^T x + a (d^T x) prior."""
    op = graph.transition_operator(eud)
    P = op.matrix.toarray()
    d = op.dangling.astype(float)
    n = len(graph)
    A = np.eye(n) - damping * P.T - damping * np.outer(prior_vec, d)
    return np.linalg.solve(A, (1.0 - damping) * prior_vec)


class TestCheckUsefulness:
    def test_valid_without_upper_cap(self):
        arr = check_usefulness([0.0, 1.0, 3.7, 0.2, 5.0, 0.1, 0.1, 0.1, 0.1, 0.1])
        assert arr.shape == (10,)

    def test_errors(self):
        with pytest.raises(ValueError):
            check_usefulness([0.1] * 9)
        with pytest.raises(ValueError):
            check_usefulness([-0.1] + [0.1] * 9)
        with pytest.raises(ValueError):
            check_usefulness([np.nan] + [0.1] * 9)

    def test_uniform(self):
        assert_allclose(uniform_usefulness(), 1.0)


class TestBuildGraph:
    def test_node_and_edge_inventory(self, tmp_path):
        corpus = corpus_from([
            paper("p1", authors=("alice", "bob"), keywords=("k1", "k2")),
            paper("p2", authors=("bob",), refs=[("p1", 1, 1)], venue="v2"),
        ], tmp_path)
        g = build_graph(corpus, 2010)
        labels = {n.label() for n in g.nodes}
        assert labels == {
            "paper:p1", "paper:p2", "author:alice", "author:bob",
            "keyword:k1", "keyword:k2", "venue:v1", "venue:v2",
        }
        by_type = {}
        for i in range(g.num_edges()):
            by_type.setdefault(int(g.edge_type[i]), []).append((
                g.nodes[int(g.edge_src[i])].label(),
                g.nodes[int(g.edge_dst[i])].label(),
                float(g.edge_weight[i]),
            ))
        assert by_type[CITES] == [("paper:p2", "paper:p1", 1.0)]
        assert by_type[CITED_BY] == [("paper:p1", "paper:p2", 1.0)]
        # Two authors on p1 split the written-by mass evenly.
        assert sorted(by_type[WRITTEN_BY]) == [
            ("paper:p1", "author:alice", 0.5), ("paper:p1", "author:bob", 0.5),
            ("paper:p2", "author:bob", 1.0),
        ]
        assert ("author:alice", "author:bob", 1.0) in by_type[COAUTHOR]
        assert ("author:bob", "author:alice", 1.0) in by_type[COAUTHOR]
        assert sorted(by_type[MENTIONS]) == [
            ("paper:p1", "keyword:k1", 0.5), ("paper:p1", "keyword:k2", 0.5),
            ("paper:p2", "keyword:k1", 1.0),
        ]
        assert sorted(by_type[MENTIONED_IN]) == [
            ("keyword:k1", "paper:p1", 0.5), ("keyword:k1", "paper:p2", 0.5),
            ("keyword:k2", "paper:p1", 1.0),
        ]
        assert sorted(by_type[KEYWORD_COOCCUR]) == [
            ("keyword:k1", "keyword:k2", 1.0), ("keyword:k2", "keyword:k1", 1.0),
        ]
        assert sorted(by_type[PUBLISHED_IN]) == [
            ("paper:p1", "venue:v1", 1.0), ("paper:p2", "venue:v2", 1.0),
        ]
        assert sorted(by_type[PUBLISHES]) == [
            ("venue:v1", "paper:p1", 1.0), ("venue:v2", "paper:p2", 1.0),
        ]

    def test_cutoff_drops_future_papers_and_citations(self, tmp_path):
        corpus = corpus_from([
            paper("p1", year=2005),
            paper("p2", year=2012, refs=[("p1", 1, 1)]),
        ], tmp_path)
        g = build_graph(corpus, 2010)
        assert [n.label() for n in g.papers()] == ["paper:p1"]
        assert not any(g.edge_type == CITES)
        with pytest.raises(GraphError):
            build_graph(corpus, 2000)

    def test_duplicate_citations_collapse(self, tmp_path):
        corpus = corpus_from([
            paper("p1"),
            paper("p2", refs=[("p1", 1, 1), ("p1", 0, 2)]),
        ], tmp_path)
        g = build_graph(corpus, 2010)
        assert int((g.edge_type == CITES).sum()) == 1

    def test_contribution_tracks_citation_standing(self, tmp_path):
        # Author "w" wrote pa and pb; pa is cited twice, pb never, so the
        # contribution split must equal the citation PageRank ratio.
        corpus = corpus_from([
            paper("pa", authors=("w",)),
            paper("pb", authors=("w",)),
            paper("pc", authors=("x",), refs=[("pa", 1, 1)]),
            paper("pd", authors=("x",), refs=[("pa", 1, 1)]),
        ], tmp_path)
        g = build_graph(corpus, 2010, damping=0.85)

        # Reference standing from a dense uniform-teleport solve over the
        # citation subgraph pa<-pc, pa<-pd with pa, pb dangling.
        papers = ["pa", "pb", "pc", "pd"]
        P = np.zeros((4, 4))
        P[2, 0] = 1.0
        P[3, 0] = 1.0
        dangling = np.array([1.0, 1.0, 0.0, 0.0])
        u = np.full(4, 0.25)
        A = np.eye(4) - 0.85 * P.T - 0.85 * np.outer(u, dangling)
        standing = np.linalg.solve(A, 0.15 * u)

        weights = {}
        for i in range(g.num_edges()):
            if int(g.edge_type[i]) == CONTRIBUTION:
                src = g.nodes[int(g.edge_src[i])]
                dst = g.nodes[int(g.edge_dst[i])]
                if src.key == "w":
                    weights[dst.key] = float(g.edge_weight[i])
        total = standing[0] + standing[1]
        assert_allclose(weights["pa"], standing[0] / total, atol=1e-9)
        assert_allclose(weights["pb"], standing[1] / total, atol=1e-9)
        assert weights["pa"] > weights["pb"]
        assert_allclose(weights["pa"] + weights["pb"], 1.0, atol=1e-12)

    def test_permutation_invariance(self, tmp_path):
        records = [
            paper("p1", authors=("alice", "bob"), keywords=("k1", "k2")),
            paper("p2", authors=("bob",), refs=[("p1", 2, 3)]),
            paper("p3", refs=[("p2", 1, 1), ("p1", 1, 1)]),
        ]
        c1 = corpus_from(records, tmp_path)
        (tmp_path / "c.jsonl").unlink()
        c2 = corpus_from(records[::-1], tmp_path)
        g1 = build_graph(c1, 2010)
        g2 = build_graph(c2, 2010)
        assert g1.nodes == g2.nodes
        assert np.array_equal(g1.edge_src, g2.edge_src)
        assert np.array_equal(g1.edge_type, g2.edge_type)
        assert np.array_equal(g1.edge_dst, g2.edge_dst)
        assert np.array_equal(g1.edge_weight, g2.edge_weight)


class TestTransition:
    def test_type_mass_mixing(self):
        # One node with two citation edges and one keyword mention: per
        # uniform usefulness the mention carries half the outgoing mass.
        a, b, c = NodeId(PAPER, "a"), NodeId(PAPER, "b"), NodeId(PAPER, "c")
        k = NodeId(KEYWORD, "k")
        g = HeteroGraph([a, b, c, k], [
            (a, CITES, b, 0.5), (a, CITES, c, 0.5), (a, MENTIONS, k, 1.0),
        ])
        probs = g.transition_probability(uniform_usefulness(), a)
        assert_allclose(probs[b], 0.25, atol=1e-12)
        assert_allclose(probs[c], 0.25, atol=1e-12)
        assert_allclose(probs[k], 0.5, atol=1e-12)

    def test_zeroed_type_redistributes(self):
        a, b, c = NodeId(PAPER, "a"), NodeId(PAPER, "b"), NodeId(PAPER, "c")
        k = NodeId(KEYWORD, "k")
        g = HeteroGraph([a, b, c, k], [
            (a, CITES, b, 0.5), (a, CITES, c, 0.5), (a, MENTIONS, k, 1.0),
        ])
        eud = np.zeros(10)
        eud[CITES - 1] = 1.0
        probs = g.transition_probability(eud, a)
        assert_allclose(probs[b], 0.5, atol=1e-12)
        assert_allclose(probs[c], 0.5, atol=1e-12)
        assert k not in probs

    def test_dangling_node(self):
        a, b = NodeId(PAPER, "a"), NodeId(PAPER, "b")
        g = HeteroGraph([a, b], [(a, CITES, b, 1.0)])
        assert g.transition_probability(uniform_usefulness(), b) == {}
        op = g.transition_operator(uniform_usefulness())
        assert list(op.dangling) == [False, True]

    def test_invalid_edges(self):
        a, b = NodeId(PAPER, "a"), NodeId(PAPER, "b")
        with pytest.raises(GraphError):
            HeteroGraph([a, b], [(a, 11, b, 1.0)])
        with pytest.raises(GraphError):
            HeteroGraph([a, b], [(a, CITES, b, 0.0)])
        with pytest.raises(GraphError):
            HeteroGraph([a], [(a, CITES, NodeId(PAPER, "ghost"), 1.0)])


class TestPageRank:
    def test_two_node_closed_form(self):
        # a -> b with prior on a: x_a = 1/(1+alpha), x_b = alpha/(1+alpha).
        a, b = NodeId(PAPER, "a"), NodeId(PAPER, "b")
        g = HeteroGraph([a, b], [(a, CITES, b, 1.0)])
        for alpha in (0.0, 0.5, 0.85):
            res = pagerank_with_priors(g, uniform_usefulness(), {a: 1.0},
                                       damping=alpha)
            assert res.converged
            assert_allclose(res.scores, [1 / (1 + alpha), alpha / (1 + alpha)],
                            atol=1e-9)

    def test_zero_damping_returns_prior(self):
        rng = np.random.default_rng(3)
        g = random_graph(rng)
        prior = rng.random(len(g))
        prior /= prior.sum()
        res = pagerank_with_priors(g, uniform_usefulness(), prior, damping=0.0)
        assert_allclose(res.scores, prior, atol=1e-12)

    def test_matches_dense_solve(self):
        rng = np.random.default_rng(7)
        eud = uniform_usefulness()
        for _ in range(5):
            g = random_graph(rng)
            prior = rng.random(len(g)) + 0.05
            prior /= prior.sum()
            res = pagerank_with_priors(g, eud, prior, damping=0.85)
            want = dense_pagerank(g, eud, prior, 0.85)
            assert np.abs(res.scores - want).sum() < 1e-8
            assert_allclose(res.scores.sum(), 1.0, atol=1e-9)

    def test_precomputed_operator_equivalent(self):
        rng = np.random.default_rng(11)
        g = random_graph(rng)
        eud = uniform_usefulness()
        op = g.transition_operator(eud)
        prior = np.full(len(g), 1.0 / len(g))
        direct = pagerank_with_priors(g, eud, prior)
        via_op = pagerank_with_priors(g, eud, prior, operator=op)
        assert np.array_equal(direct.scores, via_op.scores)

    def test_invalid_inputs(self):
        a, b = NodeId(PAPER, "a"), NodeId(PAPER, "b")
        g = HeteroGraph([a, b], [(a, CITES, b, 1.0)])
        eud = uniform_usefulness()
        with pytest.raises(ValueError):
            pagerank_with_priors(g, eud, {a: 1.0}, damping=1.0)
        with pytest.raises(ValueError):
            pagerank_with_priors(g, eud, {a: -1.0})
        with pytest.raises(ValueError):
            pagerank_with_priors(g, eud, np.zeros(2))
        with pytest.raises(ValueError):
            pagerank_with_priors(g, eud, np.ones(3))
        with pytest.raises(GraphError):
            pagerank_with_priors(g, eud, {NodeId(PAPER, "ghost"): 1.0})


class TestRecommend:
    def test_excludes_target_and_breaks_ties_by_id(self):
        # b and c receive equal mass from a, so ids decide their order.
        a, b, c = NodeId(PAPER, "a"), NodeId(PAPER, "b"), NodeId(PAPER, "c")
        g = HeteroGraph([a, b, c], [(a, CITES, b, 0.5), (a, CITES, c, 0.5)])
        rec = recommend_top_n(g, uniform_usefulness(), a, 2)
        assert rec.paper_ids == ["b", "c"]
        assert not rec.truncated

    def test_truncated_flag(self):
        a, b = NodeId(PAPER, "a"), NodeId(PAPER, "b")
        g = HeteroGraph([a, b, NodeId(KEYWORD, "k")], [(a, CITES, b, 1.0)])
        rec = recommend_top_n(g, uniform_usefulness(), a, 5)
        assert rec.paper_ids == ["b"]
        assert rec.truncated

    def test_scaling_leaves_ranking_identical(self):
        rng = np.random.default_rng(13)
        g = random_graph(rng, max_nodes=8)
        eud = rng.uniform(0.05, 1.0, size=10)
        target = NodeId(PAPER, "p0")
        base = recommend_top_n(g, eud, target, 5)
        scaled = recommend_top_n(g, eud * 3.7, target, 5)
        assert base.paper_ids == scaled.paper_ids

    def test_n_validation(self):
        a, b = NodeId(PAPER, "a"), NodeId(PAPER, "b")
        g = HeteroGraph([a, b], [(a, CITES, b, 1.0)])
        with pytest.raises(ValueError):
            recommend_top_n(g, uniform_usefulness(), a, 0)


class TestPersistence:
    def test_graph_round_trip(self, tmp_path):
        rng = np.random.default_rng(17)
        g = random_graph(rng, max_nodes=6)
        save_graph(g, tmp_path / "n.tsv", tmp_path / "e.tsv")
        back = load_graph(tmp_path / "n.tsv", tmp_path / "e.tsv")
        assert back.nodes == g.nodes
        assert np.array_equal(back.edge_src, g.edge_src)
        assert np.array_equal(back.edge_type, g.edge_type)
        assert np.array_equal(back.edge_dst, g.edge_dst)
        assert_allclose(back.edge_weight, g.edge_weight, rtol=1e-11)

    def test_save_is_deterministic(self, tmp_path):
        rng = np.random.default_rng(19)
        g = random_graph(rng)
        save_graph(g, tmp_path / "n1.tsv", tmp_path / "e1.tsv")
        save_graph(g, tmp_path / "n2.tsv", tmp_path / "e2.tsv")
        assert (tmp_path / "n1.tsv").read_bytes() == (tmp_path / "n2.tsv").read_bytes()
        assert (tmp_path / "e1.tsv").read_bytes() == (tmp_path / "e2.tsv").read_bytes()

    def test_usefulness_round_trip(self, tmp_path):
        eud = np.random.default_rng(23).uniform(0.0, 2.0, size=10)
        save_usefulness(eud, tmp_path / "eud.txt")
        back = load_usefulness(tmp_path / "eud.txt")
        assert_allclose(back, eud, rtol=1e-11)
