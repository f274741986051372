"""Heterogeneous bibliography graph and personalized PageRank.

Nodes are papers, authors, keywords and venues.  Ten directed edge sets
connect them; every edge carries a base weight that row-normalizes
within its (source node, edge type) bucket.  A ten-component usefulness
vector reweights whole edge types at query time; the induced random
walk with a personalized restart ranks papers for a given target.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

PAPER = "paper"
AUTHOR = "author"
KEYWORD = "keyword"
VENUE = "venue"
NODE_KINDS = (PAPER, AUTHOR, KEYWORD, VENUE)

# Edge types, numbered 1..10.
CITES = 1            # paper -> paper it cites
CITED_BY = 2         # paper -> paper citing it
CONTRIBUTION = 3     # author -> paper, weighted by the paper's standing
WRITTEN_BY = 4       # paper -> author
COAUTHOR = 5         # author -> author sharing a paper
MENTIONS = 6         # paper -> keyword
MENTIONED_IN = 7     # keyword -> paper
PUBLISHED_IN = 8     # paper -> venue
PUBLISHES = 9        # venue -> paper
KEYWORD_COOCCUR = 10 # keyword -> keyword on a shared paper
NUM_EDGE_TYPES = 10

EDGE_TYPE_NAMES = {
    CITES: "cites",
    CITED_BY: "cited-by",
    CONTRIBUTION: "contribution",
    WRITTEN_BY: "written-by",
    COAUTHOR: "coauthor",
    MENTIONS: "mentions",
    MENTIONED_IN: "mentioned-in",
    PUBLISHED_IN: "published-in",
    PUBLISHES: "publishes",
    KEYWORD_COOCCUR: "keyword-cooccur",
}


class GraphError(Exception):
    """Raised for unusable graph input (empty snapshot, unknown node)."""


@dataclass(frozen=True, order=True)
class NodeId:
    kind: str
    key: str

    def label(self) -> str:
        return f"{self.kind}:{self.key}"

    @staticmethod
    def from_label(label: str) -> "NodeId":
        kind, _, key = label.partition(":")
        return NodeId(kind, key)


def check_usefulness(eud) -> np.ndarray:
    """Validate an edge-type usefulness vector: ten finite non-negatives."""
    arr = np.asarray(eud, dtype=float)
    if arr.shape != (NUM_EDGE_TYPES,):
        raise ValueError(f"usefulness vector must have {NUM_EDGE_TYPES} components")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("usefulness components must be finite and non-negative")
    return arr


def uniform_usefulness() -> np.ndarray:
    return np.ones(NUM_EDGE_TYPES, dtype=float)


class HeteroGraph:
    """Immutable snapshot with canonical node and edge ordering.

    Nodes are stored sorted by (kind, key) and edges sorted by
    (source index, edge type, destination index), so two snapshots built
    from the same logical content are identical regardless of input
    iteration order.
    """

    def __init__(self, nodes, edges):
        # edges: iterable of (NodeId, edge_type, NodeId, base_weight)
        self.nodes: list[NodeId] = sorted(set(nodes))
        if not self.nodes:
            raise GraphError("graph has no nodes")
        self.index: dict[NodeId, int] = {n: i for i, n in enumerate(self.nodes)}
        packed = []
        for src, etype, dst, weight in edges:
            if etype < 1 or etype > NUM_EDGE_TYPES:
                raise GraphError(f"unknown edge type {etype}")
            if src not in self.index or dst not in self.index:
                raise GraphError("edge endpoint is not a graph node")
            if weight <= 0:
                raise GraphError("base weight must be positive")
            packed.append((self.index[src], etype, self.index[dst], float(weight)))
        packed.sort()
        n_edges = len(packed)
        self.edge_src = np.fromiter((e[0] for e in packed), dtype=np.int64, count=n_edges)
        self.edge_type = np.fromiter((e[1] for e in packed), dtype=np.int64, count=n_edges)
        self.edge_dst = np.fromiter((e[2] for e in packed), dtype=np.int64, count=n_edges)
        self.edge_weight = np.fromiter((e[3] for e in packed), dtype=float, count=n_edges)
        # Row pointer over the sorted edge arrays, one slice per source.
        self._row_ptr = np.searchsorted(self.edge_src, np.arange(len(self.nodes) + 1))

    def __len__(self) -> int:
        return len(self.nodes)

    def num_edges(self) -> int:
        return len(self.edge_src)

    def papers(self) -> list[NodeId]:
        return [n for n in self.nodes if n.kind == PAPER]

    def node_index(self, node: NodeId) -> int:
        try:
            return self.index[node]
        except KeyError:
            raise GraphError(f"node {node.label()!r} is not in the graph") from None

    def out_edges(self, node: NodeId):
        """Edges leaving node as (edge_type, destination, base_weight)."""
        i = self.node_index(node)
        lo, hi = self._row_ptr[i], self._row_ptr[i + 1]
        return [
            (int(self.edge_type[k]), self.nodes[int(self.edge_dst[k])],
             float(self.edge_weight[k]))
            for k in range(lo, hi)
        ]

    def transition_operator(self, eud) -> "TransitionOperator":
        """Row-stochastic walk matrix under the given type usefulness."""
        eud = check_usefulness(eud)
        n = len(self.nodes)
        mass = self.edge_weight * eud[self.edge_type - 1]
        row_sums = np.bincount(self.edge_src, weights=mass, minlength=n)
        keep = mass > 0.0
        src = self.edge_src[keep]
        probs = mass[keep] / row_sums[src]
        matrix = sp.csr_matrix(
            (probs, (src, self.edge_dst[keep])), shape=(n, n), dtype=float
        )
        matrix.sum_duplicates()
        return TransitionOperator(matrix=matrix, dangling=row_sums == 0.0)

    def transition_probability(self, eud, node: NodeId) -> dict[NodeId, float]:
        """Outgoing walk distribution of one node; empty when it dangles."""
        eud = check_usefulness(eud)
        i = self.node_index(node)
        lo, hi = self._row_ptr[i], self._row_ptr[i + 1]
        mass = self.edge_weight[lo:hi] * eud[self.edge_type[lo:hi] - 1]
        total = mass.sum()
        if total == 0.0:
            return {}
        out: dict[NodeId, float] = {}
        for k, m in zip(range(lo, hi), mass):
            if m > 0.0:
                dst = self.nodes[int(self.edge_dst[k])]
                out[dst] = out.get(dst, 0.0) + float(m / total)
        return out


@dataclass
class TransitionOperator:
    """CSR walk matrix plus the mask of dangling rows."""

    matrix: sp.csr_matrix
    dangling: np.ndarray


@dataclass
class PageRankResult:
    scores: np.ndarray
    converged: bool
    iterations: int


def _prior_vector(graph: HeteroGraph, prior) -> np.ndarray:
    if isinstance(prior, dict):
        vec = np.zeros(len(graph))
        for node, value in prior.items():
            vec[graph.node_index(node)] = value
    else:
        vec = np.asarray(prior, dtype=float).copy()
        if vec.shape != (len(graph),):
            raise ValueError("prior length must equal the node count")
    if np.any(vec < 0):
        raise ValueError("prior mass must be non-negative")
    total = vec.sum()
    if total <= 0:
        raise ValueError("prior must have positive total mass")
    return vec / total


def pagerank_with_priors(
    graph: HeteroGraph,
    eud,
    prior,
    damping: float = 0.85,
    tol: float = 1e-10,
    max_iters: int = 200,
    operator: TransitionOperator | None = None,
) -> PageRankResult:
    """Personalized PageRank under the type-usefulness walk.

    Teleportation goes to the prior; mass sitting on a dangling node is
    also redirected to the prior, so every iterate sums to one exactly.
    A precomputed operator may be passed when scoring many priors on
    the same graph and usefulness vector.
    """
    if not 0.0 <= damping < 1.0:
        raise ValueError("damping must be in [0, 1)")
    if operator is None:
        operator = graph.transition_operator(eud)
    prior_vec = _prior_vector(graph, prior)
    matrix, dangling = operator.matrix, operator.dangling
    x = prior_vec.copy()
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        dangling_mass = x[dangling].sum()
        x_new = (1.0 - damping) * prior_vec + damping * (
            x @ matrix + dangling_mass * prior_vec
        )
        delta = np.abs(x_new - x).sum()
        x = x_new
        if delta < tol:
            converged = True
            break
    if not converged:
        logger.warning(
            "personalized walk did not converge in %d iterations (residual loop)",
            max_iters,
        )
    return PageRankResult(scores=x, converged=converged, iterations=iterations)


@dataclass
class Recommendation:
    paper_ids: list[str]
    truncated: bool
    converged: bool


def recommend_top_n(
    graph: HeteroGraph,
    eud,
    target: NodeId,
    n: int,
    damping: float = 0.85,
    tol: float = 1e-10,
    max_iters: int = 200,
    operator: TransitionOperator | None = None,
) -> Recommendation:
    """Top papers by personalized score from target, excluding target.

    Ties break on ascending paper id.  When fewer than n other papers
    exist the list is short and flagged truncated.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    result = pagerank_with_priors(
        graph, eud, {target: 1.0}, damping=damping, tol=tol,
        max_iters=max_iters, operator=operator,
    )
    candidates = [
        (-result.scores[graph.index[node]], node.key)
        for node in graph.papers()
        if node != target
    ]
    candidates.sort()
    top = [key for _, key in candidates[:n]]
    return Recommendation(
        paper_ids=top,
        truncated=len(candidates) < n,
        converged=result.converged,
    )


def _citation_pagerank(
    papers: list[str],
    cite_edges: list[tuple[str, str]],
    damping: float,
    tol: float,
    max_iters: int,
) -> dict[str, float]:
    """Prior-free PageRank on the paper citation subgraph.

    Used only to weight author contribution edges; teleportation and
    dangling mass are uniform over papers.
    """
    index = {p: i for i, p in enumerate(papers)}
    n = len(papers)
    rows = [index[a] for a, b in cite_edges]
    cols = [index[b] for a, b in cite_edges]
    out_deg = np.bincount(np.array(rows, dtype=np.int64), minlength=n).astype(float)
    data = [1.0 / out_deg[r] for r in rows]
    matrix = sp.csr_matrix((data, (rows, cols)), shape=(n, n), dtype=float)
    dangling = out_deg == 0.0
    uniform = np.full(n, 1.0 / n)
    x = uniform.copy()
    for _ in range(max_iters):
        x_new = (1.0 - damping) * uniform + damping * (
            x @ matrix + x[dangling].sum() * uniform
        )
        if np.abs(x_new - x).sum() < tol:
            x = x_new
            break
        x = x_new
    return {p: float(x[index[p]]) for p in papers}


def build_graph(
    corpus,
    cutoff_year: int,
    damping: float = 0.85,
    tol: float = 1e-10,
    max_iters: int = 200,
) -> HeteroGraph:
    """Snapshot of everything published up to and including cutoff_year.

    Citations into papers beyond the cutoff (or out of the corpus) are
    dropped.  Base weights split each node's per-type mass uniformly,
    except author contribution edges, which are proportional to the
    cited paper's standing in the citation subgraph so that a prolific
    author channels more of their mass into their influential papers.
    """
    papers = sorted(
        rec.paper_id for rec in corpus if rec.year <= cutoff_year
    )
    if not papers:
        raise GraphError(f"no paper at or before year {cutoff_year}")
    paper_set = set(papers)

    cites: dict[str, list[str]] = {p: [] for p in papers}
    cited_by: dict[str, list[str]] = {p: [] for p in papers}
    author_papers: dict[str, set[str]] = {}
    paper_keywords: dict[str, list[str]] = {}
    paper_venue: dict[str, str] = {}
    for pid in papers:
        rec = corpus[pid]
        seen = set()
        for ref in rec.references:
            if ref.resolved and ref.paper_id in paper_set and ref.paper_id not in seen:
                seen.add(ref.paper_id)
                cites[pid].append(ref.paper_id)
                cited_by[ref.paper_id].append(pid)
        for author in dict.fromkeys(rec.authors):
            author_papers.setdefault(author, set()).add(pid)
        paper_keywords[pid] = list(dict.fromkeys(rec.keywords))
        if rec.venue:
            paper_venue[pid] = rec.venue

    cite_edges = [(a, b) for a, targets in cites.items() for b in targets]
    standing = _citation_pagerank(papers, cite_edges, damping, tol, max_iters)

    nodes: list[NodeId] = [NodeId(PAPER, p) for p in papers]
    nodes += [NodeId(AUTHOR, a) for a in author_papers]
    keywords = sorted({k for kws in paper_keywords.values() for k in kws})
    nodes += [NodeId(KEYWORD, k) for k in keywords]
    venues = sorted(set(paper_venue.values()))
    nodes += [NodeId(VENUE, v) for v in venues]

    edges: list[tuple[NodeId, int, NodeId, float]] = []

    def uniform_edges(src: NodeId, etype: int, dst_nodes: list[NodeId]):
        if not dst_nodes:
            return
        w = 1.0 / len(dst_nodes)
        for dst in dst_nodes:
            edges.append((src, etype, dst, w))

    for pid in papers:
        node = NodeId(PAPER, pid)
        uniform_edges(node, CITES, [NodeId(PAPER, q) for q in cites[pid]])
        uniform_edges(node, CITED_BY, [NodeId(PAPER, q) for q in cited_by[pid]])
        rec = corpus[pid]
        uniform_edges(
            node, WRITTEN_BY,
            [NodeId(AUTHOR, a) for a in dict.fromkeys(rec.authors)],
        )
        uniform_edges(
            node, MENTIONS, [NodeId(KEYWORD, k) for k in paper_keywords[pid]]
        )
        if pid in paper_venue:
            edges.append((node, PUBLISHED_IN, NodeId(VENUE, paper_venue[pid]), 1.0))

    for author in sorted(author_papers):
        own = sorted(author_papers[author])
        node = NodeId(AUTHOR, author)
        total = sum(standing[p] for p in own)
        for p in own:
            edges.append((node, CONTRIBUTION, NodeId(PAPER, p), standing[p] / total))
        coauthors = sorted(
            {
                other
                for p in own
                for other in corpus[p].authors
                if other != author
            }
        )
        uniform_edges(node, COAUTHOR, [NodeId(AUTHOR, a) for a in coauthors])

    keyword_papers: dict[str, list[str]] = {k: [] for k in keywords}
    for pid in papers:
        for k in paper_keywords[pid]:
            keyword_papers[k].append(pid)
    for k in keywords:
        node = NodeId(KEYWORD, k)
        uniform_edges(
            node, MENTIONED_IN, [NodeId(PAPER, p) for p in sorted(keyword_papers[k])]
        )
        partners = sorted(
            {
                other
                for p in keyword_papers[k]
                for other in paper_keywords[p]
                if other != k
            }
        )
        uniform_edges(node, KEYWORD_COOCCUR, [NodeId(KEYWORD, x) for x in partners])

    venue_papers: dict[str, list[str]] = {v: [] for v in venues}
    for pid, v in paper_venue.items():
        venue_papers[v].append(pid)
    for v in venues:
        uniform_edges(
            NodeId(VENUE, v), PUBLISHES,
            [NodeId(PAPER, p) for p in sorted(venue_papers[v])],
        )

    return HeteroGraph(nodes, edges)


def save_graph(graph: HeteroGraph, nodes_path, edges_path) -> None:
    """Write the snapshot as two TSV files with 12-significant-digit weights."""
    with open(nodes_path, "w", encoding="utf-8") as fh:
        for node in graph.nodes:
            fh.write(f"{node.kind}\t{node.key}\n")
    with open(edges_path, "w", encoding="utf-8") as fh:
        for k in range(graph.num_edges()):
            src = graph.nodes[int(graph.edge_src[k])]
            dst = graph.nodes[int(graph.edge_dst[k])]
            fh.write(
                f"{src.kind}\t{src.key}\t{int(graph.edge_type[k])}\t"
                f"{dst.kind}\t{dst.key}\t{graph.edge_weight[k]:.12g}\n"
            )


def load_graph(nodes_path, edges_path) -> HeteroGraph:
    nodes = []
    with open(nodes_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            kind, key = line.split("\t")
            nodes.append(NodeId(kind, key))
    edges = []
    with open(edges_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            sk, skey, etype, dk, dkey, weight = line.split("\t")
            edges.append((NodeId(sk, skey), int(etype), NodeId(dk, dkey), float(weight)))
    return HeteroGraph(nodes, edges)


def save_usefulness(eud, path) -> None:
    """One component per line, 12 significant digits."""
    arr = check_usefulness(eud)
    with open(path, "w", encoding="utf-8") as fh:
        for value in arr:
            fh.write(f"{value:.12g}\n")


def load_usefulness(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        values = [float(line) for line in fh if line.strip()]
    return check_usefulness(values)
