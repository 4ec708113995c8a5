"""Weighted bipartite query-document click graph and co-click scoring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import GraphConstructionError, NotInGraphError
from .ingest import QueryDocPair
from .kernels import graph as _k

DEFAULT_K = 10


@dataclass(frozen=True)
class Candidate:
    query_key: str
    score: float


def rank_key(c: Candidate):
    """Total order: score descending, then query key ascending."""
    return (-c.score, c.query_key)


class ClickGraph:
    """Immutable bipartite graph over clicked (query, document) pairs.

    Query and document vertices are indexed in ascending key order, so
    comparing vertex ids is the same as comparing keys.
    """

    __slots__ = ("queries", "docs", "_qid", "_did",
                 "q_indptr", "q_docs", "q_w", "d_indptr", "d_queries", "d_w")

    def __init__(self, queries: Sequence[str], docs: Sequence[str], edges: np.ndarray):
        # edges: (n, 3) int64 rows of (query id, doc id, weight)
        self.queries = tuple(queries)
        self.docs = tuple(docs)
        self._qid = {q: i for i, q in enumerate(self.queries)}
        self._did = {d: i for i, d in enumerate(self.docs)}
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
        nq, nd = len(self.queries), len(self.docs)

        order = np.lexsort((edges[:, 1], edges[:, 0]))
        fwd = edges[order]
        self.q_indptr = np.zeros(nq + 1, dtype=np.int64)
        np.add.at(self.q_indptr, fwd[:, 0] + 1, 1)
        self.q_indptr = np.cumsum(self.q_indptr)
        self.q_docs = np.ascontiguousarray(fwd[:, 1])
        self.q_w = np.ascontiguousarray(fwd[:, 2])

        order = np.lexsort((edges[:, 0], edges[:, 1]))
        bwd = edges[order]
        self.d_indptr = np.zeros(nd + 1, dtype=np.int64)
        np.add.at(self.d_indptr, bwd[:, 1] + 1, 1)
        self.d_indptr = np.cumsum(self.d_indptr)
        self.d_queries = np.ascontiguousarray(bwd[:, 0])
        self.d_w = np.ascontiguousarray(bwd[:, 2])
        for a in (self.q_indptr, self.q_docs, self.q_w, self.d_indptr, self.d_queries, self.d_w):
            a.setflags(write=False)

    def __len__(self) -> int:
        return len(self.queries)

    def __contains__(self, query_key: str) -> bool:
        return query_key in self._qid

    def __eq__(self, other) -> bool:
        if not isinstance(other, ClickGraph):
            return NotImplemented
        return (self.queries == other.queries and self.docs == other.docs
                and np.array_equal(self.q_indptr, other.q_indptr)
                and np.array_equal(self.q_docs, other.q_docs)
                and np.array_equal(self.q_w, other.q_w))

    __hash__ = None

    @property
    def n_edges(self) -> int:
        return len(self.q_docs)

    def query_id(self, key: str) -> int:
        try:
            return self._qid[key]
        except KeyError:
            raise NotInGraphError(key) from None

    def doc_id(self, key: str) -> int:
        return self._did[key]

    def doc_edges(self, query_key: str) -> list[tuple[str, int]]:
        q = self.query_id(query_key)
        lo, hi = self.q_indptr[q], self.q_indptr[q + 1]
        return [(self.docs[d], int(w)) for d, w in zip(self.q_docs[lo:hi], self.q_w[lo:hi])]

    def edges(self):
        """Yield ``(query_key, doc_key, weight)`` in query-major order."""
        for q, key in enumerate(self.queries):
            for p in range(self.q_indptr[q], self.q_indptr[q + 1]):
                yield key, self.docs[self.q_docs[p]], int(self.q_w[p])

    def click_total(self, query_key: str) -> int:
        q = self._qid.get(query_key)
        if q is None:
            return 0
        return int(self.q_w[self.q_indptr[q]:self.q_indptr[q + 1]].sum())

    def click_totals(self) -> dict[str, int]:
        sums = np.add.reduceat(self.q_w, self.q_indptr[:-1]) if self.n_edges else np.zeros(0, np.int64)
        return {k: int(s) for k, s in zip(self.queries, sums)}

    def _csr(self):
        return self.q_indptr, self.q_docs, self.q_w, self.d_indptr, self.d_queries, self.d_w

    def scaled(self, factor: int) -> "ClickGraph":
        edges = np.column_stack((np.repeat(np.arange(len(self.queries)), np.diff(self.q_indptr)),
                                 self.q_docs, self.q_w * int(factor)))
        return ClickGraph(self.queries, self.docs, edges)


def build_graph(pairs: Iterable[QueryDocPair]) -> ClickGraph:
    clicked: dict[tuple[str, str], int] = {}
    seen: set[tuple[str, str]] = set()
    for p in pairs:
        key = (p.query_key, p.doc_key)
        if key in seen:
            raise GraphConstructionError(f"duplicate pair {key!r}; aggregate pairs first")
        seen.add(key)
        if p.click_count < 0:
            raise GraphConstructionError(f"negative click count for {key!r}")
        if p.click_count > 0:
            clicked[key] = p.click_count
    queries = sorted({q for q, _ in clicked})
    docs = sorted({d for _, d in clicked})
    qid = {q: i for i, q in enumerate(queries)}
    did = {d: i for i, d in enumerate(docs)}
    edges = np.array([(qid[q], did[d], w) for (q, d), w in clicked.items()], dtype=np.int64).reshape(-1, 3)
    return ClickGraph(queries, docs, edges)


def coclick_score(g: ClickGraph, qa: str, qb: str) -> int:
    """Sum over shared documents of the product of both click weights."""
    a, b = g.query_id(qa), g.query_id(qb)
    if a == b:
        raise ValueError("coclick_score needs two distinct queries")
    ia = slice(g.q_indptr[a], g.q_indptr[a + 1])
    ib = slice(g.q_indptr[b], g.q_indptr[b + 1])
    return _k.coclick_pair(g.q_docs[ia], g.q_w[ia], g.q_docs[ib], g.q_w[ib])


def _ranked(g: ClickGraph, ids: np.ndarray, scores: np.ndarray, k: int | None = None) -> list[Candidate]:
    # ids ascending == keys ascending, so a stable sort on -score gives the tie rule
    order = np.argsort(-scores, kind="stable")[:k]
    return [Candidate(g.queries[ids[i]], int(scores[i])) for i in order]


def connected_queries(g: ClickGraph, q: str) -> list[Candidate]:
    ids, scores = _k.coclick_row(g.query_id(q), *g._csr())
    return _ranked(g, ids, scores)


def top_k(candidates: Sequence[Candidate], k: int = DEFAULT_K) -> list[Candidate]:
    if k < 1:
        raise ValueError("k must be positive")
    return list(candidates[:k])


def connected_all(g: ClickGraph, queries: Sequence[str] | None = None, k: int | None = None) -> dict[str, list[Candidate]]:
    """Ranked connected queries for many queries at once (batch precompute)."""
    keys = list(g.queries) if queries is None else list(queries)
    ids = np.array([g.query_id(q) for q in keys], dtype=np.int64)
    indptr, all_ids, all_scores = _k.coclick_rows(ids, *g._csr())
    out = {}
    for i, key in enumerate(keys):
        lo, hi = indptr[i], indptr[i + 1]
        out[key] = _ranked(g, all_ids[lo:hi], all_scores[lo:hi], k)
    return out


def pairwise_matrix(g: ClickGraph) -> np.ndarray:
    """Dense query x query co-click matrix (diagonal zeroed); small graphs only."""
    nq, nd = len(g.queries), len(g.docs)
    a = np.zeros((nq, nd), dtype=np.int64)
    rows = np.repeat(np.arange(nq), np.diff(g.q_indptr))
    a[rows, g.q_docs] = g.q_w
    w = a @ a.T
    np.fill_diagonal(w, 0)
    return w
