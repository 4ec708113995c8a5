"""Co-click kernels over CSR adjacency.

The graph is two CSR structures: query -> (doc, weight) and the transposed
doc -> (query, weight).  Column indices within a row are sorted ascending.
All arithmetic is int64.
"""

from __future__ import annotations

import numpy as np

from .. import _accel
from .._accel import njit


@njit(nogil=True, cache=True)
def _coclick_row_nb(q, q_indptr, q_docs, q_w, d_indptr, d_queries, d_w, acc, touched):
    cnt = 0
    for p in range(q_indptr[q], q_indptr[q + 1]):
        d = q_docs[p]
        w = q_w[p]
        for r in range(d_indptr[d], d_indptr[d + 1]):
            o = d_queries[r]
            if o == q:
                continue
            if acc[o] == 0:
                touched[cnt] = o
                cnt += 1
            acc[o] += w * d_w[r]
    ids = np.sort(touched[:cnt])
    scores = np.empty(cnt, dtype=np.int64)
    for i in range(cnt):
        scores[i] = acc[ids[i]]
        acc[ids[i]] = 0
    return ids, scores


def _coclick_row_np(q, q_indptr, q_docs, q_w, d_indptr, d_queries, d_w):
    lo, hi = q_indptr[q], q_indptr[q + 1]
    docs = q_docs[lo:hi]
    w = q_w[lo:hi]
    starts = d_indptr[docs]
    lens = d_indptr[docs + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    # flat positions of every (doc, co-clicking query) entry
    offsets = np.repeat(starts - np.concatenate(([0], np.cumsum(lens)[:-1])), lens)
    idx = offsets + np.arange(total)
    others = d_queries[idx]
    prods = np.repeat(w, lens) * d_w[idx]
    keep = others != q
    ids, inv = np.unique(others[keep], return_inverse=True)
    scores = np.zeros(len(ids), dtype=np.int64)
    np.add.at(scores, inv, prods[keep])
    return ids.astype(np.int64), scores


def coclick_row(q, q_indptr, q_docs, q_w, d_indptr, d_queries, d_w):
    """Co-click scores of query ``q`` against every query sharing a document.

    Returns ``(ids, scores)`` with ids ascending and ``q`` excluded.
    """
    if _accel.backend() == "numba":
        nq = len(q_indptr) - 1
        acc = np.zeros(nq, dtype=np.int64)
        touched = np.empty(nq, dtype=np.int64)
        return _coclick_row_nb(q, q_indptr, q_docs, q_w, d_indptr, d_queries, d_w, acc, touched)
    return _coclick_row_np(q, q_indptr, q_docs, q_w, d_indptr, d_queries, d_w)


@njit(nogil=True, cache=True)
def _coclick_rows_nb(queries, q_indptr, q_docs, q_w, d_indptr, d_queries, d_w):
    nq = len(q_indptr) - 1
    acc = np.zeros(nq, dtype=np.int64)
    touched = np.empty(nq, dtype=np.int64)
    out_indptr = np.zeros(len(queries) + 1, dtype=np.int64)
    cap = 16
    out_ids = np.empty(cap, dtype=np.int64)
    out_scores = np.empty(cap, dtype=np.int64)
    pos = 0
    for i in range(len(queries)):
        ids, scores = _coclick_row_nb(queries[i], q_indptr, q_docs, q_w, d_indptr, d_queries, d_w, acc, touched)
        need = pos + len(ids)
        if need > cap:
            while cap < need:
                cap *= 2
            grown_ids = np.empty(cap, dtype=np.int64)
            grown_scores = np.empty(cap, dtype=np.int64)
            grown_ids[:pos] = out_ids[:pos]
            grown_scores[:pos] = out_scores[:pos]
            out_ids = grown_ids
            out_scores = grown_scores
        out_ids[pos:need] = ids
        out_scores[pos:need] = scores
        pos = need
        out_indptr[i + 1] = pos
    return out_indptr, out_ids[:pos].copy(), out_scores[:pos].copy()


def coclick_rows(queries, q_indptr, q_docs, q_w, d_indptr, d_queries, d_w):
    """Batch form of :func:`coclick_row`; returns a CSR ``(indptr, ids, scores)``."""
    queries = np.asarray(queries, dtype=np.int64)
    if _accel.backend() == "numba":
        return _coclick_rows_nb(queries, q_indptr, q_docs, q_w, d_indptr, d_queries, d_w)
    indptr = np.zeros(len(queries) + 1, dtype=np.int64)
    all_ids, all_scores = [], []
    for i, q in enumerate(queries):
        ids, scores = _coclick_row_np(q, q_indptr, q_docs, q_w, d_indptr, d_queries, d_w)
        all_ids.append(ids)
        all_scores.append(scores)
        indptr[i + 1] = indptr[i] + len(ids)
    if not all_ids:
        return indptr, np.empty(0, np.int64), np.empty(0, np.int64)
    return indptr, np.concatenate(all_ids), np.concatenate(all_scores)


@njit(nogil=True, cache=True)
def _coclick_pair_nb(a_docs, a_w, b_docs, b_w):
    i = 0
    j = 0
    total = 0
    while i < len(a_docs) and j < len(b_docs):
        if a_docs[i] == b_docs[j]:
            total += a_w[i] * b_w[j]
            i += 1
            j += 1
        elif a_docs[i] < b_docs[j]:
            i += 1
        else:
            j += 1
    return total


def coclick_pair(a_docs, a_w, b_docs, b_w) -> int:
    """Sum of weight products over the documents two sorted rows share."""
    if _accel.backend() == "numba":
        return int(_coclick_pair_nb(a_docs, a_w, b_docs, b_w))
    _, ia, ib = np.intersect1d(a_docs, b_docs, assume_unique=True, return_indices=True)
    return int(np.dot(a_w[ia], b_w[ib]))
