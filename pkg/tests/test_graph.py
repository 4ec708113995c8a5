import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clicksuggest.errors import GraphConstructionError, NotInGraphError
from clicksuggest.graph import (Candidate, build_graph, coclick_score, connected_all, connected_queries,
                                pairwise_matrix, top_k)
from clicksuggest.ingest import QueryDocPair

from conftest import random_pairs
from oracles import brute_coclick, brute_connected, edge_dict


def test_build_direct():
    g = build_graph([QueryDocPair("q1", "u3", 2), QueryDocPair("q3", "u3", 3)])
    assert g.queries == ("q1", "q3") and g.docs == ("u3",)
    assert sorted(g.edges()) == [("q1", "u3", 2), ("q3", "u3", 3)]


def test_zero_click_pairs_excluded():
    g = build_graph([QueryDocPair("q1", "u1", 0), QueryDocPair("q2", "u2", 1)])
    assert g.queries == ("q2",) and g.docs == ("u2",)
    assert "q1" not in g


def test_duplicate_pairs_rejected():
    with pytest.raises(GraphConstructionError):
        build_graph([QueryDocPair("q", "d", 1), QueryDocPair("q", "d", 2)])


def test_empty_graph():
    g = build_graph([])
    assert len(g) == 0 and g.n_edges == 0


def test_transpose_mirrors_forward():
    g = build_graph(random_pairs(random.Random(1), 15, 15))
    fwd = {(q, d, w) for q, d, w in g.edges()}
    bwd = set()
    for d in range(len(g.docs)):
        for p in range(g.d_indptr[d], g.d_indptr[d + 1]):
            bwd.add((g.queries[g.d_queries[p]], g.docs[d], int(g.d_w[p])))
    assert fwd == bwd
    assert all(w >= 1 for _, _, w in fwd)


def test_single_shared_document(backend):
    g = build_graph([QueryDocPair("qa", "u3", 2), QueryDocPair("qb", "u3", 3)])
    assert coclick_score(g, "qa", "qb") == 6


def test_two_shared_documents(backend):
    g = build_graph([QueryDocPair("qa", "u2", 1), QueryDocPair("qa", "u3", 2),
                     QueryDocPair("qb", "u2", 4), QueryDocPair("qb", "u3", 3)])
    assert coclick_score(g, "qa", "qb") == 1 * 4 + 2 * 3 == 10


def test_disconnected_queries_score_zero(five_query_pairs, backend):
    g = build_graph(five_query_pairs)
    assert coclick_score(g, "q1", "q5") == 0
    assert "q5" not in [c.query_key for c in connected_queries(g, "q1")]


def test_unknown_query(backend):
    g = build_graph([QueryDocPair("qa", "u", 1)])
    with pytest.raises(NotInGraphError, match="nope"):
        coclick_score(g, "qa", "nope")
    with pytest.raises(NotInGraphError):
        connected_queries(g, "nope")


def test_same_query_rejected():
    g = build_graph([QueryDocPair("qa", "u", 1)])
    with pytest.raises(ValueError):
        coclick_score(g, "qa", "qa")


def test_star_graph_ranking(backend):
    g = build_graph([QueryDocPair("q", "u", 2), QueryDocPair("q2", "u", 5), QueryDocPair("q3", "u", 1)])
    assert connected_queries(g, "q") == [Candidate("q2", 10), Candidate("q3", 2)]


def test_isolated_query(backend):
    g = build_graph([QueryDocPair("q", "u", 2), QueryDocPair("r", "v", 1)])
    assert connected_queries(g, "q") == []


def test_tie_broken_by_key(backend):
    g = build_graph([QueryDocPair("q", "u", 1), QueryDocPair("zeta", "u", 3), QueryDocPair("alpha", "u", 3)])
    assert [c.query_key for c in connected_queries(g, "q")] == ["alpha", "zeta"]


def test_top_k():
    cands = [Candidate(f"c{i:02d}", 20 - i) for i in range(12)]
    assert top_k(cands) == cands[:10]
    assert top_k(cands[:4]) == cands[:4]
    assert top_k([]) == []
    assert top_k(cands, 1) == cands[:1]


def test_batch_matches_single(backend):
    g = build_graph(random_pairs(random.Random(7), 30, 20))
    batch = connected_all(g)
    assert batch == {q: connected_queries(g, q) for q in g.queries}


def test_pairwise_matrix_matches_scores():
    g = build_graph(random_pairs(random.Random(8), 12, 10))
    w = pairwise_matrix(g)
    for i, a in enumerate(g.queries):
        for j, b in enumerate(g.queries):
            if i != j:
                assert w[i, j] == coclick_score(g, a, b)


def test_click_totals():
    g = build_graph([QueryDocPair("q", "u", 2), QueryDocPair("q", "v", 3), QueryDocPair("r", "v", 1)])
    assert g.click_totals() == {"q": 5, "r": 1}
    assert g.click_total("missing") == 0


def test_large_weights_stay_exact(backend):
    big = 3_000_000_000
    g = build_graph([QueryDocPair("a", "u", big), QueryDocPair("b", "u", big), QueryDocPair("a", "v", 1),
                     QueryDocPair("b", "v", 1)])
    assert coclick_score(g, "a", "b") == big * big + 1
    assert connected_queries(g, "a")[0].score == big * big + 1


graphs = st.builds(
    lambda seed, nq, nd, dens: random_pairs(random.Random(seed), nq, nd, density=dens),
    st.integers(0, 10_000), st.integers(2, 25), st.integers(1, 25), st.floats(0.02, 0.5),
)


@settings(max_examples=60, deadline=None)
@given(graphs, st.randoms(use_true_random=False))
def test_graph_properties(pairs, rnd):
    g = build_graph(pairs)
    edges = edge_dict(g.edges())
    qs = list(g.queries)
    a, b = rnd.choice(qs), rnd.choice(qs)
    if a != b:
        s = coclick_score(g, a, b)
        assert s == coclick_score(g, b, a) == brute_coclick(edges, a, b)
        shared = {d for q, d in edges if q == a} & {d for q, d in edges if q == b}
        assert (s == 0) == (not shared)
        if shared:
            d = sorted(shared)[0]
            bumped = [QueryDocPair(p.query_key, p.doc_key, p.click_count + (p.query_key == a and p.doc_key == d))
                      for p in pairs]
            assert coclick_score(build_graph(bumped), a, b) >= s
    ranked = [(c.query_key, c.score) for c in connected_queries(g, a)]
    assert ranked == brute_connected(edges, a)
    assert all(score > 0 for _, score in ranked)
    assert ranked == [(c.query_key, c.score) for c in connected_queries(g, a)]


def test_backends_agree():
    from clicksuggest import _accel

    g = build_graph(random_pairs(random.Random(11), 40, 30))
    with _accel.using_backend("numba"):
        fast = connected_all(g)
    with _accel.using_backend("numpy"):
        slow = connected_all(g)
    assert fast == slow
