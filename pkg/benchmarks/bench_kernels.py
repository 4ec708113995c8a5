"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--queries 2000] [--docs 1500] [--sentences 3000]

Both backends must produce the same result; the script checks that before
reporting timings.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from clicksuggest import _accel
from clicksuggest.embeddings import CbowConfig, train_cbow
from clicksuggest.graph import build_graph, connected_all
from clicksuggest.ingest import QueryDocPair
from clicksuggest.kernels import graph as graph_kernels


def random_graph(n_queries: int, n_docs: int, edges_per_query: int, seed: int):
    rng = np.random.default_rng(seed)
    pairs = []
    # a skewed document popularity makes co-click expansion realistic
    pop = 1.0 / np.arange(1, n_docs + 1)
    pop /= pop.sum()
    for q in range(n_queries):
        docs = np.unique(rng.choice(n_docs, edges_per_query, p=pop))
        pairs.extend(QueryDocPair(f"q{q:06d}", f"d{d:06d}", int(rng.integers(1, 10))) for d in docs)
    return build_graph(pairs)


def cluster_corpus(n_sentences: int, seed: int):
    rng = np.random.default_rng(seed)
    groups = [[f"g{g}w{i}" for i in range(50)] for g in range(8)]
    return [list(rng.choice(groups[s % 8], 12)) for s in range(n_sentences)]


def timed(fn, repeat: int):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--queries", type=int, default=2000)
    ap.add_argument("--docs", type=int, default=1500)
    ap.add_argument("--edges", type=int, default=6, help="edges drawn per query")
    ap.add_argument("--sentences", type=int, default=3000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    graph = random_graph(args.queries, args.docs, args.edges, seed=0)
    corpus = cluster_corpus(args.sentences, seed=0)
    config = CbowConfig(dim=100, epochs=1, min_count=1, seed=3)
    all_ids = np.arange(len(graph), dtype=np.int64)
    cases = [
        (f"co-click rows ({len(graph)} queries, {graph.n_edges} edges)",
         lambda: graph_kernels.coclick_rows(all_ids, *graph._csr())),
        ("co-click top-10 table (kernel + ranking)", lambda: connected_all(graph, k=10)),
        (f"CBOW epoch ({sum(map(len, corpus))} tokens, dim {config.dim})", lambda: train_cbow(corpus, config)),
    ]

    with _accel.using_backend("numba"):
        # compile outside the timed region
        connected_all(random_graph(5, 5, 2, seed=1))
        train_cbow(cluster_corpus(10, seed=1), CbowConfig(dim=4, epochs=1, min_count=1))

    print(f"{'kernel':<48} {'numba s':>9} {'numpy s':>9} {'speedup':>8}")
    for name, fn in cases:
        with _accel.using_backend("numba"):
            t_fast, fast = timed(fn, args.repeat)
        with _accel.using_backend("numpy"):
            t_slow, slow = timed(fn, 1)
        if isinstance(fast, tuple):
            assert all(np.array_equal(a, b) for a, b in zip(fast, slow)), "backends disagree"
        elif isinstance(fast, dict):
            assert fast == slow, "backends disagree"
        else:
            assert np.allclose(fast.input_vectors, slow.input_vectors, atol=1e-4), "backends disagree"
        print(f"{name:<48} {t_fast:>9.3f} {t_slow:>9.3f} {t_slow / t_fast:>7.1f}x")


if __name__ == "__main__":
    main()
