import random

import numpy as np
import pytest

from clicksuggest import _accel
from clicksuggest.embeddings import EmbeddingModel, build_centroid_index
from clicksuggest.graph import build_graph
from clicksuggest.ingest import QueryDocPair
from clicksuggest.suggest import Engine


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    with _accel.using_backend(request.param):
        yield request.param


def random_pairs(rng: random.Random, n_queries=20, n_docs=20, max_w=9, density=0.15, words=None):
    """Random clicked pairs; query keys are token strings when ``words`` is given."""
    if words:
        qs = set()
        while len(qs) < n_queries:
            qs.add(" ".join(rng.choice(words) for _ in range(rng.randint(1, 3))))
        queries = sorted(qs)
    else:
        queries = [f"q{i:02d}" for i in range(n_queries)]
    docs = [f"d{j:02d}" for j in range(n_docs)]
    pairs = []
    for q in queries:
        hit = False
        for d in docs:
            if rng.random() < density:
                pairs.append(QueryDocPair(q, d, rng.randint(1, max_w)))
                hit = True
        if not hit:
            pairs.append(QueryDocPair(q, rng.choice(docs), rng.randint(1, max_w)))
    return pairs


def random_model(rng: np.random.Generator, tokens, dim=6) -> EmbeddingModel:
    n = len(tokens)
    w_in = rng.standard_normal((n, dim)).astype(np.float32)
    w_out = rng.standard_normal((n, dim)).astype(np.float32)
    return EmbeddingModel(tuple(tokens), np.ones(n, dtype=np.int64), w_in, w_out)


WORDS = [f"w{i}" for i in range(10)]


def random_engine(seed: int, n_queries=None, oov_words=("zz",)) -> Engine:
    """Engine over a random graph whose queries are 1-3 token strings, with random word vectors."""
    rng = random.Random(seed)
    nrng = np.random.default_rng(seed)
    n_queries = n_queries or rng.randint(5, 30)
    pairs = random_pairs(rng, n_queries=n_queries, n_docs=rng.randint(3, 25), words=WORDS,
                         density=rng.uniform(0.05, 0.3))
    graph = build_graph(pairs)
    model = random_model(nrng, WORDS)
    index = build_centroid_index(model, graph.queries)
    return Engine(graph, model, index)


@pytest.fixture
def five_query_pairs():
    """Five queries, three documents: q1-q3 share u3, q1-q4 share u2 and u3, q5 shares nothing with q1."""
    return [
        QueryDocPair("q1", "u2", 1), QueryDocPair("q1", "u3", 2),
        QueryDocPair("q2", "u1", 5),
        QueryDocPair("q3", "u3", 3),
        QueryDocPair("q4", "u2", 4), QueryDocPair("q4", "u3", 3),
        QueryDocPair("q5", "u1", 2),
    ]


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, tagged via ``record_property``."""
    rows = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" not in props:
                continue
            if rep.when == "call" or rep.outcome != "passed":
                ok = rep.outcome == "passed"
                prev = rows.get(props["criterion"])
                rows[props["criterion"]] = (ok and (prev is None or prev[0]), props.get("title", ""))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for num, (ok, title) in sorted(rows.items()):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {num:>2}: {title}")
