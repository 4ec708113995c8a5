"""Acceptance gate: one test per criterion, each reported as PASS/FAIL in the summary."""

import json
import random
import time
import urllib.error
import urllib.request
from contextlib import contextmanager
from pathlib import Path
from urllib.parse import quote

import numpy as np
import pytest

from clicksuggest.cli import main
from clicksuggest.embeddings import (CbowConfig, build_centroid_index, cbow_loss_and_grads, cosine,
                                     query_centroid, train_cbow, word_vector)
from clicksuggest.evaluation import AnnotationRecord, aggregate
from clicksuggest.graph import build_graph, coclick_score, connected_queries
from clicksuggest.ingest import QueryDocPair, RawLogRecord, aggregate_pairs
from clicksuggest.service import ServeConfig, make_server, serve_in_thread
from clicksuggest.store import load_engine, precompute_suggestions, save_engine
from clicksuggest.suggest import Engine, Kind, build_engine, suggest, suggest_absent, suggest_existing

from conftest import WORDS, random_engine, random_pairs
from formats import from_records, from_service
from oracles import brute_all_pairs, edge_dict, naive_bridge, naive_centroid, naive_nearest
from synth import synthetic_log

pytestmark = pytest.mark.acceptance

DATA = Path(__file__).parent / "data"


@pytest.fixture
def criterion(record_property):
    def tag(num, title):
        record_property("criterion", num)
        record_property("title", title)
    return tag


@contextmanager
def within(seconds):
    t0 = time.perf_counter()
    yield
    elapsed = time.perf_counter() - t0
    assert elapsed < seconds, f"took {elapsed:.1f}s, budget {seconds}s"


def test_c01_coclick_oracle(criterion):
    criterion(1, "co-click scores and rankings equal brute force on 200 random graphs")
    with within(10):
        for seed in range(200):
            rng = random.Random(seed)
            pairs = random_pairs(rng, rng.randint(1, 50), rng.randint(1, 50), max_w=9, density=rng.uniform(0.02, 0.3))
            g = build_graph(pairs)
            edges = edge_dict(g.edges())
            want = brute_all_pairs(edges)
            for (a, b), w in want.items():
                assert coclick_score(g, a, b) == w
            for q in g.queries:
                ranked = [(c.query_key, c.score) for c in connected_queries(g, q)]
                expect = sorted(((b, w) for (a, b), w in want.items() if a == q and w > 0), key=lambda t: (-t[1], t[0]))
                assert ranked == expect


def test_c02_two_query_example_topology(criterion):
    criterion(2, "five-query / three-document topology: product-sum structure and zero for disjoint queries")
    rng = random.Random(2)
    for _ in range(50):
        e12, e13, e21, e33, e42, e43, e51 = (rng.randint(1, 9) for _ in range(7))
        g = build_graph([QueryDocPair("q1", "u2", e12), QueryDocPair("q1", "u3", e13), QueryDocPair("q2", "u1", e21),
                         QueryDocPair("q3", "u3", e33), QueryDocPair("q4", "u2", e42), QueryDocPair("q4", "u3", e43),
                         QueryDocPair("q5", "u1", e51)])
        assert coclick_score(g, "q1", "q3") == e13 * e33
        assert coclick_score(g, "q1", "q4") == e12 * e42 + e13 * e43
        assert coclick_score(g, "q1", "q5") == 0
        assert "q5" not in {c.query_key for c in connected_queries(g, "q1")}


def _numeric(fn, w, eps=1e-6):
    g = np.zeros_like(w)
    for idx in np.ndindex(w.shape):
        old = w[idx]
        w[idx] = old + eps
        up = fn()
        w[idx] = old - eps
        g[idx] = (up - fn()) / (2 * eps)
        w[idx] = old
    return g


def test_c03_gradient_check(criterion):
    criterion(3, "CBOW analytic gradients match central finite differences (rel < 1e-4)")
    with within(5):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            w_in, w_out = rng.normal(0, 0.5, (8, 6)), rng.normal(0, 0.5, (8, 6))
            ctx = list(rng.integers(0, 8, rng.integers(1, 6)))
            target, negs = int(rng.integers(0, 8)), list(rng.integers(0, 8, 5))

            def loss():
                return cbow_loss_and_grads(w_in, w_out, ctx, target, negs)[0]

            _, g_in, g_out = cbow_loss_and_grads(w_in, w_out, ctx, target, negs)
            for analytic, numeric in ((g_in, _numeric(loss, w_in)), (g_out, _numeric(loss, w_out))):
                denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
                assert np.linalg.norm(analytic - numeric) / denom < 1e-4


def test_c04_embedding_separation(criterion):
    criterion(4, "two-cluster corpus separates under default training for >= 9 of 10 seeds")
    wins = 0
    with within(60):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            a = [f"a{i}" for i in range(20)]
            b = [f"b{i}" for i in range(20)]
            corpus = [list(rng.choice(a if i % 2 else b, 10)) for i in range(2000)]
            m = train_cbow(corpus, CbowConfig(seed=seed + 1))
            vec = {t: word_vector(m, t) for t in a + b}
            intra = np.mean([cosine(vec[x], vec[y]) for grp in (a, b) for x in grp for y in grp if x != y])
            inter = np.mean([cosine(vec[x], vec[y]) for x in a for y in b])
            wins += intra > inter
    assert wins >= 9


def test_c05_centroid_exactness(criterion):
    criterion(5, "centroids equal component-wise means; mean and sum centroids rank identically")
    for seed in range(30):
        rng = np.random.default_rng(seed)
        model = random_engine(seed).model
        vecs = {t: model.input_vectors[model.index(t)] for t in WORDS}
        for _ in range(20):
            toks = list(rng.choice(WORDS, rng.integers(1, 7)))
            got = query_centroid(model, toks).vector
            assert np.max(np.abs(got - np.mean([vecs[t].astype(np.float64) for t in toks], axis=0))) <= 1e-9
            assert np.max(np.abs(got - naive_centroid(vecs, toks))) <= 1e-9
        for t in WORDS:
            assert np.array_equal(query_centroid(model, [t]).vector, vecs[t].astype(np.float64))
        keys = sorted({" ".join(rng.choice(WORDS, rng.integers(1, 5))) for _ in range(25)})
        probe = list(rng.choice(WORDS, rng.integers(1, 4)))
        mean, total = (build_centroid_index(model, keys, mode).nearest(query_centroid(model, probe, mode), len(keys))
                       for mode in ("mean", "sum"))
        assert {k for k, _ in mean} == {k for k, _ in total}
        score = dict(mean)
        pos = {k: i for i, (k, _) in enumerate(total)}
        for i, (x, sx) in enumerate(mean):
            for y, _ in mean[i + 1:]:
                if pos[x] > pos[y]:
                    # only keys tied in exact arithmetic (e.g. "a" and "a a") may swap
                    assert abs(sx - score[y]) <= 1e-12


def _naive_absent(eng, tokens, m, k):
    vecs = {t: eng.model.input_vectors[eng.model.index(t)] for t in eng.model.tokens}
    key = " ".join(tokens)
    probe = naive_centroid(vecs, tokens)
    if probe is None:
        return []
    cents = {q: naive_centroid(vecs, q.split()) for q in eng.graph.queries}
    similar = naive_nearest({q: c for q, c in cents.items() if c is not None}, key, probe, m)
    return naive_bridge(edge_dict(eng.graph.edges()), similar, key, k)


def test_c06_absent_pipeline_oracle(criterion):
    criterion(6, "click-absent suggestions equal a naive reference on 100 random engines")
    for seed in range(100):
        eng = random_engine(seed)
        assert len(eng.graph) <= 30
        rng = random.Random(seed)
        m, k = rng.randint(1, 6), rng.randint(1, 10)
        for _ in range(10):
            toks = [rng.choice(WORDS + ["zz"]) for _ in range(rng.randint(1, 4))]
            if " ".join(toks) in eng.graph:
                continue
            got = suggest_absent(eng, toks, m, k).items
            want = _naive_absent(eng, toks, m, k)
            assert [c for c, _ in got] == [c for c, _ in want]
            np.testing.assert_allclose([s for _, s in got], [s for _, s in want], rtol=1e-9)
        for s in eng.graph.queries:
            out = suggest_absent(eng, s.split() + ["zz"], m=1, k=10)
            (bridge, sim), = out.similar
            assert sim == 1.0
            direct = suggest_existing(eng, bridge, k=10).items
            assert out.items == tuple((c, float(w)) for c, w in direct if c != out.source_query)


def test_c07_click_scaling_invariance(criterion):
    criterion(7, "scaling every click count by c keeps orderings and scales scores by c^2")
    for seed in range(50):
        eng = random_engine(seed)
        c = 2 + seed % 8
        scaled = Engine(eng.graph.scaled(c), eng.model, eng.index)
        rng = random.Random(seed)
        probes = list(eng.graph.queries) + [" ".join(rng.choice(WORDS) for _ in range(3)) for _ in range(10)]
        for q in probes:
            a, b = suggest(q, eng), suggest(q, scaled)
            assert [s for s, _ in a.items] == [s for s, _ in b.items]
            np.testing.assert_allclose([w * c * c for _, w in a.items], [w for _, w in b.items], rtol=1e-12)


def _scores(values):
    # 20 queries x 5 suggestions, one annotator per row
    return [AnnotationRecord(f"q{i // 5}", f"s{i % 5}", f"a{i % 4}", v) for i, v in enumerate(values)]


def test_c08_evaluation_arithmetic(criterion):
    criterion(8, "mean scores 3.98 and 3.21 map to 79% and 64%")
    existing = aggregate(_scores([4] * 98 + [3] * 2), Kind.EXISTING)
    absent = aggregate(_scores([4] * 21 + [3] * 79), Kind.ABSENT)
    assert existing.n_queries == absent.n_queries == 20
    assert existing.mean_score == 3.98 and existing.correlation_pct == 79
    assert absent.mean_score == 3.21 and absent.correlation_pct == 64


def test_c09_round_trip_cache_coherence(criterion, tmp_path):
    criterion(9, "reloaded engine gives byte-identical output that matches the precomputed table")
    recs = []
    for line in synthetic_log(9, 3000):
        q, t, c = line.rstrip("\n").split("\t")
        recs.append(RawLogRecord(q, t, c == "1"))
    pairs = aggregate_pairs(recs)
    eng = build_engine(pairs, CbowConfig(dim=32, epochs=3))
    eng.table = precompute_suggestions(eng)
    rng = random.Random(9)
    in_table = sorted(eng.table)
    probes = rng.sample(in_table, 70) + [" ".join(rng.choice(["java", "git", "kernel", "数", "howto", "zzz"])
                                                  for _ in range(rng.randint(1, 4))) for _ in range(30)]
    before = [suggest(q, eng).to_json() for q in probes]
    save_engine(eng, tmp_path)
    again = load_engine(tmp_path)
    assert [suggest(q, again).to_json() for q in probes] == before
    for q, js in zip(probes, before):
        if q in again.table:
            assert again.table[q].to_json() == js


def test_c10_build_determinism(criterion, tmp_path):
    criterion(10, "two builds with the same seed give byte-identical suggestions.tsv")
    (tmp_path / "log.tsv").write_text("".join(synthetic_log(10, 5000)), encoding="utf-8")
    with within(120):
        assert main(["ingest", "--log", str(tmp_path / "log.tsv"), "--pairs", str(tmp_path / "pairs.tsv")]) == 0
        for name in ("a", "b"):
            assert main(["build", "--pairs", str(tmp_path / "pairs.tsv"), "--artifacts", str(tmp_path / name),
                         "--seed", "7"]) == 0
    a = (tmp_path / "a" / "suggestions.tsv").read_bytes()
    assert a and a == (tmp_path / "b" / "suggestions.tsv").read_bytes()


def _http(base, path):
    try:
        with urllib.request.urlopen(base + path, timeout=10) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


def test_c11_service_matches_cli(criterion, tmp_path, capsys):
    criterion(11, "HTTP /suggest equals CLI output for 50 fixture queries; malformed requests get 400")
    (tmp_path / "log.tsv").write_text("".join(synthetic_log(10, 5000)), encoding="utf-8")
    art = tmp_path / "art"
    assert main(["ingest", "--log", str(tmp_path / "log.tsv"), "--pairs", str(tmp_path / "pairs.tsv")]) == 0
    assert main(["build", "--pairs", str(tmp_path / "pairs.tsv"), "--artifacts", str(art), "--dim", "32"]) == 0
    queries = (DATA / "service_queries.txt").read_text(encoding="utf-8").splitlines()
    assert len(queries) == 50
    server = make_server(ServeConfig(port=0, artifacts=str(art)))
    serve_in_thread(server)
    base = f"http://127.0.0.1:{server.server_address[1]}"
    try:
        kinds = set()
        for q in queries:
            capsys.readouterr()
            assert main(["suggest", "--artifacts", str(art), "--format", "records", q]) == 0
            cli_view = from_records(capsys.readouterr().out)
            status, body = _http(base, f"/suggest?q={quote(q)}")
            assert status == 200
            assert from_service(body) == cli_view
            kinds.add(body["via"])
        assert kinds == {"graph", "embedding"}
        for bad in ("/suggest", "/suggest?q=", "/suggest?q=%21%21%21", "/suggest?q=java&k=0", "/suggest?q=java&k=ten",
                    "/suggest?q=java&m=-2"):
            assert _http(base, bad)[0] == 400
    finally:
        server.shutdown()
        server.server_close()
