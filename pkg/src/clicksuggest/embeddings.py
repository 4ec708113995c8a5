"""CBOW word embeddings, query centroids and exact nearest-query search."""

from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateVectorError, EmptyIndexError, NoCoverageError, TrainingError
from .kernels import cbow as _cbow
from .kernels import scan as _scan

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CbowConfig:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    min_count: int = 2
    seed: int = 1
    sample: float = 0.0  # frequent-token subsampling threshold; 0 disables
    workers: int = 1  # >1 trades determinism for lock-free parallel updates

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.epochs < 1 or self.min_count < 1:
            raise ValueError("dim, window, epochs and min_count must be >= 1")
        if self.negatives < 0:
            raise ValueError("negatives must be >= 0")
        if not (0 < self.min_learning_rate <= self.learning_rate):
            raise ValueError("need 0 < min_learning_rate <= learning_rate")
        if self.sample < 0 or self.workers < 1:
            raise ValueError("sample must be >= 0 and workers >= 1")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "CbowConfig":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for k, v in d.items():
            k = k.strip().replace("-", "_")
            if k not in known:
                raise ValueError(f"unknown CBOW option {k!r}")
            kwargs[k] = float(v) if k in ("learning_rate", "min_learning_rate", "sample") else int(v)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "CbowConfig":
        """Parse a ``key=value`` text file; ``#`` starts a comment."""
        d = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                k, sep, v = line.partition("=")
                if not sep:
                    raise ValueError(f"expected key=value, got {line!r}")
                d[k.strip()] = v.strip()
        return cls.from_dict(d)


@dataclass(eq=False)
class EmbeddingModel:
    tokens: tuple[str, ...]
    counts: np.ndarray
    input_vectors: np.ndarray
    output_vectors: np.ndarray
    epoch_losses: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        self._index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def index(self, token: str) -> int | None:
        return self._index.get(token)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingModel):
            return NotImplemented
        return (self.tokens == other.tokens and np.array_equal(self.counts, other.counts)
                and np.array_equal(self.input_vectors, other.input_vectors)
                and np.array_equal(self.output_vectors, other.output_vectors))


def build_vocab(corpus: Iterable[Sequence[str]], min_count: int) -> tuple[list[list[str]], list[str], np.ndarray]:
    sentences = [list(s) for s in corpus]
    freq = Counter(t for s in sentences for t in s)
    kept = sorted((t for t, c in freq.items() if c >= min_count), key=lambda t: (-freq[t], t))
    return sentences, kept, np.array([freq[t] for t in kept], dtype=np.int64)


def _negative_table(counts: np.ndarray, power: float = 0.75) -> np.ndarray:
    p = counts.astype(np.float64) ** power
    cum = np.cumsum(p / p.sum())
    cum[-1] = 1.0
    return cum


def _keep_probabilities(counts: np.ndarray, sample: float) -> np.ndarray:
    if sample <= 0:
        return np.empty(0, dtype=np.float64)
    threshold = sample * counts.sum()
    c = counts.astype(np.float64)
    return np.minimum(1.0, (np.sqrt(c / threshold) + 1.0) * threshold / c)


def _encode(sentences, index) -> tuple[np.ndarray, np.ndarray]:
    ids, offsets = [], [0]
    for s in sentences:
        enc = [index[t] for t in s if t in index]
        if enc:
            ids.extend(enc)
            offsets.append(len(ids))
    return np.array(ids, dtype=np.int64), np.array(offsets, dtype=np.int64)


def train_cbow(corpus: Iterable[Sequence[str]], config: CbowConfig = CbowConfig()) -> EmbeddingModel:
    """Train CBOW with negative sampling.

    With ``workers == 1`` the result is a pure function of corpus, config and
    seed.  With more workers, sentence shards are trained concurrently
    against shared matrices without locking, and runs are not reproducible.
    """
    sentences, vocab, counts = build_vocab(corpus, config.min_count)
    if not vocab:
        raise TrainingError(f"no token occurs at least {config.min_count} time(s)")
    index = {t: i for i, t in enumerate(vocab)}
    tokens, offsets = _encode(sentences, index)

    rng = np.random.default_rng(config.seed)
    w_in = ((rng.random((len(vocab), config.dim)) - 0.5) / config.dim).astype(np.float32)
    w_out = np.zeros((len(vocab), config.dim), dtype=np.float32)
    cum = _negative_table(counts)
    keep = _keep_probabilities(counts, config.sample)

    n_sent = len(offsets) - 1
    workers = max(1, min(config.workers, n_sent))
    bounds = np.linspace(0, n_sent, workers + 1).astype(np.int64)
    shards = []
    for w in range(workers):
        lo, hi = bounds[w], bounds[w + 1]
        off = offsets[lo:hi + 1]
        shard_tokens = tokens[off[0]:off[-1]]
        seed_state = (config.seed * 1_000_003 + w) & ((1 << 64) - 1)
        shards.append({
            "tokens": shard_tokens,
            "offsets": off - off[0],
            "state": np.array([seed_state], dtype=np.uint64),
            "total": float(max(1, config.epochs * len(shard_tokens))),
            "done": 0,
        })

    def run(shard, stats):
        shard["done"] = _cbow.train_epoch(
            shard["tokens"], shard["offsets"], w_in, w_out, cum, keep, config.window, config.negatives,
            config.learning_rate, config.min_learning_rate, shard["done"], shard["total"], shard["state"], stats)

    losses = []
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for epoch in range(config.epochs):
            stats = [np.zeros(2) for _ in shards]
            if pool is None:
                run(shards[0], stats[0])
            else:
                list(pool.map(run, shards, stats))
            total = sum(s for s in stats)
            losses.append(float(total[0] / total[1]) if total[1] else float("nan"))
            log.debug("epoch %d mean loss %.6f", epoch + 1, losses[-1])
    finally:
        if pool is not None:
            pool.shutdown()
    if not (np.isfinite(w_in).all() and np.isfinite(w_out).all()):
        raise TrainingError("training diverged (non-finite weights)")
    return EmbeddingModel(tuple(vocab), counts, w_in, w_out, tuple(losses))


def cbow_loss_and_grads(w_in: np.ndarray, w_out: np.ndarray, context: Sequence[int], target: int,
                        negatives: Sequence[int]) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss and analytic gradients for one CBOW negative-sampling example.

    Returns ``(loss, d_loss/d_w_in, d_loss/d_w_out)`` as dense arrays shaped
    like the weights.  Computed in float64.
    """
    w_in = np.asarray(w_in, dtype=np.float64)
    w_out = np.asarray(w_out, dtype=np.float64)
    ctx = np.asarray(context, dtype=np.int64)
    samples = np.concatenate(([target], np.asarray(negatives, dtype=np.int64))).astype(np.int64)
    labels = np.zeros(len(samples))
    labels[0] = 1.0
    h = w_in[ctx].mean(axis=0)
    f = w_out[samples] @ h
    loss = float(np.sum(np.logaddexp(0.0, np.where(labels > 0.5, -f, f))))
    dl_df = 1.0 / (1.0 + np.exp(-f)) - labels
    grad_out = np.zeros_like(w_out)
    np.add.at(grad_out, samples, np.outer(dl_df, h))
    grad_h = dl_df @ w_out[samples]
    grad_in = np.zeros_like(w_in)
    np.add.at(grad_in, ctx, np.broadcast_to(grad_h / len(ctx), (len(ctx), w_in.shape[1])))
    return loss, grad_in, grad_out


def word_vector(model: EmbeddingModel, token: str) -> np.ndarray | None:
    i = model.index(token) if token else None
    return None if i is None else model.input_vectors[i]


@dataclass(frozen=True, eq=False)
class QueryCentroid:
    query_key: str
    vector: np.ndarray
    covered_tokens: int


def query_centroid(model: EmbeddingModel, tokens: Sequence[str], mode: str = "mean",
                   query_key: str | None = None) -> QueryCentroid:
    """Mean (or sum) of the input vectors of the in-vocabulary tokens.

    Terms are accumulated in vocabulary-id order with integer multiplicities,
    which makes the result bitwise invariant to token order and to repeating
    the whole token list.
    """
    if mode not in ("mean", "sum"):
        raise ValueError(f"unknown centroid mode {mode!r}")
    ids = [i for i in (model.index(t) for t in tokens) if i is not None]
    key = " ".join(tokens) if query_key is None else query_key
    if not ids:
        raise NoCoverageError(f"no in-vocabulary token in {key!r}")
    uniq, mult = np.unique(np.array(ids, dtype=np.int64), return_counts=True)
    vec = np.zeros(model.dim, dtype=np.float64)
    for i, c in zip(uniq, mult):
        vec += model.input_vectors[i].astype(np.float64) * float(c)
    if mode == "mean":
        vec /= float(len(ids))
    return QueryCentroid(key, vec, len(ids))


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("vectors differ in length")
    aa, bb = float(np.dot(a, a)), float(np.dot(b, b))
    if aa == 0.0 or bb == 0.0:
        raise DegenerateVectorError("cosine of a zero-norm vector")
    return max(-1.0, min(1.0, float(np.dot(a, b)) / math.sqrt(aa * bb)))


class CentroidIndex:
    """Dense centroid matrix with keys kept in ascending order."""

    def __init__(self, keys: Sequence[str], matrix: np.ndarray, covered: Sequence[int]):
        order = sorted(range(len(keys)), key=lambda i: keys[i])
        self.keys = tuple(keys[i] for i in order)
        mat = np.asarray(matrix, dtype=np.float64)
        mat = mat.reshape(len(keys), -1) if len(keys) else mat.reshape(0, mat.shape[-1] if mat.ndim == 2 else 0)
        self.matrix = np.ascontiguousarray(mat[order])
        self.covered = np.asarray(covered, dtype=np.int64)[order]
        self._self = _scan.self_dots(self.matrix) if len(self.keys) else np.zeros(0)
        self._pos = {k: i for i, k in enumerate(self.keys)}
        self.matrix.setflags(write=False)

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key: str) -> bool:
        return key in self._pos

    def centroid(self, key: str) -> QueryCentroid:
        i = self._pos[key]
        return QueryCentroid(key, self.matrix[i], int(self.covered[i]))

    def __iter__(self):
        return (self.centroid(k) for k in self.keys)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CentroidIndex):
            return NotImplemented
        return (self.keys == other.keys and np.array_equal(self.matrix, other.matrix)
                and np.array_equal(self.covered, other.covered))

    @classmethod
    def from_centroids(cls, centroids: Iterable[QueryCentroid]) -> "CentroidIndex":
        cs = list(centroids)
        dim = len(cs[0].vector) if cs else 0
        mat = np.array([c.vector for c in cs], dtype=np.float64).reshape(len(cs), dim)
        return cls([c.query_key for c in cs], mat, [c.covered_tokens for c in cs])

    def nearest(self, probe: QueryCentroid, m: int) -> list[tuple[str, float]]:
        if not len(self.keys):
            raise EmptyIndexError("centroid index is empty")
        if m < 1:
            raise ValueError("m must be positive")
        sims = _scan.cosine_scan(self.matrix, self._self, probe.vector)
        order = np.argsort(-sims, kind="stable")
        out = []
        for i in order:
            key = self.keys[i]
            if key == probe.query_key:
                continue
            out.append((key, float(sims[i])))
            if len(out) == m:
                break
        return out


def build_centroid_index(model: EmbeddingModel, query_keys: Iterable[str], mode: str = "mean") -> CentroidIndex:
    """Index every query with at least one in-vocabulary token and non-zero centroid."""
    cs = []
    for key in query_keys:
        try:
            c = query_centroid(model, key.split(" "), mode, query_key=key)
        except NoCoverageError:
            continue
        if np.any(c.vector):
            cs.append(c)
    return CentroidIndex.from_centroids(cs)


def nearest_graph_queries(index: CentroidIndex, probe: QueryCentroid, m: int) -> list[tuple[str, float]]:
    return index.nearest(probe, m)
