"""On-disk engine artifacts.

Directory layout::

    manifest          JSON: format version, digests, configuration
    graph.tsv         Q<TAB>query_key<TAB>total_clicks<TAB>centroid_row<TAB>covered_tokens
                      E<TAB>query_key<TAB>doc_key<TAB>weight
    vocab.tsv         token<TAB>count, in vocabulary-id order
    vectors.bin       input and output embedding matrices (float32)
    centroids.bin     centroid matrix (float64), rows referenced from graph.tsv
    suggestions.tsv   query_key<TAB>kind<TAB>rank<TAB>suggested_key<TAB>score

Matrix files: ``b"CSMX"``, uint16 format version, uint16 bytes per value
(4 or 8), uint32 matrix count, then per matrix uint64 rows, uint64 cols and
the little-endian row-major values.  All integers little-endian.

In ``suggestions.tsv`` the kind is ``graph`` (click-existing list),
``similar`` (bridge queries of a click-absent query) or ``bridge`` (its
suggestions).  An empty list is one row with rank 0, an empty key and a
reason code in the score column.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import io
import json
import os
import struct
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable

import numpy as np

from .embeddings import CbowConfig, CentroidIndex, EmbeddingModel
from .errors import (ArtifactLockedError, IntegrityError, MissingArtifactError, MissingManifestError,
                     VersionError)
from .graph import DEFAULT_K, ClickGraph, connected_all
from .ingest import LongTailRule
from .suggest import DEFAULT_M, Engine, Kind, QueryClass, SuggestionList, Via, classify, suggest_absent, suggest_existing
from .text import NormalizationRules, key_tokens

FORMAT_VERSION = 1
MANIFEST = "manifest"
FILES = ("graph.tsv", "vocab.tsv", "vectors.bin", "centroids.bin", "suggestions.tsv")
_MAGIC = b"CSMX"
_HEADER = struct.Struct("<4sHHI")
_SHAPE = struct.Struct("<QQ")


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def encode_matrices(mats: Iterable[np.ndarray], itemsize: int) -> bytes:
    mats = list(mats)
    dtype = {4: "<f4", 8: "<f8"}[itemsize]
    buf = io.BytesIO()
    buf.write(_HEADER.pack(_MAGIC, 1, itemsize, len(mats)))
    for m in mats:
        m = np.asarray(m)
        if m.ndim != 2:
            raise ValueError("only 2-D matrices can be encoded")
        buf.write(_SHAPE.pack(*m.shape))
        buf.write(np.ascontiguousarray(m, dtype=dtype).tobytes())
    return buf.getvalue()


def decode_matrices(data: bytes) -> list[np.ndarray]:
    if len(data) < _HEADER.size:
        raise IntegrityError("matrix file truncated")
    magic, version, itemsize, count = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC or itemsize not in (4, 8):
        raise IntegrityError("not a matrix file")
    if version > 1:
        raise VersionError(f"matrix format {version} is newer than supported")
    dtype = np.dtype("<f4" if itemsize == 4 else "<f8")
    pos = _HEADER.size
    out = []
    for _ in range(count):
        rows, cols = _SHAPE.unpack_from(data, pos)
        pos += _SHAPE.size
        n = rows * cols * itemsize
        if pos + n > len(data):
            raise IntegrityError("matrix file truncated")
        mat = np.frombuffer(data, dtype=dtype, count=rows * cols, offset=pos).reshape(rows, cols)
        out.append(mat.astype(dtype.newbyteorder("="), copy=True))
        pos += n
    return out


def _fmt_score(kind: str, score) -> str:
    return str(int(score)) if kind == "graph" else repr(float(score))


def suggestion_rows(table: dict[str, SuggestionList]) -> Iterable[str]:
    for key in sorted(table):
        sl = table[key]
        if sl.query_class.kind is Kind.EXISTING:
            lists = [("graph", sl.items, "no_candidates")]
        else:
            reason = sl.warning or "no_candidates"
            lists = [("similar", sl.similar, reason), ("bridge", sl.items, reason)]
        for kind, items, reason in lists:
            if not items:
                yield f"{key}\t{kind}\t0\t\t{reason}\n"
            for rank, (s, score) in enumerate(items, start=1):
                yield f"{key}\t{kind}\t{rank}\t{s}\t{_fmt_score(kind, score)}\n"


def encode_suggestions(table: dict[str, SuggestionList]) -> bytes:
    return "".join(suggestion_rows(table)).encode("utf-8")


def decode_suggestions(text: str, engine: Engine) -> dict[str, SuggestionList]:
    raw: dict[str, dict[str, list]] = {}
    reasons: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise IntegrityError(f"suggestions.tsv line {line_no}: expected 5 fields")
        key, kind, rank, s, score = parts
        lists = raw.setdefault(key, {})
        lists.setdefault(kind, [])
        if rank == "0":
            reasons[key] = score
            continue
        lists[kind].append((s, int(score) if kind == "graph" else float(score)))
    table = {}
    for key, lists in raw.items():
        tokens = key_tokens(key)
        if "graph" in lists:
            qclass = classify(tokens, engine.graph, engine.click_totals, engine.long_tail_rule)
            table[key] = SuggestionList(key, qclass, tuple(lists["graph"]), Via.GRAPH)
        else:
            warning = "no_coverage" if reasons.get(key) == "no_coverage" else None
            qclass = QueryClass(Kind.ABSENT, engine.long_tail_rule(len(tokens), 0))
            table[key] = SuggestionList(key, qclass, tuple(lists.get("bridge", ())), Via.EMBEDDING,
                                        similar=tuple(lists.get("similar", ())), warning=warning)
    return table


def precompute_suggestions(engine: Engine, queries: Iterable[str] | None = None,
                           m: int = DEFAULT_M, k: int = DEFAULT_K) -> dict[str, SuggestionList]:
    """Suggestion lists for every graph query and every observed click-absent query.

    ``queries`` defaults to ``engine.absent_queries``; graph queries are
    always included.
    """
    table: dict[str, SuggestionList] = {}
    ranked = connected_all(engine.graph, k=k)
    for key, cands in ranked.items():
        qclass = classify(key_tokens(key), engine.graph, engine.click_totals, engine.long_tail_rule)
        table[key] = SuggestionList(key, qclass, tuple((c.query_key, c.score) for c in cands), Via.GRAPH)
    for key in (engine.absent_queries if queries is None else queries):
        if key in table:
            continue
        if key in engine.graph:
            table[key] = suggest_existing(engine, key, k)
        else:
            table[key] = suggest_absent(engine, key_tokens(key), m, k)
    return table


def _graph_tsv(engine: Engine) -> bytes:
    rows = {k: i for i, k in enumerate(engine.index.keys)}
    out = io.StringIO()
    totals = engine.click_totals
    for q in engine.graph.queries:
        r = rows.get(q, -1)
        cov = int(engine.index.covered[r]) if r >= 0 else 0
        out.write(f"Q\t{q}\t{totals[q]}\t{r}\t{cov}\n")
    for q, d, w in engine.graph.edges():
        out.write(f"E\t{q}\t{d}\t{w}\n")
    return out.getvalue().encode("utf-8")


def _vocab_tsv(model: EmbeddingModel) -> bytes:
    return "".join(f"{t}\t{int(c)}\n" for t, c in zip(model.tokens, model.counts)).encode("utf-8")


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


@contextmanager
def _write_lock(directory: Path):
    lock = directory / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ArtifactLockedError(f"{directory} is being written by another process ({lock} exists)") from None
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {lock}: {exc.strerror}") from exc
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def save_engine(engine: Engine, directory: str | Path, table: dict[str, SuggestionList] | None = None,
                source_digest: str = "", m: int = DEFAULT_M, k: int = DEFAULT_K,
                cbow_config: CbowConfig | None = None) -> dict:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create {directory}: {exc.strerror}") from exc
    if table is None:
        table = engine.table if engine.table is not None else precompute_suggestions(engine, m=m, k=k)
    blobs = {
        "graph.tsv": _graph_tsv(engine),
        "vocab.tsv": _vocab_tsv(engine.model),
        "vectors.bin": encode_matrices([engine.model.input_vectors, engine.model.output_vectors], 4),
        "centroids.bin": encode_matrices([engine.index.matrix], 8),
        "suggestions.tsv": encode_suggestions(table),
    }
    manifest = {
        "format_version": FORMAT_VERSION,
        "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "source_log_digest": source_digest,
        "files": {name: sha256_bytes(data) for name, data in blobs.items()},
        "cbow_config": cbow_config.to_dict() if cbow_config else None,
        "normalization": engine.rules.to_dict(),
        "long_tail_rule": {"min_words_exclusive": engine.long_tail_rule.min_words_exclusive,
                           "max_clicks_exclusive": engine.long_tail_rule.max_clicks_exclusive},
        "centroid_mode": engine.centroid_mode,
        "m": m,
        "k": k,
    }
    with _write_lock(directory):
        for name, data in blobs.items():
            _atomic_write(directory / name, data)
        _atomic_write(directory / MANIFEST, json.dumps(manifest, ensure_ascii=False, indent=2).encode("utf-8"))
    return manifest


def read_manifest(directory: str | Path) -> tuple[dict, str]:
    path = Path(directory) / MANIFEST
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise MissingManifestError(f"no manifest in {directory}") from None
    try:
        manifest = json.loads(data)
        version = int(manifest["format_version"])
    except (ValueError, KeyError, TypeError) as exc:
        raise IntegrityError(f"unreadable manifest {path}: {exc}") from None
    if version > FORMAT_VERSION:
        raise VersionError(f"artifact format {version} is newer than supported {FORMAT_VERSION}")
    return manifest, sha256_bytes(data)


def load_engine(directory: str | Path, segmenter=None) -> Engine:
    """Load and verify every artifact before building any state."""
    directory = Path(directory)
    manifest, digest = read_manifest(directory)
    blobs = {}
    for name in FILES:
        path = directory / name
        if not path.exists():
            raise MissingArtifactError(f"missing artifact {path}")
        data = path.read_bytes()
        expected = manifest.get("files", {}).get(name)
        if expected != sha256_bytes(data):
            raise IntegrityError(f"digest mismatch for {path}")
        blobs[name] = data

    tokens, counts = [], []
    for line in blobs["vocab.tsv"].decode("utf-8").splitlines():
        t, c = line.split("\t")
        tokens.append(t)
        counts.append(int(c))
    w_in, w_out = decode_matrices(blobs["vectors.bin"])
    model = EmbeddingModel(tuple(tokens), np.array(counts, dtype=np.int64), w_in, w_out)

    (cent,) = decode_matrices(blobs["centroids.bin"])
    queries, edges, idx_keys, idx_rows, idx_cov = [], [], [], [], []
    for line in blobs["graph.tsv"].decode("utf-8").splitlines():
        parts = line.split("\t")
        if parts[0] == "Q":
            queries.append(parts[1])
            row = int(parts[3])
            if row >= 0:
                idx_keys.append(parts[1])
                idx_rows.append(row)
                idx_cov.append(int(parts[4]))
        elif parts[0] == "E":
            edges.append((parts[1], parts[2], int(parts[3])))
    docs = sorted({d for _, d, _ in edges})
    qid = {q: i for i, q in enumerate(queries)}
    did = {d: i for i, d in enumerate(docs)}
    graph = ClickGraph(queries, docs, np.array([(qid[q], did[d], w) for q, d, w in edges], dtype=np.int64))
    index = CentroidIndex(idx_keys, cent[idx_rows] if idx_rows else cent, idx_cov)

    ltr = manifest.get("long_tail_rule") or {}
    engine = Engine(graph, model, index,
                    rules=NormalizationRules.from_dict(manifest.get("normalization", {}), segmenter),
                    long_tail_rule=LongTailRule(**ltr),
                    centroid_mode=manifest.get("centroid_mode", "mean"),
                    manifest=dict(manifest, digest=digest))
    engine.table = decode_suggestions(blobs["suggestions.tsv"].decode("utf-8"), engine)
    engine.absent_queries = tuple(sorted(k for k, v in engine.table.items() if v.query_class.kind is Kind.ABSENT))
    return engine
