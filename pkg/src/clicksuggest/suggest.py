"""Query classification and the two suggestion paths.

Click-existing queries are answered straight from the click graph.
Click-absent queries go through an embedding bridge: find the in-graph
queries whose centroids are nearest, then harvest *their* co-click
neighbours, weighting each bridge's scores by its cosine similarity.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .embeddings import CbowConfig, CentroidIndex, EmbeddingModel, build_centroid_index, query_centroid, train_cbow
from .errors import NoCoverageError, UnclassifiableQueryError, WrongPathError
from .graph import DEFAULT_K, ClickGraph, build_graph, connected_queries, top_k
from .ingest import LongTailRule, PairCollection, training_corpus
from .text import NormalizationRules, key_tokens, normalize

DEFAULT_M = 5


class Kind(str, enum.Enum):
    EXISTING = "existing"
    ABSENT = "absent"


class Via(str, enum.Enum):
    GRAPH = "graph"
    EMBEDDING = "embedding"


@dataclass(frozen=True)
class QueryClass:
    kind: Kind
    long_tail: bool


@dataclass(frozen=True)
class SuggestionList:
    source_query: str
    query_class: QueryClass
    items: tuple[tuple[str, float], ...]
    generated_via: Via
    # bridge queries and their cosine similarity (embedding path only)
    similar: tuple[tuple[str, float], ...] = ()
    warning: str | None = None
    enriched: bool = False

    def to_dict(self) -> dict:
        return {
            "query": self.source_query,
            "class": self.query_class.kind.value,
            "long_tail": self.query_class.long_tail,
            "via": self.generated_via.value,
            "similar": [[k, s] for k, s in self.similar],
            "suggestions": [[k, s] for k, s in self.items],
            "warning": self.warning,
            "enriched": self.enriched,
        }

    def to_json(self) -> str:
        """Canonical serialization; floats use shortest round-trip repr."""
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, separators=(",", ":"))


@dataclass(eq=False)
class Engine:
    graph: ClickGraph
    model: EmbeddingModel
    index: CentroidIndex
    rules: NormalizationRules = field(default_factory=NormalizationRules)
    long_tail_rule: LongTailRule = field(default_factory=LongTailRule)
    centroid_mode: str = "mean"
    # observed queries that never received a click
    absent_queries: tuple[str, ...] = ()
    # precomputed suggestion table and manifest, set when loaded from disk
    table: dict[str, SuggestionList] | None = None
    manifest: dict | None = None

    def __post_init__(self):
        self.click_totals = self.graph.click_totals()


def build_engine(pairs: PairCollection, config: CbowConfig = CbowConfig(),
                 rules: NormalizationRules | None = None, centroid_mode: str = "mean",
                 long_tail_rule: LongTailRule = LongTailRule()) -> Engine:
    graph = build_graph(pairs)
    model = train_cbow(training_corpus(pairs), config)
    index = build_centroid_index(model, graph.queries, centroid_mode)
    absent = tuple(sorted(q for q, c in pairs.query_clicks().items() if c == 0))
    return Engine(graph, model, index, rules or NormalizationRules(), long_tail_rule, centroid_mode, absent)


def classify(query_tokens: Sequence[str], graph: ClickGraph, click_totals: dict[str, int],
             long_tail_rule: LongTailRule = LongTailRule()) -> QueryClass:
    if not query_tokens:
        raise UnclassifiableQueryError("query has no tokens after normalization")
    key = " ".join(query_tokens)
    kind = Kind.EXISTING if key in graph else Kind.ABSENT
    clicks = click_totals.get(key, 0) if kind is Kind.EXISTING else 0
    return QueryClass(kind, long_tail_rule(len(query_tokens), clicks))


def _classify(engine: Engine, tokens: Sequence[str]) -> QueryClass:
    return classify(tokens, engine.graph, engine.click_totals, engine.long_tail_rule)


def suggest_existing(engine: Engine, q: str, k: int = DEFAULT_K) -> SuggestionList:
    if q not in engine.graph:
        raise WrongPathError(f"{q!r} is not in the click graph; use the embedding path")
    items = tuple((c.query_key, c.score) for c in top_k(connected_queries(engine.graph, q), k))
    return SuggestionList(q, _classify(engine, key_tokens(q)), items, Via.GRAPH)


def bridge_scores(graph: ClickGraph, similar: Sequence[tuple[str, float]]) -> dict[str, float]:
    """Similarity-weighted sum of co-click scores over the bridge queries.

    Bridges with bit-identical similarity are grouped and their integer
    co-click scores summed before multiplying, so exact ties stay exact.
    """
    groups: dict[float, dict[str, int]] = {}
    for s, sim in similar:
        acc = groups.setdefault(sim, {})
        for c in connected_queries(graph, s):
            acc[c.query_key] = acc.get(c.query_key, 0) + c.score
    scores: dict[str, float] = {}
    for sim in sorted(groups, reverse=True):
        for key, w in groups[sim].items():
            scores[key] = scores.get(key, 0.0) + sim * w
    return scores


def suggest_absent(engine: Engine, q_tokens: Sequence[str], m: int = DEFAULT_M, k: int = DEFAULT_K,
                   allow_graph_query: bool = False) -> SuggestionList:
    key = " ".join(q_tokens)
    if key in engine.graph and not allow_graph_query:
        raise WrongPathError(f"{key!r} is in the click graph; use the graph path")
    if k < 1:
        raise ValueError("k must be positive")
    qclass = QueryClass(Kind.ABSENT, engine.long_tail_rule(len(q_tokens), 0))
    try:
        probe = query_centroid(engine.model, q_tokens, engine.centroid_mode, query_key=key)
    except NoCoverageError:
        return SuggestionList(key, qclass, (), Via.EMBEDDING, warning="no_coverage")
    similar = engine.index.nearest(probe, m)
    scores = bridge_scores(engine.graph, similar)
    scores.pop(key, None)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return SuggestionList(key, qclass, tuple(ranked), Via.EMBEDDING, similar=tuple(similar))


def suggest(query_text: str, engine: Engine, m: int = DEFAULT_M, k: int = DEFAULT_K,
            enrich_long_tail: bool = False) -> SuggestionList:
    tokens = normalize(query_text, engine.rules).tokens
    qclass = _classify(engine, tokens)
    key = " ".join(tokens)
    if qclass.kind is Kind.ABSENT:
        return suggest_absent(engine, tokens, m, k)
    result = suggest_existing(engine, key, k)
    if enrich_long_tail and qclass.long_tail and len(result.items) < k:
        result = _enrich(engine, result, tokens, m, k)
    return result


def _enrich(engine: Engine, base: SuggestionList, tokens, m: int, k: int) -> SuggestionList:
    # graph and bridge scores are not comparable, so bridge items only fill the tail
    extra = suggest_absent(engine, tokens, m, k, allow_graph_query=True)
    have = {s for s, _ in base.items} | {base.source_query}
    items = list(base.items)
    for s, score in extra.items:
        if len(items) >= k:
            break
        if s not in have:
            items.append((s, score))
            have.add(s)
    return SuggestionList(base.source_query, base.query_class, tuple(items), base.generated_via,
                          similar=extra.similar, enriched=True)


def suggest_many(engine: Engine, queries: Iterable[str], m: int = DEFAULT_M, k: int = DEFAULT_K) -> list[SuggestionList]:
    return [suggest(q, engine, m, k) for q in queries]
