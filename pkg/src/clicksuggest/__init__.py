"""Query suggestion from click-through logs.

Click-existing queries get co-click neighbours from a weighted bipartite
query-document graph; click-absent queries are bridged to their nearest
in-graph queries through CBOW centroid embeddings.
"""

from ._accel import backend, set_backend, using_backend
from .embeddings import (CbowConfig, CentroidIndex, EmbeddingModel, QueryCentroid, build_centroid_index,
                         cosine, nearest_graph_queries, query_centroid, train_cbow, word_vector)
from .graph import Candidate, ClickGraph, build_graph, coclick_score, connected_queries, top_k
from .ingest import (DatasetStats, LogFormat, LongTailRule, PairCollection, QueryDocPair, RawLogRecord,
                     aggregate_pairs, compute_stats, parse_log, training_corpus)
from .store import load_engine, precompute_suggestions, save_engine
from .suggest import (Engine, Kind, QueryClass, SuggestionList, Via, build_engine, classify, suggest,
                      suggest_absent, suggest_existing)
from .text import NormalizationRules, NormalizedText, normalize

__version__ = "0.1.0"
