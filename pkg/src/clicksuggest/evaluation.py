"""Annotation worksheets and mean-score / correlation-percentage summaries."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, TextIO

from .errors import AnnotationError
from .suggest import Kind

log = logging.getLogger(__name__)

WORKSHEET_SUGGESTIONS = 5

WORKSHEET_HEADER = """\
# Relevance worksheet.
# Fill the last two columns of every row: your annotator id and a score
# from 1 (unrelated to the query) to 5 (closely related).
# Rows under a query are shuffled; their order carries no meaning.
# Equal scores for several suggestions are fine.
# Looking up unfamiliar terms or translating non-English text is allowed.
# Columns: query<TAB>suggestion<TAB>annotator_id<TAB>score
"""


@dataclass(frozen=True)
class AnnotationRecord:
    query: str
    suggestion: str
    annotator_id: str
    score: int


@dataclass(frozen=True)
class EvalSummary:
    query_class: Kind
    n_queries: int
    n_records: int
    mean_score: float
    correlation_pct: int

    def as_lines(self) -> list[str]:
        c = self.query_class.value
        return [
            f"{c}: {self.n_queries} queries, {self.n_records} scores, mean {self.mean_score:.4f}, "
            f"correlation {self.correlation_pct}%",
            f"eval\t{c}\tn_queries\t{self.n_queries}",
            f"eval\t{c}\tn_records\t{self.n_records}",
            f"eval\t{c}\tmean_score\t{self.mean_score!r}",
            f"eval\t{c}\tcorrelation_pct\t{self.correlation_pct}",
        ]


def correlation_pct(score_sum: int, n: int) -> int:
    """floor(mean / 5 * 100), computed exactly from the integer score sum."""
    return (score_sum * 20) // n


def aggregate(records: Iterable[AnnotationRecord], query_class: Kind) -> EvalSummary:
    """Flat mean over every (query, suggestion, annotator) score."""
    records = list(records)
    if not records:
        raise AnnotationError("no annotation records")
    total = 0
    for i, r in enumerate(records):
        if not isinstance(r.score, int) or not 1 <= r.score <= 5:
            raise AnnotationError(f"record {i} ({r.query!r} / {r.suggestion!r}): score {r.score!r} not in 1..5")
        total += r.score
    n = len(records)
    return EvalSummary(query_class, len({r.query for r in records}), n,
                       float(Fraction(total, n)), correlation_pct(total, n))


def read_annotations(fh: Iterable[str], source: str = "<annotations>") -> list[AnnotationRecord]:
    out = []
    for line_no, line in enumerate(fh, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise AnnotationError(f"{source}:{line_no}: expected 4 tab-separated fields")
        q, s, who, score = parts
        try:
            value = int(score)
        except ValueError:
            raise AnnotationError(f"{source}:{line_no}: score {score!r} is not an integer") from None
        if not 1 <= value <= 5:
            raise AnnotationError(f"{source}:{line_no}: score {value} not in 1..5")
        if not who.strip():
            raise AnnotationError(f"{source}:{line_no}: missing annotator id")
        out.append(AnnotationRecord(q, s, who, value))
    return out


@dataclass(frozen=True)
class EvalSample:
    existing: list[str]
    absent: list[str]
    shortfall: dict[str, int]


def sample_eval_queries(existing: Sequence[str], absent: Sequence[str], n: int, seed: int) -> EvalSample:
    """Seeded uniform sample without replacement of ``n`` queries per class."""
    rng = random.Random(seed)
    picked, shortfall = {}, {}
    for name, pool in (("existing", existing), ("absent", absent)):
        pool = sorted(set(pool))
        if len(pool) < n:
            shortfall[name] = n - len(pool)
            log.warning("only %d %s queries available for %d requested", len(pool), name, n)
            picked[name] = rng.sample(pool, len(pool))
        else:
            picked[name] = rng.sample(pool, n)
    return EvalSample(picked["existing"], picked["absent"], shortfall)


def render_worksheet(entries: Sequence[tuple[str, Sequence[str]]], seed: int,
                     per_query: int = WORKSHEET_SUGGESTIONS) -> str:
    """One row per (query, suggestion) with the first ``per_query`` suggestions shuffled."""
    rng = random.Random(seed)
    lines = [WORKSHEET_HEADER]
    for query, suggestions in entries:
        shown = list(suggestions[:per_query])
        rng.shuffle(shown)
        for s in shown:
            lines.append(f"{query}\t{s}\t\t\n")
    return "".join(lines)


def write_summary(summaries: Iterable[EvalSummary], out: TextIO) -> None:
    for s in summaries:
        for line in s.as_lines():
            out.write(line + "\n")
