"""Click-log parsing, pair aggregation, training corpus and dataset statistics."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

from .errors import MalformedLineError
from .text import EMPTY_RULES, NormalizationRules, key_tokens, normalize

log = logging.getLogger(__name__)

_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f"}


@dataclass(frozen=True)
class RawLogRecord:
    query_text: str
    doc_title: str
    clicked: bool


@dataclass(frozen=True)
class QueryDocPair:
    query_key: str
    doc_key: str
    click_count: int


@dataclass(frozen=True)
class LogFormat:
    delimiter: str = "\t"
    query_col: int = 0
    title_col: int = 1
    clicked_col: int = 2
    n_columns: int = 3
    on_malformed: str = "skip"  # "skip" | "raise"


@dataclass
class ParseReport:
    lines_read: int = 0
    skipped: list[MalformedLineError] = field(default_factory=list)

    @property
    def skip_count(self) -> int:
        return len(self.skipped)


def _parse_flag(value: str) -> bool | None:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    return None


def parse_line(line: str, line_no: int, fmt: LogFormat = LogFormat()) -> RawLogRecord:
    fields = line.rstrip("\r\n").split(fmt.delimiter)
    if len(fields) != fmt.n_columns:
        raise MalformedLineError(line_no, f"expected {fmt.n_columns} columns, got {len(fields)}", line)
    query = fields[fmt.query_col].strip()
    title = fields[fmt.title_col].strip()
    if not query:
        raise MalformedLineError(line_no, "empty query", line)
    if not title:
        raise MalformedLineError(line_no, "empty title", line)
    clicked = _parse_flag(fields[fmt.clicked_col])
    if clicked is None:
        raise MalformedLineError(line_no, f"bad clicked flag {fields[fmt.clicked_col]!r}", line)
    return RawLogRecord(query, title, clicked)


def parse_log(
    lines: Iterable[str] | TextIO,
    fmt: LogFormat = LogFormat(),
    report: ParseReport | None = None,
) -> Iterator[RawLogRecord]:
    """Yield one record per well-formed line, in input order.

    Blank lines are ignored.  Malformed lines raise ``MalformedLineError``
    when ``fmt.on_malformed == "raise"``; otherwise they are logged and
    collected in ``report``.
    """
    if report is None:
        report = ParseReport()
    for line_no, line in enumerate(lines, start=1):
        report.lines_read = line_no
        if not line.strip():
            continue
        try:
            yield parse_line(line, line_no, fmt)
        except MalformedLineError as exc:
            if fmt.on_malformed == "raise":
                raise
            log.warning("skipping %s", exc)
            report.skipped.append(exc)


@dataclass(frozen=True)
class PairCollection:
    """Aggregated pairs sorted by (query_key, doc_key).

    ``records`` counts every record fed in, ``dropped`` those whose query or
    title normalized to nothing.
    """

    pairs: tuple[QueryDocPair, ...] = ()
    records: int = 0
    dropped: int = 0

    def __iter__(self) -> Iterator[QueryDocPair]:
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    @classmethod
    def from_counts(cls, clicks: dict[tuple[str, str], int], records: int = 0, dropped: int = 0) -> "PairCollection":
        pairs = tuple(QueryDocPair(q, d, c) for (q, d), c in sorted(clicks.items()))
        return cls(pairs, records, dropped)

    def counts(self) -> dict[tuple[str, str], int]:
        return {(p.query_key, p.doc_key): p.click_count for p in self.pairs}

    def merge(self, other: "PairCollection") -> "PairCollection":
        """Combine shard results; counts add, so merge order is irrelevant."""
        merged = Counter(self.counts())
        for key, c in other.counts().items():
            merged[key] += c
        return PairCollection.from_counts(
            dict(merged), self.records + other.records, self.dropped + other.dropped
        )

    def query_clicks(self) -> dict[str, int]:
        totals: dict[str, int] = {}
        for p in self.pairs:
            totals[p.query_key] = totals.get(p.query_key, 0) + p.click_count
        return totals


def aggregate_pairs(records: Iterable[RawLogRecord], rules: NormalizationRules = EMPTY_RULES) -> PairCollection:
    clicks: dict[tuple[str, str], int] = {}
    n = dropped = 0
    cache: dict[str, str] = {}

    def key_of(text: str) -> str:
        k = cache.get(text)
        if k is None:
            k = cache[text] = normalize(text, rules).key
        return k

    for rec in records:
        n += 1
        q = key_of(rec.query_text)
        d = key_of(rec.doc_title)
        if not q or not d:
            dropped += 1
            continue
        clicks[(q, d)] = clicks.get((q, d), 0) + int(rec.clicked)
    if dropped:
        log.warning("dropped %d record(s) that normalized to zero tokens", dropped)
    return PairCollection.from_counts(clicks, n, dropped)


def training_corpus(pairs: Iterable[QueryDocPair]) -> Iterator[list[str]]:
    """Token sequences of every distinct query, then every distinct title."""
    pairs = list(pairs)
    for key in sorted({p.query_key for p in pairs}):
        yield key_tokens(key)
    for key in sorted({p.doc_key for p in pairs}):
        yield key_tokens(key)


@dataclass(frozen=True)
class LongTailRule:
    min_words_exclusive: int = 3
    max_clicks_exclusive: int = 5

    def __call__(self, n_tokens: int, total_clicks: int) -> bool:
        return n_tokens > self.min_words_exclusive and total_clicks < self.max_clicks_exclusive


@dataclass(frozen=True)
class DatasetStats:
    total_records: int
    unique_pairs: int
    clicked_unique_pairs: int
    unique_queries: int
    long_tail_queries: int
    click_absent_queries: int

    def as_lines(self) -> list[str]:
        return [f"stat\t{k}\t{v}" for k, v in self.__dict__.items()]


def compute_stats(pairs: PairCollection | Iterable[QueryDocPair], long_tail_rule: LongTailRule = LongTailRule(),
                  total_records: int | None = None) -> DatasetStats:
    if isinstance(pairs, PairCollection):
        if total_records is None:
            total_records = pairs.records
        pairs = pairs.pairs
    pairs = list(pairs)
    totals: dict[str, int] = {}
    for p in pairs:
        totals[p.query_key] = totals.get(p.query_key, 0) + p.click_count
    return DatasetStats(
        total_records=len(pairs) if total_records is None else total_records,
        unique_pairs=len(pairs),
        clicked_unique_pairs=sum(1 for p in pairs if p.click_count > 0),
        unique_queries=len(totals),
        long_tail_queries=sum(1 for q, c in totals.items() if long_tail_rule(len(key_tokens(q)), c)),
        click_absent_queries=sum(1 for c in totals.values() if c == 0),
    )


def read_pairs(fh: Iterable[str]) -> PairCollection:
    """Read the ``query_key<TAB>doc_key<TAB>click_count`` file written by ``write_pairs``."""
    clicks: dict[tuple[str, str], int] = {}
    records = dropped = 0
    for line_no, line in enumerate(fh, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        if line.startswith("#"):
            meta = line[1:].strip().split("=", 1)
            if meta[0] == "records":
                records = int(meta[1])
            elif meta[0] == "dropped":
                dropped = int(meta[1])
            continue
        fields = line.split("\t")
        if len(fields) != 3 or not fields[0] or not fields[1]:
            raise MalformedLineError(line_no, "expected query_key, doc_key, click_count", line)
        try:
            count = int(fields[2])
        except ValueError:
            raise MalformedLineError(line_no, f"bad click count {fields[2]!r}", line) from None
        if count < 0 or (fields[0], fields[1]) in clicks:
            raise MalformedLineError(line_no, "negative count or duplicate pair", line)
        clicks[(fields[0], fields[1])] = count
    return PairCollection.from_counts(clicks, records, dropped)


def write_pairs(pairs: PairCollection, fh: TextIO) -> None:
    fh.write(f"#records={pairs.records}\n#dropped={pairs.dropped}\n")
    for p in pairs:
        fh.write(f"{p.query_key}\t{p.doc_key}\t{p.click_count}\n")
