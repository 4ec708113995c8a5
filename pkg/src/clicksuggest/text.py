"""Lowercasing, punctuation stripping, mixed Latin/CJK tokenization."""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

Segmenter = Callable[[str], Sequence[str]]

# Han, kana and CJK compatibility ideographs; Hangul is space-delimited and
# goes through the whitespace path.
_CJK_RANGES = (
    (0x3040, 0x30FF),
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xF900, 0xFAFF),
    (0x20000, 0x2FA1F),
    (0x30000, 0x323AF),
)


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    for lo, hi in _CJK_RANGES:
        if lo <= cp <= hi:
            return True
    return False


@lru_cache(maxsize=65536)
def is_punctuation(ch: str) -> bool:
    """Unicode P* categories plus the CJK symbols and punctuation block."""
    if 0x3000 <= ord(ch) <= 0x303F:
        return True
    return unicodedata.category(ch).startswith("P")


def unigram_segmenter(run: str) -> list[str]:
    """Default CJK segmenter: one token per code point."""
    return list(run)


def load_stopwords(path: str | Path) -> frozenset[str]:
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                words.add(line.lower())
    return frozenset(words)


def _packaged_stopwords(name: str) -> frozenset[str]:
    with resources.as_file(resources.files("clicksuggest") / "data" / name) as p:
        return load_stopwords(p)


@dataclass(frozen=True)
class NormalizationRules:
    """Stop words are split by script: ``latin_stopwords`` filter tokens from
    whitespace-delimited runs, ``cjk_stopwords`` filter segmenter output."""

    latin_stopwords: frozenset[str] = frozenset()
    cjk_stopwords: frozenset[str] = frozenset()
    segmenter: Segmenter = unigram_segmenter
    punctuation: Callable[[str], bool] = is_punctuation

    @classmethod
    def default(cls) -> "NormalizationRules":
        return cls(
            latin_stopwords=_packaged_stopwords("stopwords_en.txt"),
            cjk_stopwords=_packaged_stopwords("stopwords_zh.txt"),
        )

    @classmethod
    def from_files(cls, latin: str | Path | None = None, cjk: str | Path | None = None) -> "NormalizationRules":
        base = cls.default()
        return cls(
            latin_stopwords=load_stopwords(latin) if latin else base.latin_stopwords,
            cjk_stopwords=load_stopwords(cjk) if cjk else base.cjk_stopwords,
        )

    def to_dict(self) -> dict:
        return {
            "latin_stopwords": sorted(self.latin_stopwords),
            "cjk_stopwords": sorted(self.cjk_stopwords),
            "segmenter": "unigram" if self.segmenter is unigram_segmenter else "custom",
        }

    @classmethod
    def from_dict(cls, d: dict, segmenter: Segmenter | None = None) -> "NormalizationRules":
        if d.get("segmenter", "unigram") != "unigram" and segmenter is None:
            raise ValueError("rules were saved with a custom segmenter; pass it explicitly")
        return cls(
            latin_stopwords=frozenset(d.get("latin_stopwords", ())),
            cjk_stopwords=frozenset(d.get("cjk_stopwords", ())),
            segmenter=segmenter or unigram_segmenter,
        )


@dataclass(frozen=True)
class NormalizedText:
    original: str
    tokens: tuple[str, ...] = field(default_factory=tuple)

    @property
    def key(self) -> str:
        return " ".join(self.tokens)

    def __bool__(self) -> bool:
        return bool(self.tokens)


EMPTY_RULES = NormalizationRules()


def _runs(text: str, punct: Callable[[str], bool]):
    """Yield (is_cjk, run) for maximal runs of non-space, non-punctuation chars."""
    buf: list[str] = []
    buf_cjk = False
    for ch in text:
        if ch.isspace() or punct(ch):
            if buf:
                yield buf_cjk, "".join(buf)
                buf = []
            continue
        c = is_cjk(ch)
        if buf and c != buf_cjk:
            yield buf_cjk, "".join(buf)
            buf = []
        buf_cjk = c
        buf.append(ch)
    if buf:
        yield buf_cjk, "".join(buf)


def normalize(text: str, rules: NormalizationRules = EMPTY_RULES) -> NormalizedText:
    tokens: list[str] = []
    for cjk, run in _runs(text.lower(), rules.punctuation):
        if cjk:
            for tok in rules.segmenter(run):
                tok = tok.strip()
                if tok and tok not in rules.cjk_stopwords:
                    tokens.append(tok)
        elif run not in rules.latin_stopwords:
            tokens.append(run)
    return NormalizedText(text, tuple(tokens))


def canonical_key(tokens: Iterable[str]) -> str:
    return " ".join(tokens)


def key_tokens(key: str) -> list[str]:
    return key.split(" ") if key else []
