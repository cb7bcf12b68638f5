"""Candidate chunk filtering: stopword trimming and a noun-phrase tag pattern.

A chunk survives as a quality-phrase candidate when, after stopwords are
stripped from its edges and interior stopwords split it, a remaining span
has at least two words, every tag is noun-like (prefix "NN") or exactly
"JJ", and the final tag is noun-like. A word with no POS tag fails the
pattern outright; tagging is an ingestion input, so untagged words cannot
be adjudicated and are treated conservatively.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

from .corpus import PhraseSpan, Sentence, make_span
from .errors import DataError

MIN_PHRASE_WORDS = 2
NOUN_PREFIX = "NN"
ADJECTIVE_TAG = "JJ"


def noun_like(tag: str | None) -> bool:
    return tag is not None and tag.startswith(NOUN_PREFIX)


def adjective_like(tag: str | None) -> bool:
    return tag == ADJECTIVE_TAG


@dataclass(frozen=True)
class FilterConfig:
    stopwords: frozenset[str]
    pos_filtering: bool = True

    def __post_init__(self) -> None:
        if not self.stopwords:
            raise DataError("stopword set must not be empty")
        object.__setattr__(self, "stopwords", frozenset(w.lower() for w in self.stopwords))


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a stopword file (one word per line); default list ships in-package."""
    if path is None:
        text = resources.files("phrasemine.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    words = frozenset(line.strip().lower() for line in text.splitlines() if line.strip())
    if not words:
        raise DataError(f"stopword file {path or '<default>'} is empty")
    return words


def default_filter_config() -> FilterConfig:
    return FilterConfig(stopwords=load_stopwords())


def _is_stopword(sentence: Sentence, index: int, stopwords: frozenset[str]) -> bool:
    return sentence.tokens[index].text.lower() in stopwords


def strip_and_split(
    chunk: tuple[int, int],
    sentence: Sentence,
    stopwords: frozenset[str],
) -> list[tuple[int, int]]:
    """Drop edge stopwords and split the chunk at interior stopwords.

    Splitting (rather than rejecting the whole chunk) keeps both flanks as
    candidates; the noun-phrase pattern adjudicates them afterwards.
    """
    start, end = chunk
    if not (0 <= start < end <= len(sentence.tokens)):
        raise DataError(f"chunk ({start}, {end}) out of range for sentence {sentence.id!r}")
    spans: list[tuple[int, int]] = []
    run_start: int | None = None
    for i in range(start, end):
        if _is_stopword(sentence, i, stopwords):
            if run_start is not None:
                spans.append((run_start, i))
                run_start = None
        elif run_start is None:
            run_start = i
    if run_start is not None:
        spans.append((run_start, end))
    return spans


def is_noun_phrase(span: tuple[int, int], sentence: Sentence) -> bool:
    """True iff every tag is noun-like or "JJ" and the final tag is noun-like."""
    start, end = span
    if start >= end:
        raise DataError(f"empty span ({start}, {end})")
    tags = [tok.pos for tok in sentence.tokens[start:end]]
    if not all(noun_like(t) or adjective_like(t) for t in tags):
        return False
    return noun_like(tags[-1])


def filter_candidates(
    chunks: Iterable[tuple[int, int]],
    sentence: Sentence,
    config: FilterConfig,
) -> tuple[PhraseSpan, ...]:
    """Strip/split chunks, keep multi-word noun phrases, dedupe by (start, end)."""
    kept: dict[tuple[int, int], PhraseSpan] = {}
    for chunk in chunks:
        for span in strip_and_split(chunk, sentence, config.stopwords):
            if span[1] - span[0] < MIN_PHRASE_WORDS:
                continue
            if config.pos_filtering and not is_noun_phrase(span, sentence):
                continue
            kept.setdefault(span, make_span(sentence, *span))
    return tuple(kept[k] for k in sorted(kept))
