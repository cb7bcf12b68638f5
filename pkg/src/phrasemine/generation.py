"""Bridge between mined phrase sets and a sequence-to-sequence trainer.

Training files pair each sentence (source) with its phrases concatenated in
occurrence order, separated by " , " so the comma survives as its own piece
under subword tokenizers. Decoded strings come back as raw text; parsing
splits on commas, grounds each phrase at its first case-insensitive
whole-token occurrence (hallucinated strings are dropped and counted), and
re-applies the candidate filter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, TextIO

from .corpus import Document, PhraseSet, Sentence
from .errors import CorpusFormatError, DataError
from .filtering import FilterConfig, filter_candidates

SEPARATOR = " , "
DEFAULT_MAX_PHRASES = 16


@dataclass(frozen=True)
class TrainRecord:
    sentence_id: str
    source: str
    target: str


@dataclass(frozen=True)
class GeneratedRecord:
    sentence_id: str
    target_text: str


@dataclass
class ParseStats:
    """Counters accumulated across parse_generated calls."""

    targets: int = 0
    grounded: int = 0
    hallucinated: int = 0


def export_train_records(
    silver: Mapping[str, PhraseSet],
    documents: Iterable[Document],
) -> Iterator[TrainRecord]:
    """One record per sentence with at least one silver phrase, in corpus order.

    Phrases are ordered by (start, end); zero-phrase sentences are omitted so
    the trainer only ever sees positive targets. A silver id that never
    appears in the corpus is an error, raised after the stream is exhausted.
    """
    pending = set(silver)
    for doc in documents:
        for sent in doc.sentences:
            phrases = silver.get(sent.id)
            pending.discard(sent.id)
            if phrases is None or len(phrases) == 0:
                continue
            ordered = sorted(phrases.spans, key=lambda s: (s.start, s.end))
            target = SEPARATOR.join(span.surface for span in ordered)
            yield TrainRecord(sent.id, sent.text, target)
    if pending:
        missing = sorted(pending)[:5]
        raise DataError(
            f"silver labels reference {len(pending)} sentence id(s) not in the corpus,"
            f" e.g. {missing}"
        )


def ground_phrase(text: str, sentence: Sentence) -> tuple[int, int] | None:
    """First whole-token-sequence occurrence of `text`, case-insensitive."""
    needle = [w.lower() for w in text.split()]
    if not needle:
        return None
    words = [tok.text.lower() for tok in sentence.tokens]
    n = len(needle)
    for start in range(0, len(words) - n + 1):
        if words[start : start + n] == needle:
            return (start, start + n)
    return None


def parse_generated(
    record: GeneratedRecord,
    sentence: Sentence,
    config: FilterConfig,
    *,
    max_phrases: int = DEFAULT_MAX_PHRASES,
    stats: ParseStats | None = None,
) -> PhraseSet:
    """Split a decoded target on commas, ground, and filter.

    Ungroundable phrases never fail the parse; they bump the hallucination
    counter and the rest of the record is kept.
    """
    if record.sentence_id != sentence.id:
        raise DataError(
            f"generated record {record.sentence_id!r} does not match sentence {sentence.id!r}"
        )
    parts: list[str] = []
    seen: set[str] = set()
    for raw in record.target_text.split(","):
        phrase = raw.strip()
        if not phrase:
            continue
        key = phrase.lower()
        if key in seen:
            continue
        seen.add(key)
        parts.append(phrase)
        if len(parts) >= max_phrases:
            break
    grounded: list[tuple[int, int]] = []
    for phrase in parts:
        if stats is not None:
            stats.targets += 1
        span = ground_phrase(phrase, sentence)
        if span is None:
            if stats is not None:
                stats.hallucinated += 1
            continue
        if stats is not None:
            stats.grounded += 1
        grounded.append(span)
    spans = filter_candidates(grounded, sentence, config)
    return PhraseSet(sentence.id, spans, "generator")


def merge_phrase_sets(a: PhraseSet, b: PhraseSet) -> PhraseSet:
    """Union by (start, end); overlapping spans are all retained."""
    if a.sentence_id != b.sentence_id:
        raise DataError(
            f"cannot merge phrase sets for {a.sentence_id!r} and {b.sentence_id!r}"
        )
    return PhraseSet(a.sentence_id, a.spans + b.spans, "merged")


# --- JSONL I/O ---------------------------------------------------------------

def write_train_records(fp: TextIO, records: Iterable[TrainRecord]) -> int:
    count = 0
    for rec in records:
        fp.write(
            json.dumps(
                {"sentence_id": rec.sentence_id, "source": rec.source, "target": rec.target},
                ensure_ascii=False,
            )
            + "\n"
        )
        count += 1
    return count


def read_train_records(path: str | Path) -> Iterator[TrainRecord]:
    with open(path, "r", encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                yield TrainRecord(obj["sentence_id"], obj["source"], obj["target"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusFormatError(f"bad train record: {exc}", line_no) from exc


def read_generated_records(path: str | Path) -> Iterator[GeneratedRecord]:
    with open(path, "r", encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                yield GeneratedRecord(obj["sentence_id"], obj["target_text"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusFormatError(f"bad generated record: {exc}", line_no) from exc
