"""Corpus data model and JSONL ingestion.

Sentences arrive pre-tokenized with POS tags and character offsets assigned
by an external tagger. Ingestion validates offsets against the raw text and
never normalizes surfaces, so every downstream span can be traced back to
the original characters. Documents that violate the token invariants are
rejected individually with a diagnostic; malformed JSON aborts the run.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, TextIO

from .errors import CorpusFormatError, DataError

logger = logging.getLogger(__name__)

VALID_SOURCES = ("annotator", "generator", "merged", "gold")


@dataclass(frozen=True)
class Token:
    """One word: surface text, optional POS tag, half-open character offsets."""

    text: str
    pos: str | None
    char_start: int
    char_end: int
    pieces: tuple[str, ...] = ()


@dataclass(frozen=True)
class Sentence:
    id: str
    text: str
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Document:
    id: str
    sentences: tuple[Sentence, ...]
    gold_keyphrases: tuple[str, ...] = ()


@dataclass(frozen=True)
class PhraseSpan:
    """Half-open [start, end) span over a sentence's tokens."""

    start: int
    end: int
    surface: str

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise DataError(f"invalid phrase span ({self.start}, {self.end})")

    @property
    def key(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class PhraseSet:
    """Per-sentence set of phrase spans, identified by (start, end).

    Spans are kept sorted; duplicate (start, end) keys are collapsed on
    construction (first surface wins). Overlapping spans are permitted.
    """

    sentence_id: str
    spans: tuple[PhraseSpan, ...]
    source: str

    def __post_init__(self) -> None:
        if self.source not in VALID_SOURCES:
            raise DataError(f"unknown phrase-set source {self.source!r}")
        seen: dict[tuple[int, int], PhraseSpan] = {}
        for span in self.spans:
            seen.setdefault(span.key, span)
        ordered = tuple(seen[k] for k in sorted(seen))
        object.__setattr__(self, "spans", ordered)

    def keys(self) -> frozenset[tuple[int, int]]:
        return frozenset(span.key for span in self.spans)

    def __len__(self) -> int:
        return len(self.spans)


def span_surface(sentence: Sentence, start: int, end: int) -> str:
    """Join the token texts of [start, end) with single spaces."""
    if not (0 <= start < end <= len(sentence.tokens)):
        raise DataError(
            f"span ({start}, {end}) out of range for sentence {sentence.id!r}"
            f" of length {len(sentence.tokens)}"
        )
    return " ".join(tok.text for tok in sentence.tokens[start:end])


def make_span(sentence: Sentence, start: int, end: int) -> PhraseSpan:
    return PhraseSpan(start, end, span_surface(sentence, start, end))


def sentence_from_tokens(
    sentence_id: str,
    words: Iterable[str],
    tags: Iterable[str | None] | None = None,
) -> Sentence:
    """Build a Sentence from plain words, joining with single spaces.

    Convenience for tests and synthetic corpora; offsets are derived.
    """
    words = list(words)
    tag_list: list[str | None] = list(tags) if tags is not None else [None] * len(words)
    if len(tag_list) != len(words):
        raise DataError("words and tags must have equal length")
    tokens = []
    cursor = 0
    for word, tag in zip(words, tag_list):
        tokens.append(Token(word, tag, cursor, cursor + len(word)))
        cursor += len(word) + 1
    return Sentence(sentence_id, " ".join(words), tuple(tokens))


def validate_sentence(sentence: Sentence) -> None:
    """Check token invariants; raises DataError with a specific diagnostic."""
    if not sentence.tokens:
        raise DataError(f"sentence {sentence.id!r} has no tokens")
    prev_end = 0
    for idx, tok in enumerate(sentence.tokens):
        if not tok.text:
            raise DataError(f"sentence {sentence.id!r} token {idx} has empty text")
        if not (0 <= tok.char_start < tok.char_end <= len(sentence.text)):
            raise DataError(
                f"sentence {sentence.id!r} token {idx} offsets "
                f"[{tok.char_start}, {tok.char_end}) out of range"
            )
        if tok.char_start < prev_end:
            raise DataError(
                f"sentence {sentence.id!r} token {idx} overlaps previous token"
            )
        gap = sentence.text[prev_end : tok.char_start]
        if gap and not gap.isspace():
            raise DataError(
                f"sentence {sentence.id!r} has non-whitespace between tokens"
                f" before token {idx}"
            )
        actual = sentence.text[tok.char_start : tok.char_end]
        if actual != tok.text:
            raise DataError(
                f"sentence {sentence.id!r} token {idx} text {tok.text!r}"
                f" does not match substring {actual!r}"
            )
        prev_end = tok.char_end
    tail = sentence.text[prev_end:]
    if tail and not tail.isspace():
        raise DataError(f"sentence {sentence.id!r} has trailing non-whitespace text")


def validate_document(doc: Document) -> None:
    seen_ids: set[str] = set()
    for sent in doc.sentences:
        if sent.id in seen_ids:
            raise DataError(f"document {doc.id!r} repeats sentence id {sent.id!r}")
        seen_ids.add(sent.id)
        validate_sentence(sent)


def document_from_dict(obj: object) -> Document:
    """Parse one corpus JSONL object; schema problems raise DataError."""
    if not isinstance(obj, dict):
        raise DataError("document record is not a JSON object")
    try:
        doc_id = obj["id"]
        raw_sentences = obj["sentences"]
    except KeyError as exc:
        raise DataError(f"document record missing key {exc.args[0]!r}") from exc
    if not isinstance(doc_id, str) or not isinstance(raw_sentences, list):
        raise DataError("document id must be a string and sentences a list")
    sentences = []
    for raw in raw_sentences:
        if not isinstance(raw, dict):
            raise DataError(f"document {doc_id!r} has a non-object sentence")
        try:
            sid, text, raw_tokens = raw["id"], raw["text"], raw["tokens"]
        except KeyError as exc:
            raise DataError(
                f"document {doc_id!r} sentence missing key {exc.args[0]!r}"
            ) from exc
        tokens = []
        for raw_tok in raw_tokens:
            try:
                tokens.append(
                    Token(
                        text=raw_tok["text"],
                        pos=raw_tok.get("pos"),
                        char_start=raw_tok["start"],
                        char_end=raw_tok["end"],
                    )
                )
            except (KeyError, TypeError) as exc:
                raise DataError(
                    f"document {doc_id!r} sentence {sid!r} has a bad token: {exc}"
                ) from exc
        sentences.append(Sentence(sid, text, tuple(tokens)))
    gold = obj.get("gold_keyphrases") or ()
    if not all(isinstance(k, str) for k in gold):
        raise DataError(f"document {doc_id!r} gold_keyphrases must be strings")
    return Document(doc_id, tuple(sentences), tuple(gold))


def document_to_dict(doc: Document) -> dict:
    record: dict = {
        "id": doc.id,
        "sentences": [
            {
                "id": sent.id,
                "text": sent.text,
                "tokens": [
                    {
                        "text": tok.text,
                        **({"pos": tok.pos} if tok.pos is not None else {}),
                        "start": tok.char_start,
                        "end": tok.char_end,
                    }
                    for tok in sent.tokens
                ],
            }
            for sent in doc.sentences
        ],
    }
    if doc.gold_keyphrases:
        record["gold_keyphrases"] = list(doc.gold_keyphrases)
    return record


def iter_corpus(
    path: str | Path,
    *,
    rejects: list[tuple[int, str]] | None = None,
) -> Iterator[Document]:
    """Stream documents from a corpus JSONL file.

    Documents failing validation are skipped and logged; the (line, reason)
    pair is appended to `rejects` when a sink is supplied. Unparseable JSON
    aborts with the offending line number.
    """
    with open(path, "r", encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(str(exc), line_no) from exc
            try:
                doc = document_from_dict(obj)
                validate_document(doc)
            except DataError as exc:
                logger.warning("rejecting document at line %d: %s", line_no, exc)
                if rejects is not None:
                    rejects.append((line_no, str(exc)))
                continue
            yield doc


def load_corpus(path: str | Path, **kwargs) -> list[Document]:
    return list(iter_corpus(path, **kwargs))


def corpus_sentence_index(docs: Iterable[Document]) -> dict[str, Sentence]:
    """Map sentence id -> Sentence across documents; duplicate ids error."""
    index: dict[str, Sentence] = {}
    for doc in docs:
        for sent in doc.sentences:
            if sent.id in index:
                raise DataError(f"duplicate sentence id {sent.id!r} across corpus")
            index[sent.id] = sent
    return index


# --- phrase-set and gold-label JSONL ---------------------------------------

def phrase_set_to_dict(phrases: PhraseSet) -> dict:
    return {
        "sentence_id": phrases.sentence_id,
        "source": phrases.source,
        "phrases": [
            {"start": s.start, "end": s.end, "surface": s.surface}
            for s in phrases.spans
        ],
    }


def phrase_set_from_dict(obj: dict, *, default_source: str = "annotator") -> PhraseSet:
    try:
        sid = obj["sentence_id"]
        raw = obj["phrases"]
    except KeyError as exc:
        raise DataError(f"phrase record missing key {exc.args[0]!r}") from exc
    spans = tuple(
        PhraseSpan(p["start"], p["end"], p.get("surface", "")) for p in raw
    )
    return PhraseSet(sid, spans, obj.get("source", default_source))


def read_phrase_sets(
    path: str | Path, *, default_source: str = "annotator"
) -> dict[str, PhraseSet]:
    """Load a predictions JSONL file into a sentence_id -> PhraseSet map.

    Repeated sentence ids are merged by span union (the later source wins).
    """
    out: dict[str, PhraseSet] = {}
    with open(path, "r", encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(str(exc), line_no) from exc
            ps = phrase_set_from_dict(obj, default_source=default_source)
            if ps.sentence_id in out:
                prev = out[ps.sentence_id]
                ps = PhraseSet(ps.sentence_id, prev.spans + ps.spans, ps.source)
            out[ps.sentence_id] = ps
    return out


def write_phrase_sets(fp: TextIO, phrase_sets: Iterable[PhraseSet]) -> int:
    count = 0
    for ps in phrase_sets:
        fp.write(json.dumps(phrase_set_to_dict(ps), ensure_ascii=False) + "\n")
        count += 1
    return count


def read_gold_labels(
    path: str | Path,
    sentences: Mapping[str, Sentence] | None = None,
) -> dict[str, PhraseSet]:
    """Load sentence-level gold labels; accepts the gold schema or the
    phrase-set schema, so a predictions file can double as its own gold."""
    out: dict[str, PhraseSet] = {}
    with open(path, "r", encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(str(exc), line_no) from exc
            if "gold" in obj:
                sid = obj.get("sentence_id")
                if not isinstance(sid, str):
                    raise CorpusFormatError("gold record missing sentence_id", line_no)
                spans = []
                for raw in obj["gold"]:
                    start, end = raw["start"], raw["end"]
                    if sentences is not None and sid in sentences:
                        surface = span_surface(sentences[sid], start, end)
                    else:
                        surface = raw.get("surface", "")
                    spans.append(PhraseSpan(start, end, surface))
                ps = PhraseSet(sid, tuple(spans), "gold")
            else:
                parsed = phrase_set_from_dict(obj, default_source="gold")
                ps = PhraseSet(parsed.sentence_id, parsed.spans, "gold")
            if ps.sentence_id in out:
                prev = out[ps.sentence_id]
                ps = PhraseSet(ps.sentence_id, prev.spans + ps.spans, "gold")
            out[ps.sentence_id] = ps
    return out
