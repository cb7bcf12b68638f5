"""Evaluation for both task granularities.

Sentence task: exact-span matching, micro-averaged. True/false positives and
false negatives are summed over all sentences first and precision/recall/F1
computed once from the totals, which is not the same thing as averaging
per-sentence F1.

Document task: per-sentence predictions are aggregated into lowercased
candidate surfaces, ranked by tf * ln(N / df), and the top 10 are compared
against gold keyphrases under lowercased Porter-stemmed token equality.
Per-document F1 is macro-averaged over documents that have at least one
multi-word gold keyphrase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import Document, PhraseSet
from .errors import DataError
from .stemming import porter_stem


# --- sentence-level task -----------------------------------------------------

@dataclass
class SentenceEvalReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    per_sentence: tuple[dict, ...] | None = None

    def to_dict(self) -> dict:
        out = {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }
        if self.per_sentence is not None:
            out["per_sentence"] = list(self.per_sentence)
        return out


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def eval_sentences(
    pred: Mapping[str, PhraseSet],
    gold: Mapping[str, PhraseSet],
    *,
    match: str = "span",
    per_sentence: bool = False,
) -> SentenceEvalReport:
    """Micro P/R/F1 over the gold sentences.

    `match` is "span" for (start, end) equality or "surface" for lowercased
    surface equality (a sensitivity knob; span is the primary definition).
    """
    if match not in ("span", "surface"):
        raise DataError(f"unknown match mode {match!r}")
    unknown = set(pred) - set(gold)
    if unknown:
        raise DataError(
            f"predictions reference {len(unknown)} sentence id(s) missing from gold,"
            f" e.g. {sorted(unknown)[:5]}"
        )

    def keyset(ps: PhraseSet | None) -> frozenset:
        if ps is None:
            return frozenset()
        if match == "span":
            return ps.keys()
        return frozenset(s.surface.lower() for s in ps.spans)

    tp = fp = fn = 0
    details: list[dict] = []
    for sid in sorted(gold):
        p, g = keyset(pred.get(sid)), keyset(gold[sid])
        s_tp, s_fp, s_fn = len(p & g), len(p - g), len(g - p)
        tp, fp, fn = tp + s_tp, fp + s_fp, fn + s_fn
        if per_sentence:
            details.append({"sentence_id": sid, "tp": s_tp, "fp": s_fp, "fn": s_fn})
    precision, recall, f1 = _prf(tp, fp, fn)
    return SentenceEvalReport(
        tp, fp, fn, precision, recall, f1,
        per_sentence=tuple(details) if per_sentence else None,
    )


# --- document-level task -----------------------------------------------------

@dataclass(frozen=True)
class Candidate:
    """A document-level candidate: lowercased surface with occurrence count
    and first occurrence position (sentence index, span start)."""

    surface: str
    count: int
    first_pos: tuple[int, int]


def aggregate_candidates(
    doc: Document,
    preds: Mapping[str, PhraseSet],
) -> list[Candidate]:
    """Collect per-sentence predictions into document candidates.

    Surfaces are lowercased; duplicates merge with summed counts, keeping the
    earliest occurrence position. Order is first occurrence in the document.
    """
    order: list[str] = []
    counts: dict[str, int] = {}
    first: dict[str, tuple[int, int]] = {}
    for sent_idx, sent in enumerate(doc.sentences):
        ps = preds.get(sent.id)
        if ps is None:
            continue
        for span in ps.spans:
            surface = span.surface.lower()
            if surface not in counts:
                order.append(surface)
                counts[surface] = 0
                first[surface] = (sent_idx, span.start)
            counts[surface] += 1
    return [Candidate(s, counts[s], first[s]) for s in order]


@dataclass
class CorpusStats:
    """Document frequency table over per-document candidate sets."""

    n_documents: int = 0
    df: dict[str, int] = field(default_factory=dict)

    def add_document(self, surfaces: Iterable[str]) -> None:
        self.n_documents += 1
        for surface in set(surfaces):
            self.df[surface] = self.df.get(surface, 0) + 1


def tfidf_rank(
    doc: Document,
    candidates: Sequence[Candidate],
    stats: CorpusStats,
    *,
    k: int = 10,
) -> list[tuple[str, float]]:
    """Score candidates by tf * ln(N / df) and return the top k.

    Ties break by earlier first occurrence, then lexicographically.
    """
    if stats.n_documents <= 0:
        raise DataError("corpus stats cover zero documents")
    scored = []
    for cand in candidates:
        df = stats.df.get(cand.surface, 0)
        if df <= 0:
            raise DataError(
                f"candidate {cand.surface!r} of document {doc.id!r} has df=0;"
                " stats were built from a different corpus"
            )
        score = cand.count * math.log(stats.n_documents / df)
        scored.append((cand, score))
    scored.sort(key=lambda item: (-item[1], item[0].first_pos, item[0].surface))
    return [(cand.surface, score) for cand, score in scored[:k]]


def stem_phrase(phrase: str) -> tuple[str, ...]:
    return tuple(porter_stem(w) for w in phrase.lower().split())


@dataclass
class DocEvalReport:
    f1_at_10: float
    per_document: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {"f1_at_10": self.f1_at_10, "per_document": list(self.per_document)}


def eval_documents(
    ranked: Mapping[str, Sequence[str]],
    gold: Mapping[str, Sequence[str]],
) -> DocEvalReport:
    """Macro F1@k over documents with at least one multi-word gold keyphrase.

    A returned phrase matches when its lowercased stemmed token sequence
    equals that of some gold keyphrase. Precision divides by the number of
    phrases actually returned (not padded to 10); recall divides by the
    number of multi-word gold keyphrases.
    """
    per_doc: list[dict] = []
    f1_values: list[float] = []
    for doc_id in sorted(gold):
        gold_mw = [g for g in gold[doc_id] if len(g.split()) >= 2]
        if not gold_mw:
            continue
        returned = list(ranked.get(doc_id, []))
        gold_stems = [stem_phrase(g) for g in gold_mw]
        returned_stems = [stem_phrase(r) for r in returned]
        gold_set, returned_set = set(gold_stems), set(returned_stems)
        matched_pred = sum(1 for s in returned_stems if s in gold_set)
        matched_gold = sum(1 for s in gold_stems if s in returned_set)
        precision = matched_pred / len(returned) if returned else 0.0
        recall = matched_gold / len(gold_mw)
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        f1_values.append(f1)
        per_doc.append(
            {
                "doc_id": doc_id,
                "precision": precision,
                "recall": recall,
                "f1": f1,
                "top": returned,
            }
        )
    f1_at_10 = sum(f1_values) / len(f1_values) if f1_values else 0.0
    return DocEvalReport(f1_at_10, tuple(per_doc))
