"""Impact matrices and percentile segmentation.

For a sentence of t words, every ordered pair (i, j) gets an impact score:
encode the sentence with word i masked and read the vectors at i's pieces,
then mask word j as well and measure how far those vectors moved. All pieces
of a multi-piece word are masked together, and the per-piece distances are
averaged.

Segmentation looks only at the adjacent-pair scores values[k][k+1]. A
per-sentence threshold is the q-th nearest-rank percentile of those scores;
adjacent words stay joined iff their score strictly exceeds it. Maximal
joined runs become candidate chunks.

Note the corner the strict inequality creates: the threshold is itself one
of the adjacent-pair scores, so at least one pair always splits, and a
two-word sentence (whose single pair equals its own percentile) always
yields two singleton chunks. This is the literal rule; lower q rather than
expecting it to change.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .corpus import PhraseSet, Sentence
from .errors import BackendError, DataError
from .filtering import FilterConfig, filter_candidates
from .backends.base import ContextVectors, EncodeRequest, EncoderBackend

METRICS = ("euclidean", "cosine_distance")


class ImpactComputationError(BackendError):
    """Backend failure while computing impacts, attributed to its sentence."""

    def __init__(self, sentence_id: str, detail: str):
        super().__init__(f"impact computation failed for sentence {sentence_id!r}: {detail}")
        self.sentence_id = sentence_id


@dataclass(frozen=True)
class ImpactMatrix:
    """t x t matrix of non-negative word-level impacts; diagonal fixed at 0."""

    sentence_id: str
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DataError("impact matrix must be square")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise DataError("impact matrix entries must be finite and non-negative")
        arr = arr.copy()
        np.fill_diagonal(arr, 0.0)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def t(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class AdjacencyProfile:
    """The superdiagonal values[k][k+1]: adjacent-word impact scores."""

    sentence_id: str
    pairs: tuple[float, ...]

    @classmethod
    def from_matrix(cls, matrix: ImpactMatrix) -> "AdjacencyProfile":
        vals = matrix.values
        return cls(matrix.sentence_id, tuple(float(vals[k, k + 1]) for k in range(matrix.t - 1)))


def _distance(x: np.ndarray, y: np.ndarray, metric: str) -> float:
    if metric == "euclidean":
        return float(np.linalg.norm(x - y))
    if metric == "cosine_distance":
        nx, ny = np.linalg.norm(x), np.linalg.norm(y)
        if nx == 0.0 or ny == 0.0:
            return 0.0 if nx == ny else 1.0
        return max(0.0, 1.0 - float(np.dot(x, y) / (nx * ny)))
    raise DataError(f"unknown metric {metric!r}; choose from {METRICS}")


def align_word_pieces(
    sentence: Sentence, backend: EncoderBackend
) -> tuple[list[str], list[range]]:
    """Tokenize each word into pieces and return (flat pieces, per-word ranges)."""
    pieces: list[str] = []
    ranges: list[range] = []
    for tok in sentence.tokens:
        word_pieces = backend.tokenize_word(tok.text)
        start = len(pieces)
        pieces.extend(word_pieces)
        ranges.append(range(start, len(pieces)))
    return pieces, ranges


def _pair_impact(
    base: ContextVectors,
    perturbed: ContextVectors,
    word_range: range,
    metric: str,
) -> float:
    dists = [_distance(base.vectors[p], perturbed.vectors[p], metric) for p in word_range]
    return float(sum(dists) / len(dists))


def word_impact(
    sentence: Sentence,
    i: int,
    j: int,
    backend: EncoderBackend,
    metric: str = "euclidean",
) -> float:
    """Impact of word j on the masked representation of word i."""
    t = len(sentence.tokens)
    if i == j or not (0 <= i < t and 0 <= j < t):
        raise DataError(f"word_impact needs distinct in-range indices, got ({i}, {j})")
    pieces, ranges = align_word_pieces(sentence, backend)
    w_i, w_j = frozenset(ranges[i]), frozenset(ranges[j])
    reqs = [
        EncodeRequest(tuple(pieces), masked=w_i, want=w_i),
        EncodeRequest(tuple(pieces), masked=w_i | w_j, want=w_i),
    ]
    try:
        base, perturbed = backend.encode_batch(reqs)
    except BackendError as exc:
        raise ImpactComputationError(sentence.id, f"pair ({i}, {j}): {exc}") from exc
    return _pair_impact(base, perturbed, ranges[i], metric)


def build_impact_matrix(
    sentence: Sentence,
    backend: EncoderBackend,
    metric: str = "euclidean",
) -> ImpactMatrix:
    """Compute the full matrix with one batched backend call per sentence.

    Issues one request per word (word masked, its pieces wanted) plus one per
    ordered pair (both words masked), t + t*(t-1) requests in total.
    """
    t = len(sentence.tokens)
    if t == 0:
        raise DataError(f"sentence {sentence.id!r} has no tokens")
    values = np.zeros((t, t))
    if t == 1:
        return ImpactMatrix(sentence.id, values)

    pieces, ranges = align_word_pieces(sentence, backend)
    piece_tuple = tuple(pieces)
    word_sets = [frozenset(r) for r in ranges]
    reqs = [
        EncodeRequest(piece_tuple, masked=word_sets[i], want=word_sets[i])
        for i in range(t)
    ]
    pair_index: list[tuple[int, int]] = []
    for i in range(t):
        for j in range(t):
            if i != j:
                reqs.append(
                    EncodeRequest(
                        piece_tuple, masked=word_sets[i] | word_sets[j], want=word_sets[i]
                    )
                )
                pair_index.append((i, j))
    try:
        results = backend.encode_batch(reqs)
    except BackendError as exc:
        raise ImpactComputationError(sentence.id, str(exc)) from exc
    bases, perturbed = results[:t], results[t:]
    for (i, j), result in zip(pair_index, perturbed):
        values[i, j] = _pair_impact(bases[i], result, ranges[i], metric)
    return ImpactMatrix(sentence.id, values)


def percentile_threshold(profile: AdjacencyProfile, q: float) -> float:
    """Nearest-rank percentile of the adjacent-pair scores.

    Sort ascending and take the element at 1-indexed rank ceil(q * n / 100).
    """
    if not (0.0 < q <= 100.0):
        raise DataError(f"percentile q must be in (0, 100], got {q}")
    n = len(profile.pairs)
    if n == 0:
        raise DataError(
            f"sentence {profile.sentence_id!r} has no adjacent pairs"
            " (single-word sentences have no threshold)"
        )
    rank = math.ceil(q * n / 100.0)
    rank = min(max(rank, 1), n)
    return sorted(profile.pairs)[rank - 1]


def segment(sentence: Sentence, matrix: ImpactMatrix, q: float) -> list[tuple[int, int]]:
    """Partition [0, t) into chunks: adjacent words join iff their score
    strictly exceeds the per-sentence percentile threshold."""
    t = len(sentence.tokens)
    if matrix.sentence_id != sentence.id or matrix.t != t:
        raise DataError(
            f"matrix for {matrix.sentence_id!r} (t={matrix.t}) does not match "
            f"sentence {sentence.id!r} (t={t})"
        )
    if t == 1:
        return [(0, 1)]
    profile = AdjacencyProfile.from_matrix(matrix)
    theta = percentile_threshold(profile, q)
    chunks: list[tuple[int, int]] = []
    start = 0
    for k, score in enumerate(profile.pairs):
        if not score > theta:
            chunks.append((start, k + 1))
            start = k + 1
    chunks.append((start, t))
    return chunks


def mine_phrases(
    sentence: Sentence,
    backend: EncoderBackend,
    config: FilterConfig,
    q: float = 40.0,
    metric: str = "euclidean",
) -> PhraseSet:
    """Full per-sentence pipeline: impacts, segmentation, filtering."""
    matrix = build_impact_matrix(sentence, backend, metric)
    chunks = segment(sentence, matrix, q)
    spans = filter_candidates(chunks, sentence, config)
    return PhraseSet(sentence.id, spans, "annotator")


def matrix_to_csv(sentence: Sentence, matrix: ImpactMatrix) -> str:
    """Render a matrix as CSV: header row of word surfaces, then row-major values."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([tok.text for tok in sentence.tokens])
    for row in matrix.values:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
