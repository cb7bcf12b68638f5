"""Encoder backend contract.

A backend turns a piece sequence with arbitrary masked positions into
contextual vectors for the requested positions. Implementations must be
deterministic: identical requests yield identical vectors.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import BackendError, BatchError, DataError, OversizeRequestError


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    dim: int
    mask_piece: str
    max_pieces: int

    def __post_init__(self) -> None:
        if self.dim <= 0 or self.max_pieces <= 0:
            raise DataError("backend descriptor requires dim > 0 and max_pieces > 0")


@dataclass(frozen=True)
class EncodeRequest:
    """Pieces to encode, the indices to mask, and the indices to return."""

    pieces: tuple[str, ...]
    masked: frozenset[int] = frozenset()
    want: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "masked", frozenset(self.masked))
        object.__setattr__(self, "want", frozenset(self.want))
        n = len(self.pieces)
        if not self.want:
            raise DataError("encode request must want at least one position")
        if not all(0 <= i < n for i in self.masked):
            raise DataError("masked indices out of range")
        if not all(0 <= i < n for i in self.want):
            raise DataError("want indices out of range")


@dataclass
class ContextVectors:
    dim: int
    vectors: dict[int, np.ndarray]

    def validate(self, req: EncodeRequest) -> None:
        for idx in req.want:
            if idx not in self.vectors:
                raise BackendError(f"missing vector for requested position {idx}")
            vec = self.vectors[idx]
            if vec.shape != (self.dim,):
                raise BackendError(
                    f"vector at {idx} has shape {vec.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(vec)):
                raise BackendError(f"vector at {idx} has non-finite components")


class EncoderBackend(ABC):
    """Uniform interface over the deterministic reference encoder and the
    remote model service."""

    @abstractmethod
    def describe(self) -> BackendDescriptor: ...

    @abstractmethod
    def tokenize_word(self, word: str) -> list[str]: ...

    @abstractmethod
    def encode(self, req: EncodeRequest) -> ContextVectors: ...

    def cache_identity(self) -> str:
        return self.describe().name

    def check_size(self, req: EncodeRequest, *, index: int | None = None) -> None:
        limit = self.describe().max_pieces
        if len(req.pieces) > limit:
            where = f"batch item {index}: " if index is not None else ""
            raise OversizeRequestError(
                f"{where}request has {len(req.pieces)} pieces, limit is {limit}"
            )

    def encode_batch(self, reqs: Sequence[EncodeRequest]) -> list[ContextVectors]:
        for idx, req in enumerate(reqs):
            self.check_size(req, index=idx)
        out = []
        for idx, req in enumerate(reqs):
            try:
                out.append(self.encode(req))
            except BackendError as exc:
                raise BatchError(idx, exc) from exc
        return out
