"""Deterministic reference encoder with a closed-form output.

No trained model is involved; the point is an encoder whose behavior is
analytically known, so every downstream algorithm can be tested against
exact expected values, offline and in milliseconds.

Definitions:

* ``emb(p)`` is a unit-norm vector whose components come from a PCG64
  stream seeded by ``(seed, blake2b-64(p))``. Stable across runs, platforms,
  and processes.
* ``encode`` returns, for each wanted position ``i``, the weighted sum of
  the other positions' embeddings: ``sum_{j != i} emb(eff_j) / |i - j|``,
  where ``eff_j`` is the mask piece when ``j`` is masked and the request
  piece otherwise. The piece at ``i`` itself never contributes, so masking
  position ``i`` does not change its own vector.

The 1/|i-j| weight makes an extra masked position ``j`` shift position
``i``'s vector by exactly ``(emb(p_j) - emb(mask)) / |i - j|``: impact
decays with distance, the way neighboring words dominate a real encoder.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

from .base import BackendDescriptor, ContextVectors, EncodeRequest, EncoderBackend

MASK_PIECE = "[MASK]"

_HYPHEN_SPLIT = re.compile(r"(-)")


def piece_hash(piece: str) -> int:
    """Stable 64-bit hash of a piece string."""
    digest = hashlib.blake2b(piece.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class ReferenceBackend(EncoderBackend):
    def __init__(self, seed: int = 0, dim: int = 32, max_pieces: int = 4096):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self._seed = seed
        self._dim = dim
        self._descriptor = BackendDescriptor(
            name=f"reference(seed={seed},dim={dim})",
            dim=dim,
            mask_piece=MASK_PIECE,
            max_pieces=max_pieces,
        )
        self._emb_cache: dict[str, np.ndarray] = {}

    def describe(self) -> BackendDescriptor:
        return self._descriptor

    def tokenize_word(self, word: str) -> list[str]:
        """Identity split, except hyphenated words break at the hyphens
        (the hyphen itself becomes a piece)."""
        if not word:
            raise ValueError("cannot tokenize an empty word")
        return [p for p in _HYPHEN_SPLIT.split(word) if p]

    def embedding(self, piece: str) -> np.ndarray:
        vec = self._emb_cache.get(piece)
        if vec is None:
            rng = np.random.default_rng((self._seed, piece_hash(piece)))
            raw = rng.standard_normal(self._dim)
            vec = raw / np.linalg.norm(raw)
            vec.flags.writeable = False
            self._emb_cache[piece] = vec
        return vec

    def encode(self, req: EncodeRequest) -> ContextVectors:
        self.check_size(req)
        n = len(req.pieces)
        rows = np.empty((n, self._dim))
        mask_vec = self.embedding(MASK_PIECE)
        for j, piece in enumerate(req.pieces):
            rows[j] = mask_vec if j in req.masked else self.embedding(piece)
        positions = np.arange(n, dtype=float)
        vectors: dict[int, np.ndarray] = {}
        for i in sorted(req.want):
            dist = np.abs(positions - i)
            dist[i] = np.inf  # own piece never contributes
            weights = 1.0 / dist
            vec = weights @ rows
            vec.flags.writeable = False
            vectors[i] = vec
        return ContextVectors(self._dim, vectors)
