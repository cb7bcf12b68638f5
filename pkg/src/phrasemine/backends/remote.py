"""HTTP client for the remote encoder service.

Wire protocol (JSON over HTTP):

    POST /descriptor -> {"name", "dim", "mask_piece", "max_pieces"}
    POST /tokenize   {"words": [str]} -> {"pieces": [[str]]}
    POST /encode     {"pieces": [str], "masked": [int], "want": [int],
                      "layer": int?} -> {"dim": int, "vectors": {"i": [f]}}
    POST /encode_batch {"requests": [...]} -> {"results": [...]}

The client chunks batches, keeps a bounded number of chunks in flight, and
retries transport failures. Responses are validated strictly: a malformed
body raises ProtocolError and a wrong vector width raises DimMismatchError.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np
import requests

from ..errors import (
    DimMismatchError,
    ProtocolError,
    TransportError,
)
from .base import BackendDescriptor, ContextVectors, EncodeRequest, EncoderBackend


class RemoteBackend(EncoderBackend):
    def __init__(
        self,
        url: str,
        *,
        timeout: float = 30.0,
        retries: int = 2,
        layer: int | None = None,
        batch_size: int = 64,
        max_inflight: int = 4,
        session: requests.Session | None = None,
    ):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.layer = layer
        self.batch_size = max(1, batch_size)
        self.max_inflight = max(1, max_inflight)
        self._session = session or requests.Session()
        self._descriptor: BackendDescriptor | None = None

    # --- transport ---------------------------------------------------------

    def _post(self, path: str, payload: object) -> object:
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._session.post(
                    f"{self.url}{path}", json=payload, timeout=self.timeout
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_exc = exc
                continue
            if resp.status_code >= 500:
                last_exc = TransportError(
                    f"{path} returned HTTP {resp.status_code}: {resp.text[:200]}"
                )
                continue
            if resp.status_code >= 400:
                raise ProtocolError(
                    f"{path} rejected with HTTP {resp.status_code}: {resp.text[:200]}"
                )
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"{path} returned unparseable JSON") from exc
        raise TransportError(
            f"{path} failed after {self.retries + 1} attempts: {last_exc}"
        )

    # --- protocol ----------------------------------------------------------

    def describe(self) -> BackendDescriptor:
        if self._descriptor is None:
            obj = self._post("/descriptor", {})
            if not isinstance(obj, dict):
                raise ProtocolError("descriptor response is not an object")
            try:
                self._descriptor = BackendDescriptor(
                    name=str(obj["name"]),
                    dim=int(obj["dim"]),
                    mask_piece=str(obj["mask_piece"]),
                    max_pieces=int(obj["max_pieces"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"bad descriptor response: {exc}") from exc
        return self._descriptor

    def cache_identity(self) -> str:
        return f"{self.describe().name}@layer={self.layer}"

    def tokenize_words(self, words: Sequence[str]) -> list[list[str]]:
        if not words:
            return []
        obj = self._post("/tokenize", {"words": list(words)})
        try:
            pieces = obj["pieces"]  # type: ignore[index]
        except (KeyError, TypeError) as exc:
            raise ProtocolError("tokenize response missing 'pieces'") from exc
        if len(pieces) != len(words) or any(not p for p in pieces):
            raise ProtocolError("tokenize response has wrong shape or empty pieces")
        return [[str(p) for p in word_pieces] for word_pieces in pieces]

    def tokenize_word(self, word: str) -> list[str]:
        if not word:
            raise ValueError("cannot tokenize an empty word")
        return self.tokenize_words([word])[0]

    def _req_payload(self, req: EncodeRequest) -> dict:
        payload = {
            "pieces": list(req.pieces),
            "masked": sorted(req.masked),
            "want": sorted(req.want),
        }
        if self.layer is not None:
            payload["layer"] = self.layer
        return payload

    def _parse_vectors(self, obj: object, req: EncodeRequest) -> ContextVectors:
        if not isinstance(obj, dict) or "dim" not in obj or "vectors" not in obj:
            raise ProtocolError("encode response missing 'dim' or 'vectors'")
        dim = obj["dim"]
        expected = self.describe().dim
        if dim != expected:
            raise DimMismatchError(f"service returned dim {dim}, descriptor says {expected}")
        vectors: dict[int, np.ndarray] = {}
        raw = obj["vectors"]
        if not isinstance(raw, dict):
            raise ProtocolError("encode response 'vectors' is not an object")
        for key, values in raw.items():
            try:
                idx = int(key)
                vec = np.asarray(values, dtype=np.float64)
            except (TypeError, ValueError) as exc:
                raise ProtocolError(f"bad vector entry {key!r}") from exc
            if vec.shape != (expected,):
                raise DimMismatchError(
                    f"vector at {idx} has {vec.shape[0] if vec.ndim == 1 else '?'}"
                    f" components, expected {expected}"
                )
            if not np.all(np.isfinite(vec)):
                raise ProtocolError(f"vector at {idx} has non-finite components")
            vec.flags.writeable = False
            vectors[idx] = vec
        result = ContextVectors(expected, vectors)
        result.validate(req)
        return result

    def encode(self, req: EncodeRequest) -> ContextVectors:
        self.check_size(req)
        obj = self._post("/encode", self._req_payload(req))
        return self._parse_vectors(obj, req)

    def encode_batch(self, reqs: Sequence[EncodeRequest]) -> list[ContextVectors]:
        for idx, req in enumerate(reqs):
            self.check_size(req, index=idx)
        if not reqs:
            return []
        chunks = [
            list(reqs[i : i + self.batch_size])
            for i in range(0, len(reqs), self.batch_size)
        ]

        def post_chunk(chunk: list[EncodeRequest]) -> list[ContextVectors]:
            payload = {"requests": [self._req_payload(r) for r in chunk]}
            obj = self._post("/encode_batch", payload)
            if not isinstance(obj, dict) or "results" not in obj:
                raise ProtocolError("encode_batch response missing 'results'")
            results = obj["results"]
            if not isinstance(results, list) or len(results) != len(chunk):
                raise ProtocolError(
                    f"encode_batch returned {len(results) if isinstance(results, list) else '?'}"
                    f" results for {len(chunk)} requests"
                )
            return [self._parse_vectors(r, req) for r, req in zip(results, chunk)]

        if len(chunks) == 1:
            return post_chunk(chunks[0])
        with ThreadPoolExecutor(max_workers=self.max_inflight) as pool:
            parts = list(pool.map(post_chunk, chunks))
        return [cv for part in parts for cv in part]
