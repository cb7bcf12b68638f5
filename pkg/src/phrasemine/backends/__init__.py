from .base import BackendDescriptor, ContextVectors, EncodeRequest, EncoderBackend
from .cache import CachingBackend, LRUCache
from .reference import MASK_PIECE, ReferenceBackend, piece_hash
from .remote import RemoteBackend

__all__ = [
    "BackendDescriptor",
    "CachingBackend",
    "ContextVectors",
    "EncodeRequest",
    "EncoderBackend",
    "LRUCache",
    "MASK_PIECE",
    "ReferenceBackend",
    "RemoteBackend",
    "piece_hash",
]
