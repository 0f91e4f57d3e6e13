"""Persistence and HTTP surface over an element-embedding index."""

from .store import (
    Annotation,
    ElementIndexEntry,
    EmbeddingIndex,
    OverlayGates,
    OverlayItem,
    OverlaySpec,
    ReplayResult,
    SearchFilters,
    ServiceStore,
    TraceStep,
    entry_uid,
)

__all__ = [
    "Annotation",
    "ElementIndexEntry",
    "EmbeddingIndex",
    "OverlayGates",
    "OverlayItem",
    "OverlaySpec",
    "ReplayResult",
    "SearchFilters",
    "ServiceStore",
    "TraceStep",
    "entry_uid",
]
