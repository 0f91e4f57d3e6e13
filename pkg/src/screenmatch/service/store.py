"""Element-embedding index with annotations, traces, overlay transfer and
trace replay.

On disk a store is one directory::

    store/
      index.bin           versioned header + float32 embeddings
      annotations.jsonl   one annotation per line, append-only
      traces/             one JSON document per recorded trace

The index is read-mostly: searches run against immutable snapshots while
mutations (insert/replace) hold an exclusive lock and swap state wholesale,
so a reader never observes a half-applied update. ``index.bin`` writes are
atomic (temp file + rename).
"""

import json
import struct
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..encoder import ElementEmbeddings, EncoderModel
from ..errors import (
    DimensionMismatch,
    EmptyAnnotationStore,
    EmptyIndex,
    EmptyScreen,
    MalformedDocument,
    ModelVersionMismatch,
    NoMatch,
    UnknownId,
)
from ..featurize import DEFAULT_TEXT_ENCODER, TextEncoder, tokenize_screen
from ..geometry import BoundingBox
from ..matcher import MatchParams, correspond, match_embeddings
from ..screen import Screen, parse_screen, serialize_screen

INDEX_MAGIC = b"SMIX"
INDEX_FORMAT_VERSION = 1


def entry_uid(screen_id: str, element_id: str) -> str:
    return f"{screen_id}::{element_id}"


@dataclass(frozen=True)
class ElementIndexEntry:
    element_id: str
    screen_id: str
    embedding: np.ndarray
    tags: tuple  # (category name, icon kind or None)
    text: Optional[str]
    bounds: BoundingBox

    @property
    def uid(self) -> str:
        return entry_uid(self.screen_id, self.element_id)


@dataclass(frozen=True)
class Annotation:
    screen_id: str
    element_id: str
    text: str
    author: str = ""

    def as_dict(self) -> dict:
        return {"screen_id": self.screen_id, "element_id": self.element_id,
                "text": self.text, "author": self.author}


@dataclass(frozen=True)
class TraceStep:
    index: int
    screen: Screen
    target_element_id: str
    action: dict  # {"kind": "tap" | "swipe" | "type", ...parameters}

    def __post_init__(self):
        kind = self.action.get("kind")
        if kind not in ("tap", "swipe", "type"):
            raise MalformedDocument(f"step {self.index}: unknown action {kind!r}")
        ids = {el.element_id for el in self.screen.elements}
        if self.target_element_id not in ids:
            raise MalformedDocument(
                f"step {self.index}: target {self.target_element_id!r} "
                f"not on recorded screen {self.screen.screen_id!r}")


@dataclass(frozen=True)
class SearchFilters:
    """Attribute filters applied before ranking.

    ``tags`` tokens match an entry when equal to its category base class
    (``"button"``) or full category name (``"icon:add"``, ``"toggle:on"``);
    all tokens must match. ``text`` is a case-insensitive substring test.
    """
    tags: tuple = ()
    text: Optional[str] = None

    def matches(self, entry: ElementIndexEntry) -> bool:
        name = entry.tags[0]
        base = name.split(":", 1)[0]
        for token in self.tags:
            if token != name and token != base:
                return False
        if self.text is not None:
            if entry.text is None or self.text.lower() not in entry.text.lower():
                return False
        return True


@dataclass(frozen=True)
class OverlayGates:
    d_screen: float = 0.5  # max cosine distance to the nearest exemplar
    n_min: int = 2         # min correspondence pairs
    s_min: float = 0.5     # min mean pair score


@dataclass(frozen=True)
class OverlayItem:
    bbox: BoundingBox
    instruction: str
    score: float
    source_screen_id: str
    source_element_id: str
    target_element_id: str

    def as_dict(self) -> dict:
        return {"bbox": self.bbox.as_list(), "instruction": self.instruction,
                "score": self.score, "source_screen_id": self.source_screen_id,
                "source_element_id": self.source_element_id,
                "target_element_id": self.target_element_id}


@dataclass(frozen=True)
class OverlaySpec:
    target_screen_id: str
    source_screen_id: Optional[str]
    screen_distance: Optional[float]
    items: tuple
    reason: Optional[str] = None

    def as_dict(self) -> dict:
        return {"target_screen_id": self.target_screen_id,
                "source_screen_id": self.source_screen_id,
                "screen_distance": self.screen_distance,
                "items": [it.as_dict() for it in self.items],
                "reason": self.reason}


@dataclass(frozen=True)
class ReplayResult:
    element_id: str
    action: dict
    score: float

    def as_dict(self) -> dict:
        return {"element_id": self.element_id, "action": dict(self.action),
                "score": self.score}


def _screen_vector(vectors: np.ndarray) -> np.ndarray:
    return vectors.mean(axis=0)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


@dataclass
class _IndexState:
    """Immutable-by-convention snapshot swapped atomically under the lock."""
    entries: tuple = ()
    screens: dict = field(default_factory=dict)       # screen_id -> Screen
    screen_vecs: dict = field(default_factory=dict)   # screen_id -> ndarray
    by_uid: dict = field(default_factory=dict)        # uid -> entry position


class EmbeddingIndex:
    """Exact full-scan cosine index over element embeddings.

    All embeddings must come from one model version, recorded at first
    insert and checked on every subsequent one. Screen documents are kept
    alongside entries so overlay transfer can re-run correspondence later.
    """

    def __init__(self, model_version: str = "", embed_dim: int = 0):
        self.model_version = model_version
        self.embed_dim = embed_dim
        self._state = _IndexState()
        self._lock = threading.RLock()

    def __len__(self) -> int:
        return len(self._state.entries)

    @property
    def entries(self) -> tuple:
        return self._state.entries

    def screen_ids(self) -> list:
        return list(self._state.screens)

    def screen(self, screen_id: str) -> Screen:
        try:
            return self._state.screens[screen_id]
        except KeyError:
            raise UnknownId(f"screen {screen_id!r} is not indexed") from None

    def screen_vector(self, screen_id: str) -> np.ndarray:
        try:
            return self._state.screen_vecs[screen_id]
        except KeyError:
            raise UnknownId(f"screen {screen_id!r} is not indexed") from None

    def entry(self, uid: str) -> ElementIndexEntry:
        pos = self._state.by_uid.get(uid)
        if pos is None:
            raise UnknownId(f"element {uid!r} is not indexed")
        return self._state.entries[pos]

    def add_screen(self, screen: Screen, element_ids: tuple,
                   vectors: np.ndarray, model_version: str) -> None:
        """Insert or atomically replace all entries of one screen.

        A replaced screen's entries are appended at the end, so re-indexing
        moves the screen to the back of the insertion order.
        """
        if not element_ids:
            raise EmptyScreen(f"screen {screen.screen_id!r} has no elements")
        with self._lock:
            if self.model_version and model_version != self.model_version:
                raise ModelVersionMismatch(
                    f"index built with model {self.model_version}, "
                    f"insert attempted with {model_version}")
            if vectors.ndim != 2 or vectors.shape[0] != len(element_ids):
                raise DimensionMismatch("one embedding row per element required")
            if self.embed_dim and vectors.shape[1] != self.embed_dim:
                raise DimensionMismatch(
                    f"index stores {self.embed_dim}-dim embeddings, "
                    f"got {vectors.shape[1]}")
            if not self.model_version:
                self.model_version = model_version
                self.embed_dim = int(vectors.shape[1])
            old = self._state
            kept = [e for e in old.entries if e.screen_id != screen.screen_id]
            by_id = {el.element_id: el for el in screen.elements}
            for eid, vec in zip(element_ids, vectors):
                el = by_id[eid]
                v = np.asarray(vec, dtype=np.float64).copy()
                v.flags.writeable = False
                kept.append(ElementIndexEntry(
                    element_id=eid, screen_id=screen.screen_id, embedding=v,
                    tags=(el.category.name,
                          el.category.sub_kind if el.category.base_class == "icon" else None),
                    text=el.text, bounds=el.bounds))
            screens = dict(old.screens)
            screens[screen.screen_id] = screen
            vecs = dict(old.screen_vecs)
            sv = _screen_vector(vectors).astype(np.float64)
            sv.flags.writeable = False
            vecs[screen.screen_id] = sv
            self._state = _IndexState(
                entries=tuple(kept), screens=screens, screen_vecs=vecs,
                by_uid={e.uid: i for i, e in enumerate(kept)})

    def nn_search(self, query: np.ndarray, k: int,
                  filters: SearchFilters = SearchFilters()) -> list:
        """Exact top-k by cosine over filtered entries, ties by insertion
        order. Returns [(entry, score)]."""
        state = self._state
        if not state.entries:
            raise EmptyIndex("index has no entries")
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.embed_dim,):
            raise DimensionMismatch(
                f"query must have {self.embed_dim} dims, got {q.shape}")
        candidates = [e for e in state.entries if filters.matches(e)]
        scored = [(e, _cosine(q, e.embedding)) for e in candidates]
        scored.sort(key=lambda pair: -pair[1])  # stable: ties keep insertion order
        return scored[:max(0, k)]

    def filter_scan(self, filters: SearchFilters, k: int) -> list:
        """Attribute-only search: filtered entries in insertion order."""
        state = self._state
        if not state.entries:
            raise EmptyIndex("index has no entries")
        out = [e for e in state.entries if filters.matches(e)]
        return out[:max(0, k)]

    # --- serialization ---

    def save(self, path: Union[str, Path]) -> None:
        """Atomic write: header JSON, then float64 embedding rows (entries in
        insertion order, then one screen vector per screen)."""
        state = self._state
        header = {
            "format_version": INDEX_FORMAT_VERSION,
            "model_version": self.model_version,
            "embed_dim": self.embed_dim,
            "screens": [serialize_screen(state.screens[sid])
                        for sid in state.screens],
            "entries": [{"element_id": e.element_id, "screen_id": e.screen_id}
                        for e in state.entries],
        }
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(INDEX_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for e in state.entries:
                fh.write(e.embedding.astype("<f8").tobytes())
            for sid in state.screens:
                fh.write(state.screen_vecs[sid].astype("<f8").tobytes())
        tmp.replace(path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EmbeddingIndex":
        raw = Path(path).read_bytes()
        if raw[:4] != INDEX_MAGIC:
            raise MalformedDocument(f"{path}: not an index file")
        (hlen,) = struct.unpack("<I", raw[4:8])
        header = json.loads(raw[8:8 + hlen].decode("utf-8"))
        if header.get("format_version") != INDEX_FORMAT_VERSION:
            raise MalformedDocument(
                f"{path}: unsupported index format {header.get('format_version')}")
        idx = cls(model_version=header["model_version"],
                  embed_dim=int(header["embed_dim"]))
        dim = idx.embed_dim
        offset = 8 + hlen
        n_entries = len(header["entries"])
        need = (n_entries + len(header["screens"])) * dim * 8
        if len(raw) - offset != need:
            raise MalformedDocument(f"{path}: truncated embedding payload")
        mat = np.frombuffer(raw, dtype="<f8", offset=offset).reshape(-1, dim)
        screens = {}
        for doc in header["screens"]:
            s = parse_screen(doc)
            screens[s.screen_id] = s
        entries = []
        for row, erec in enumerate(header["entries"]):
            sid, eid = erec["screen_id"], erec["element_id"]
            el = screens[sid].element(eid)
            v = mat[row].copy()
            v.flags.writeable = False
            entries.append(ElementIndexEntry(
                element_id=eid, screen_id=sid, embedding=v,
                tags=(el.category.name,
                      el.category.sub_kind if el.category.base_class == "icon" else None),
                text=el.text, bounds=el.bounds))
        svecs = {}
        for i, sid in enumerate(screens):
            sv = mat[n_entries + i].copy()
            sv.flags.writeable = False
            svecs[sid] = sv
        idx._state = _IndexState(
            entries=tuple(entries), screens=screens, screen_vecs=svecs,
            by_uid={e.uid: i for i, e in enumerate(entries)})
        return idx


def embed_screen_vectors(screen: Screen, m: EncoderModel,
                         enc: TextEncoder = DEFAULT_TEXT_ENCODER) -> np.ndarray:
    """(E, H) eval-mode embeddings in screen element order."""
    t = tokenize_screen(screen, enc, m.cfg.modalities())
    emb = m.embed_screen(screen.screen_id, tuple(screen.element_ids()), t)
    return emb.vectors


class ServiceStore:
    """Single-directory persistence root: index + annotations + traces."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "traces").mkdir(exist_ok=True)
        self._lock = threading.RLock()
        index_path = self.root / "index.bin"
        self.index = EmbeddingIndex.load(index_path) if index_path.exists() \
            else EmbeddingIndex()
        self.annotations: list = []
        ann_path = self.root / "annotations.jsonl"
        if ann_path.exists():
            for line in ann_path.read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                self.annotations.append(Annotation(
                    screen_id=doc["screen_id"], element_id=doc["element_id"],
                    text=doc["text"], author=doc.get("author", "")))

    # --- indexing and search ---

    def index_screen(self, screen: Screen, m: EncoderModel,
                     enc: TextEncoder = DEFAULT_TEXT_ENCODER) -> tuple:
        """Embed, insert (replacing any prior entries for the screen_id) and
        persist. Returns (screen_id, element ids)."""
        vectors = embed_screen_vectors(screen, m, enc)
        element_ids = tuple(screen.element_ids())
        with self._lock:
            self.index.add_screen(screen, element_ids, vectors,
                                  m.model_version())
            self.index.save(self.root / "index.bin")
        return screen.screen_id, list(element_ids)

    def nn_search(self, query: np.ndarray, k: int,
                  filters: SearchFilters = SearchFilters()) -> list:
        return self.index.nn_search(query, k, filters)

    def similar_to(self, uid: str, k: int) -> list:
        """Exemplar refinement: rank everything by cosine to the stored
        embedding of `uid` (the exemplar itself ranks first at ~1.0)."""
        exemplar = self.index.entry(uid)
        return self.index.nn_search(exemplar.embedding, k)

    def search(self, filters: SearchFilters, k: int) -> list:
        """Attribute search; entries in insertion order, no scores."""
        return self.index.filter_scan(filters, k)

    # --- annotations ---

    def add_annotation(self, ann: Annotation) -> Annotation:
        uid = entry_uid(ann.screen_id, ann.element_id)
        self.index.entry(uid)  # raises UnknownId for dangling references
        if not ann.text.strip():
            raise MalformedDocument("annotation instruction text is empty")
        with self._lock:
            self.annotations.append(ann)
            with open(self.root / "annotations.jsonl", "a", encoding="utf-8") as fh:
                fh.write(json.dumps(ann.as_dict(), sort_keys=True) + "\n")
        return ann

    def annotations_for(self, screen_id: str) -> list:
        return [a for a in self.annotations if a.screen_id == screen_id]

    # --- overlay transfer ---

    def transfer_overlay(self, target: Screen, m: EncoderModel,
                         enc: TextEncoder = DEFAULT_TEXT_ENCODER,
                         gates: OverlayGates = OverlayGates(),
                         params: MatchParams = MatchParams()) -> OverlaySpec:
        """Nearest annotated exemplar -> correspondence -> instruction boxes.

        Empty result with a reason when a gate fails; raises only when the
        annotation store has nothing to transfer from.
        """
        if not self.annotations:
            raise EmptyAnnotationStore("no annotations stored")
        annotated = sorted({a.screen_id for a in self.annotations})
        vectors = embed_screen_vectors(target, m, enc)
        target_vec = _screen_vector(vectors)
        best_sid, best_dist = None, None
        for sid in annotated:
            dist = 1.0 - _cosine(target_vec, self.index.screen_vector(sid))
            if best_dist is None or dist < best_dist:
                best_sid, best_dist = sid, dist
        if best_dist > gates.d_screen:
            return OverlaySpec(target_screen_id=target.screen_id,
                               source_screen_id=None, screen_distance=best_dist,
                               items=(), reason="no similar exemplar")
        source = self.index.screen(best_sid)
        emb_src = m.embed_screen(source.screen_id, tuple(source.element_ids()),
                                 tokenize_screen(source, enc, m.cfg.modalities()))
        emb_tgt = ElementEmbeddings(screen_id=target.screen_id,
                                    element_ids=tuple(target.element_ids()),
                                    vectors=vectors)
        mapping = match_embeddings(emb_src, emb_tgt, params, m.model_version())
        if len(mapping.pairs) < gates.n_min:
            return OverlaySpec(target_screen_id=target.screen_id,
                               source_screen_id=best_sid, screen_distance=best_dist,
                               items=(), reason="too few matches")
        mean_score = float(np.mean([p.score for p in mapping.pairs]))
        if mean_score < gates.s_min:
            return OverlaySpec(target_screen_id=target.screen_id,
                               source_screen_id=best_sid, screen_distance=best_dist,
                               items=(), reason="low match confidence")
        by_source = {p.source_id: p for p in mapping.pairs}
        items = []
        for ann in self.annotations_for(best_sid):
            pair = by_source.get(ann.element_id)
            if pair is None:
                continue
            items.append(OverlayItem(
                bbox=target.element(pair.target_id).bounds,
                instruction=ann.text, score=pair.score,
                source_screen_id=best_sid, source_element_id=ann.element_id,
                target_element_id=pair.target_id))
        return OverlaySpec(target_screen_id=target.screen_id,
                           source_screen_id=best_sid, screen_distance=best_dist,
                           items=tuple(items))

    # --- traces ---

    def add_trace(self, steps: list, trace_id: Optional[str] = None) -> str:
        if not steps:
            raise MalformedDocument("trace has no steps")
        with self._lock:
            if trace_id is None:
                trace_id = f"trace-{len(self.trace_ids()):04d}"
            path = self.root / "traces" / f"{trace_id}.json"
            if path.exists():
                raise MalformedDocument(f"trace {trace_id!r} already exists")
            doc = {"trace_id": trace_id,
                   "steps": [{"index": st.index,
                              "screen": serialize_screen(st.screen),
                              "target_element_id": st.target_element_id,
                              "action": st.action} for st in steps]}
            tmp = path.with_suffix(".json.tmp")
            tmp.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n",
                           encoding="utf-8")
            tmp.replace(path)
        return trace_id

    def trace_ids(self) -> list:
        return sorted(p.stem for p in (self.root / "traces").glob("*.json"))

    def get_trace(self, trace_id: str) -> list:
        path = self.root / "traces" / f"{trace_id}.json"
        if not path.exists():
            raise UnknownId(f"trace {trace_id!r} does not exist")
        doc = json.loads(path.read_text(encoding="utf-8"))
        return [TraceStep(index=int(st["index"]),
                          screen=parse_screen(st["screen"]),
                          target_element_id=st["target_element_id"],
                          action=st["action"])
                for st in doc["steps"]]

    def replay_step(self, step: TraceStep, live: Screen, m: EncoderModel,
                    enc: TextEncoder = DEFAULT_TEXT_ENCODER,
                    params: MatchParams = MatchParams()) -> ReplayResult:
        """Locate the recorded target on the live screen via correspondence."""
        mapping = correspond(step.screen, live, m, enc, params)
        for pair in mapping.pairs:
            if pair.source_id == step.target_element_id:
                return ReplayResult(element_id=pair.target_id,
                                    action=step.action, score=pair.score)
        raise NoMatch(
            f"recorded target {step.target_element_id!r} has no live match")
