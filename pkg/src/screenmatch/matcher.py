"""Correspondence matching over element embeddings.

Pipeline: cosine similarity matrix, top-k pruning (row OR column survival),
maximum-total-similarity partial assignment, threshold filtering. A greedy
variant and a category-one-hot heuristic baseline share the same pipeline.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .encoder import ElementEmbeddings, EncoderModel
from .errors import DimensionMismatch, EmptyScreen, InvalidConfig
from .featurize import DEFAULT_TEXT_ENCODER, TextEncoder, encode_category, tokenize_screen
from .kernels import lap_min_cost
from .screen import CorrespondencePair, CorrespondenceMapping, Screen

HEURISTIC_VERSION = "heuristic"


@dataclass(frozen=True)
class MatchParams:
    k: int = 5
    c: float = 0.4
    assignment: str = "optimal"

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfig("k must be >= 1")
        if not -1.0 <= self.c <= 1.0:
            raise InvalidConfig("c must lie in [-1, 1]")
        if self.assignment not in ("optimal", "greedy"):
            raise InvalidConfig("assignment must be 'optimal' or 'greedy'")

    def as_dict(self) -> dict:
        return {"k": self.k, "c": self.c, "assignment": self.assignment}


@dataclass(frozen=True)
class SimilarityMatrix:
    entries: np.ndarray  # (M, N) cosine similarities
    row_ids: tuple       # source element ids
    col_ids: tuple       # target element ids
    pruned: np.ndarray   # (M, N) bool, True = excluded from assignment
    source_screen_id: str = ""
    target_screen_id: str = ""

    @property
    def shape(self) -> tuple:
        return self.entries.shape


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def similarity_matrix(a: ElementEmbeddings, b: ElementEmbeddings) -> SimilarityMatrix:
    """C[i][j] = cosine(u_i, v_j); zero vectors define similarity 0."""
    if a.vectors.shape[0] == 0 or b.vectors.shape[0] == 0:
        raise EmptyScreen("cannot build a similarity matrix over zero elements")
    if a.vectors.shape[1] != b.vectors.shape[1]:
        raise DimensionMismatch(
            f"embedding dims differ: {a.vectors.shape[1]} vs {b.vectors.shape[1]}")
    na = np.linalg.norm(a.vectors, axis=1)
    nb = np.linalg.norm(b.vectors, axis=1)
    sa = np.where(na == 0.0, 1.0, na)
    sb = np.where(nb == 0.0, 1.0, nb)
    entries = (a.vectors / sa[:, None]) @ (b.vectors / sb[:, None]).T
    entries[na == 0.0, :] = 0.0
    entries[:, nb == 0.0] = 0.0
    entries = np.clip(entries, -1.0, 1.0)
    return SimilarityMatrix(entries=entries, row_ids=tuple(a.element_ids),
                            col_ids=tuple(b.element_ids),
                            pruned=np.zeros(entries.shape, dtype=bool),
                            source_screen_id=a.screen_id,
                            target_screen_id=b.screen_id)


def _topk_indices(values: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest entries, ties toward lower index."""
    order = np.lexsort((np.arange(values.size), -values))
    return order[:k]


def prune_topk(s: SimilarityMatrix, k: int) -> SimilarityMatrix:
    """Entry (i, j) survives iff it is in row i's top-k OR column j's top-k.
    An entry pruned by its row can be rescued by its column."""
    if k < 1:
        raise InvalidConfig("k must be >= 1")
    m, n = s.entries.shape
    keep = np.zeros((m, n), dtype=bool)
    for i in range(m):
        keep[i, _topk_indices(s.entries[i], k)] = True
    for j in range(n):
        keep[_topk_indices(s.entries[:, j], k), j] = True
    return SimilarityMatrix(entries=s.entries, row_ids=s.row_ids, col_ids=s.col_ids,
                            pruned=s.pruned | ~keep,
                            source_screen_id=s.source_screen_id,
                            target_screen_id=s.target_screen_id)


def assign(s: SimilarityMatrix) -> list:
    """Partial one-to-one assignment over unpruned entries maximizing total
    similarity. Unmatched elements are always permitted; entries with
    similarity <= 0 never enter the result (omitting them cannot lower the
    total). Solved as a min-cost assignment on a square matrix where the
    zero padding represents "leave unmatched"."""
    m, n = s.entries.shape
    k = max(m, n)
    cost = np.zeros((k, k))
    eligible = (~s.pruned) & (s.entries > 0.0)
    cost[:m, :n][eligible] = -s.entries[eligible]
    row_to_col = lap_min_cost(cost)
    pairs = []
    for i in range(m):
        j = int(row_to_col[i])
        if j < n and eligible[i, j]:
            pairs.append((i, j, float(s.entries[i, j])))
    return pairs


def greedy_assign(s: SimilarityMatrix) -> list:
    """Iteratively take the globally highest unpruned positive entry and
    retire its row and column; ties break toward the lexicographically
    smallest (i, j)."""
    m, n = s.entries.shape
    avail = (~s.pruned) & (s.entries > 0.0)
    entries = s.entries
    pairs = []
    while avail.any():
        masked = np.where(avail, entries, -np.inf)
        flat = int(np.argmax(masked))  # argmax returns the first (lowest) index on ties
        i, j = divmod(flat, n)
        pairs.append((i, j, float(entries[i, j])))
        avail[i, :] = False
        avail[:, j] = False
    pairs.sort(key=lambda p: (p[0], p[1]))
    return pairs


def total_similarity(pairs: list) -> float:
    return float(sum(p[2] for p in pairs))


def filter_matches(pairs: list, s: SimilarityMatrix, c: float,
                   model_version: str = "", params: Optional[dict] = None
                   ) -> CorrespondenceMapping:
    """Drop pairs whose similarity is strictly below c; keep scores on the
    survivors and wrap them into a mapping."""
    kept = [CorrespondencePair(source_id=s.row_ids[i], target_id=s.col_ids[j],
                               score=score)
            for i, j, score in pairs if score >= c]
    return CorrespondenceMapping(
        source_screen_id=s.source_screen_id,
        target_screen_id=s.target_screen_id,
        pairs=tuple(kept),
        model_version=model_version,
        params=dict(params or {}),
    )


def match_embeddings(a: ElementEmbeddings, b: ElementEmbeddings, p: MatchParams,
                     model_version: str) -> CorrespondenceMapping:
    s = prune_topk(similarity_matrix(a, b), p.k)
    pairs = greedy_assign(s) if p.assignment == "greedy" else assign(s)
    return filter_matches(pairs, s, p.c, model_version=model_version,
                          params=p.as_dict())


def correspond(a: Screen, b: Screen, m: EncoderModel,
               enc: TextEncoder = DEFAULT_TEXT_ENCODER,
               p: MatchParams = MatchParams()) -> CorrespondenceMapping:
    """Full pipeline: tokenize, forward, similarity, prune, assign, filter."""
    mod_cfg = m.cfg.modalities()
    emb_a = m.embed_screen(a.screen_id, a.element_ids(), tokenize_screen(a, enc, mod_cfg))
    emb_b = m.embed_screen(b.screen_id, b.element_ids(), tokenize_screen(b, enc, mod_cfg))
    return match_embeddings(emb_a, emb_b, p, m.model_version())


def heuristic_embeddings(screen: Screen) -> ElementEmbeddings:
    """Schema-matching baseline features: each element is its 83-dim category
    one-hot, so cosine similarity is 1 for same category and 0 otherwise."""
    if not screen.elements:
        raise EmptyScreen(f"screen {screen.screen_id!r} has no elements")
    vectors = np.stack([encode_category(el.category) for el in screen.elements])
    return ElementEmbeddings(screen_id=screen.screen_id,
                             element_ids=screen.element_ids(), vectors=vectors)


def heuristic_correspond(a: Screen, b: Screen,
                         p: MatchParams = MatchParams()) -> CorrespondenceMapping:
    return match_embeddings(heuristic_embeddings(a), heuristic_embeddings(b),
                            p, HEURISTIC_VERSION)
