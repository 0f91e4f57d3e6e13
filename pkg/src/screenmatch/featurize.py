"""Per-element, per-modality feature extraction feeding the encoder.

Every element always yields a category token; appearance and text tokens are
added when the data is present and the modality is enabled.  An absolute
position token replaces relative attention only in the no-relative ablation.
"""

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from .errors import DimensionMismatch, EmptyScreen
from .screen import APPEARANCE_DIM, TEXT_DIM, Screen, UIElement
from .taxonomy import NUM_CATEGORIES, ElementCategory

CATEGORY = "category"
APPEARANCE = "appearance"
TEXT = "text"
ABS_POSITION = "abs_position"

MODALITY_DIMS = {
    CATEGORY: NUM_CATEGORIES,
    APPEARANCE: APPEARANCE_DIM,
    TEXT: TEXT_DIM,
    ABS_POSITION: 4,
}

# Relative-offset bucketing: granularity 1/16 of the screen, offsets clipped
# to [-1, 1], so 33 buckets per axis with bucket 16 = zero offset.
REL_GRANULARITY = 16
NUM_REL_BUCKETS = 2 * REL_GRANULARITY + 1
REL_ZERO_BUCKET = REL_GRANULARITY


class TextEncoder(Protocol):
    name: str
    version: str

    def encode(self, text: str) -> Optional[np.ndarray]: ...


class HashingTextEncoder:
    """Deterministic fallback text encoder: signed feature hashing of
    character trigrams of the lowercased string into 128 bins, L2 normalized.

    The string is wrapped in boundary sentinels so one- and two-character
    strings still produce a trigram.
    """

    name = "hash-trigram"
    version = "1"

    def encode(self, text: str) -> Optional[np.ndarray]:
        stripped = text.strip().lower()
        if not stripped:
            return None
        padded = "\x02" + stripped + "\x03"
        vec = np.zeros(TEXT_DIM)
        counts = np.zeros(TEXT_DIM)
        for i in range(len(padded) - 2):
            digest = hashlib.blake2b(
                padded[i:i + 3].encode("utf-8"), digest_size=8).digest()
            h = int.from_bytes(digest, "little")
            idx = h % TEXT_DIM
            sign = 1.0 if (h >> 32) & 1 else -1.0
            vec[idx] += sign
            counts[idx] += 1.0
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            # pathological total sign cancellation: fall back to counts
            vec, norm = counts, np.linalg.norm(counts)
        out = vec / norm
        out.flags.writeable = False
        return out


DEFAULT_TEXT_ENCODER = HashingTextEncoder()


def encoder_tag(enc: TextEncoder) -> str:
    return f"{enc.name}/{enc.version}"


def encode_category(category: ElementCategory) -> np.ndarray:
    vec = np.zeros(NUM_CATEGORIES)
    vec[category.flat_index] = 1.0
    return vec


def encode_text(text: str, enc: TextEncoder = DEFAULT_TEXT_ENCODER) -> Optional[np.ndarray]:
    return enc.encode(text)


def appearance_features(crop: np.ndarray) -> Optional[np.ndarray]:
    """88-dim appearance vector: 8x8 mean-grayscale grid (64) followed by
    8-bin per-channel RGB histograms (24), each histogram mass-normalized."""
    img = np.asarray(crop)
    if img.ndim == 2:
        img = img[:, :, None].repeat(3, axis=2)
    if img.ndim != 3 or img.shape[2] < 3:
        raise DimensionMismatch(f"crop must be HxWx3, got {img.shape}")
    img = img[:, :, :3].astype(np.float64)
    if img.size and img.max() > 1.0:
        img = img / 255.0
    h, w = img.shape[:2]
    if h == 0 or w == 0:
        return None
    gray = img.mean(axis=2)
    grid = np.empty(64)
    row_edges = np.linspace(0, h, 9).astype(int)
    col_edges = np.linspace(0, w, 9).astype(int)
    for r in range(8):
        r0, r1 = row_edges[r], max(row_edges[r + 1], row_edges[r] + 1)
        for c in range(8):
            c0, c1 = col_edges[c], max(col_edges[c + 1], col_edges[c] + 1)
            grid[r * 8 + c] = gray[min(r0, h - 1):r1, min(c0, w - 1):c1].mean()
    hists = np.empty(24)
    for ch in range(3):
        counts, _ = np.histogram(img[:, :, ch], bins=8, range=(0.0, 1.0))
        hists[ch * 8:(ch + 1) * 8] = counts / counts.sum()
    return np.concatenate([grid, hists])


def encode_appearance(element: UIElement, screenshot: Optional[np.ndarray] = None,
                      base_dir: Optional[Path] = None) -> Optional[np.ndarray]:
    """Appearance vector for one element, or None when nothing is available.

    Precedence: precomputed vector, then a referenced crop image, then a crop
    cut from the full screenshot by the element bounds.
    """
    if element.appearance_vector is not None:
        vec = np.asarray(element.appearance_vector, dtype=np.float64)
        if vec.shape != (APPEARANCE_DIM,):
            raise DimensionMismatch(
                f"appearance_vector must have length {APPEARANCE_DIM}")
        return vec
    if element.crop_path is not None:
        from PIL import Image

        path = Path(element.crop_path)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        with Image.open(path) as im:
            crop = np.asarray(im.convert("RGB"))
        return appearance_features(crop)
    if screenshot is not None:
        img = np.asarray(screenshot)
        h, w = img.shape[:2]
        b = element.bounds
        y0, y1 = int(b.y1 * h), max(int(b.y2 * h), int(b.y1 * h) + 1)
        x0, x1 = int(b.x1 * w), max(int(b.x2 * w), int(b.x1 * w) + 1)
        return appearance_features(img[y0:y1, x0:x1])
    return None


def relative_buckets(centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise signed center offsets bucketed per axis.

    bucket[i, j] encodes c_j - c_i at 1/16 granularity; offsets are clipped
    to [-1, 1] defensively even though valid centers cannot exceed it.
    """
    c = np.asarray(centers, dtype=np.float64)
    dx = c[None, :, 0] - c[:, None, 0]
    dy = c[None, :, 1] - c[:, None, 1]
    bx = np.clip(np.rint(np.clip(dx, -1.0, 1.0) * REL_GRANULARITY), -REL_GRANULARITY,
                 REL_GRANULARITY).astype(np.int64) + REL_ZERO_BUCKET
    by = np.clip(np.rint(np.clip(dy, -1.0, 1.0) * REL_GRANULARITY), -REL_GRANULARITY,
                 REL_GRANULARITY).astype(np.int64) + REL_ZERO_BUCKET
    return bx, by


@dataclass(frozen=True)
class ModalityConfig:
    use_relative: bool = True
    use_appearance: bool = True
    use_text: bool = True


@dataclass(frozen=True)
class Token:
    element_index: int
    modality: str
    features: np.ndarray


@dataclass(frozen=True)
class ModalityTokens:
    tokens: tuple
    rel_x: np.ndarray
    rel_y: np.ndarray
    element_count: int
    element_centers: np.ndarray

    def __len__(self) -> int:
        return len(self.tokens)

    def indices_of(self, modality: str) -> np.ndarray:
        return np.array([i for i, t in enumerate(self.tokens)
                         if t.modality == modality], dtype=np.int64)


def tokenize_screen(screen: Screen, enc: TextEncoder = DEFAULT_TEXT_ENCODER,
                    cfg: ModalityConfig = ModalityConfig(),
                    screenshot: Optional[np.ndarray] = None,
                    base_dir: Optional[Path] = None) -> ModalityTokens:
    """Emit one token per available (element, modality) pair plus the pairwise
    relative-offset bucket matrices over all emitted tokens."""
    if not screen.elements:
        raise EmptyScreen(f"screen {screen.screen_id!r} has no elements")
    tokens: list[Token] = []
    token_centers: list[tuple[float, float]] = []
    element_centers = np.array([el.bounds.center for el in screen.elements])

    def emit(idx: int, modality: str, features: np.ndarray) -> None:
        features = np.asarray(features, dtype=np.float64)
        features.flags.writeable = False
        tokens.append(Token(idx, modality, features))
        token_centers.append(tuple(element_centers[idx]))

    for idx, el in enumerate(screen.elements):
        emit(idx, CATEGORY, encode_category(el.category))
        if cfg.use_appearance:
            vec = encode_appearance(el, screenshot=screenshot, base_dir=base_dir)
            if vec is not None:
                emit(idx, APPEARANCE, vec)
        if cfg.use_text and el.text is not None:
            if el.text_vector is not None:
                vec = np.asarray(el.text_vector, dtype=np.float64)
                if vec.shape != (TEXT_DIM,):
                    raise DimensionMismatch(f"text_vector must have length {TEXT_DIM}")
            else:
                vec = enc.encode(el.text)
            if vec is not None:
                emit(idx, TEXT, vec)
        if not cfg.use_relative:
            emit(idx, ABS_POSITION, np.array(el.bounds.as_list()))
    bx, by = relative_buckets(np.array(token_centers))
    return ModalityTokens(
        tokens=tuple(tokens),
        rel_x=bx,
        rel_y=by,
        element_count=len(screen.elements),
        element_centers=element_centers,
    )
