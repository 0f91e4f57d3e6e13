"""Screen documents: elements, screens, correspondence mappings, JSON I/O.

Document format (UTF-8 JSON)::

    {
      "screen_id": "...", "app_id": "...", "screen_category": "login",
      "width_px": 1170, "height_px": 2532, "coords": "normalized",
      "elements": [
        {"element_id": "e00", "bbox": [x1, y1, x2, y2], "category": "button",
         "icon_type": "add", "state": "on", "confidence": 0.97,
         "text": "Login", "text_vector": [...128...],
         "appearance_vector": [...88...], "crop_path": "crops/e00.png",
         "role_label": "login_button"}
      ]
    }

Coordinates default to normalized; ``"coords": "pixel"`` divides by the
declared screen dimensions.  All types are immutable after construction.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import DuplicateElementId, MalformedBounds, MalformedDocument
from .geometry import BoundingBox
from .taxonomy import ElementCategory, make_category

APPEARANCE_DIM = 88
TEXT_DIM = 128


@dataclass(frozen=True)
class UIElement:
    element_id: str
    bounds: BoundingBox
    category: ElementCategory
    detection_confidence: float = 1.0
    text: Optional[str] = None
    text_vector: Optional[np.ndarray] = None
    appearance_vector: Optional[np.ndarray] = None
    crop_path: Optional[str] = None
    role_label: Optional[str] = None

    def __post_init__(self):
        if self.text is not None and not self.text.strip():
            raise MalformedDocument(
                f"element {self.element_id!r}: text present but empty")
        if not 0.0 <= self.detection_confidence <= 1.0:
            raise MalformedDocument(
                f"element {self.element_id!r}: confidence outside [0, 1]")


@dataclass(frozen=True)
class Screen:
    screen_id: str
    app_id: str
    width_px: int
    height_px: int
    elements: tuple
    screen_category: Optional[str] = None

    def __post_init__(self):
        seen = set()
        for el in self.elements:
            if el.element_id in seen:
                raise DuplicateElementId(
                    f"{self.screen_id}: duplicate element_id {el.element_id!r}")
            seen.add(el.element_id)

    def element(self, element_id: str) -> UIElement:
        for el in self.elements:
            if el.element_id == element_id:
                return el
        raise KeyError(element_id)

    def element_ids(self) -> list[str]:
        return [el.element_id for el in self.elements]


@dataclass(frozen=True)
class CorrespondencePair:
    source_id: str
    target_id: str
    score: float


@dataclass(frozen=True)
class CorrespondenceMapping:
    source_screen_id: str
    target_screen_id: str
    pairs: tuple
    model_version: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        src = [p.source_id for p in self.pairs]
        tgt = [p.target_id for p in self.pairs]
        if len(set(src)) != len(src) or len(set(tgt)) != len(tgt):
            raise MalformedDocument("mapping is not one-to-one")

    def as_dict(self) -> dict:
        return {
            "source": self.source_screen_id,
            "target": self.target_screen_id,
            "params": dict(self.params),
            "model_version": self.model_version,
            "pairs": [{"a": p.source_id, "b": p.target_id, "score": p.score}
                      for p in self.pairs],
        }

    @staticmethod
    def from_dict(doc: dict) -> "CorrespondenceMapping":
        return CorrespondenceMapping(
            source_screen_id=doc["source"],
            target_screen_id=doc["target"],
            pairs=tuple(CorrespondencePair(p["a"], p["b"], float(p["score"]))
                        for p in doc["pairs"]),
            model_version=doc.get("model_version", ""),
            params=doc.get("params", {}),
        )


def _as_vector(raw, dim: int, what: str) -> np.ndarray:
    vec = np.asarray(raw, dtype=np.float64)
    if vec.shape != (dim,):
        raise MalformedDocument(f"{what} must have length {dim}, got {vec.shape}")
    vec.flags.writeable = False
    return vec


def _parse_element(raw: dict, width: float, height: float, pixel: bool) -> UIElement:
    try:
        element_id = str(raw["element_id"])
        bbox = raw["bbox"]
        category_name = raw["category"]
    except (KeyError, TypeError) as exc:
        raise MalformedDocument(f"element missing required field: {exc}") from exc
    if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
        raise MalformedDocument(f"element {element_id!r}: bbox must be [x1,y1,x2,y2]")
    coords = [float(v) for v in bbox]
    if pixel:
        coords = [coords[0] / width, coords[1] / height,
                  coords[2] / width, coords[3] / height]
    try:
        bounds = BoundingBox(*coords)
    except MalformedBounds as exc:
        raise MalformedBounds(f"element {element_id!r}: {exc}") from exc
    category = make_category(str(category_name),
                             sub_kind=raw.get("icon_type"),
                             state=raw.get("state"))
    text = raw.get("text")
    if text is not None:
        text = str(text)
    text_vector = raw.get("text_vector")
    if text_vector is not None:
        text_vector = _as_vector(text_vector, TEXT_DIM, "text_vector")
    appearance = raw.get("appearance_vector")
    if appearance is not None:
        appearance = _as_vector(appearance, APPEARANCE_DIM, "appearance_vector")
    return UIElement(
        element_id=element_id,
        bounds=bounds,
        category=category,
        detection_confidence=float(raw.get("confidence", 1.0)),
        text=text,
        text_vector=text_vector,
        appearance_vector=appearance,
        crop_path=raw.get("crop_path"),
        role_label=raw.get("role_label"),
    )


def parse_screen(doc: Union[str, bytes, dict]) -> Screen:
    """Parse and validate one screen document (JSON text or decoded dict)."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocument("screen document must be a JSON object")
    try:
        screen_id = str(doc["screen_id"])
        app_id = str(doc["app_id"])
        width = int(doc["width_px"])
        height = int(doc["height_px"])
        elements_raw = doc["elements"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedDocument(f"screen missing required field: {exc}") from exc
    if width <= 0 or height <= 0:
        raise MalformedDocument(f"{screen_id}: screen dimensions must be positive")
    if not isinstance(elements_raw, list):
        raise MalformedDocument(f"{screen_id}: elements must be a list")
    coords_mode = doc.get("coords", "normalized")
    if coords_mode not in ("normalized", "pixel"):
        raise MalformedDocument(f"{screen_id}: unknown coords mode {coords_mode!r}")
    pixel = coords_mode == "pixel"
    elements = tuple(_parse_element(raw, width, height, pixel)
                     for raw in elements_raw)
    return Screen(
        screen_id=screen_id,
        app_id=app_id,
        width_px=width,
        height_px=height,
        elements=elements,
        screen_category=doc.get("screen_category"),
    )


def serialize_screen(screen: Screen) -> dict:
    """Inverse of parse_screen; always emits normalized coordinates."""
    elements = []
    for el in screen.elements:
        raw = {
            "element_id": el.element_id,
            "bbox": el.bounds.as_list(),
            "category": el.category.base_class,
            "confidence": el.detection_confidence,
        }
        if el.category.base_class == "icon" and el.category.sub_kind != "generic":
            raw["icon_type"] = el.category.sub_kind
        elif el.category.base_class in ("toggle", "checkbox"):
            raw["state"] = el.category.sub_kind
        if el.text is not None:
            raw["text"] = el.text
        if el.text_vector is not None:
            raw["text_vector"] = [float(v) for v in el.text_vector]
        if el.appearance_vector is not None:
            raw["appearance_vector"] = [float(v) for v in el.appearance_vector]
        if el.crop_path is not None:
            raw["crop_path"] = el.crop_path
        if el.role_label is not None:
            raw["role_label"] = el.role_label
        elements.append(raw)
    doc = {
        "screen_id": screen.screen_id,
        "app_id": screen.app_id,
        "width_px": screen.width_px,
        "height_px": screen.height_px,
        "coords": "normalized",
        "elements": elements,
    }
    if screen.screen_category is not None:
        doc["screen_category"] = screen.screen_category
    return doc


def load_screen(path: Union[str, Path]) -> Screen:
    return parse_screen(Path(path).read_text(encoding="utf-8"))


def save_screen(screen: Screen, path: Union[str, Path]) -> None:
    Path(path).write_text(
        json.dumps(serialize_screen(screen), indent=1), encoding="utf-8")
