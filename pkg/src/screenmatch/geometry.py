"""Bounding boxes in normalized screen coordinates (origin top-left)."""

from dataclasses import dataclass

from .errors import MalformedBounds


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box with x1 <= x2, y1 <= y2, all coordinates in [0, 1]."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not all(map(_finite01, (self.x1, self.y1, self.x2, self.y2))):
            raise MalformedBounds(f"coordinates outside [0, 1]: {self}")
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise MalformedBounds(f"inverted box: {self}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]

    def translate(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)


def _finite01(v: float) -> bool:
    return isinstance(v, (int, float)) and 0.0 <= v <= 1.0


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes; 0.0 when the union is empty."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(ix, 0.0) * max(iy, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union
