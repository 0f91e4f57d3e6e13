"""Exception hierarchy shared across the package."""


class ScreenMatchError(Exception):
    """Base class for all errors raised by this package."""


class MalformedDocument(ScreenMatchError):
    """Screen document is not parseable or is missing required fields."""


class MalformedBounds(ScreenMatchError):
    """Bounding box violates x1 <= x2, y1 <= y2 or the [0, 1] range."""


class DuplicateElementId(ScreenMatchError):
    """Two elements of one screen share an element_id."""


class UnknownCategoryName(ScreenMatchError):
    """Category name not present in the shipped taxonomy."""


class UnknownCategory(ScreenMatchError):
    """Screen category outside the 9-entry generator set."""


class EmptyScreen(ScreenMatchError):
    """Operation requires a screen with at least one element."""


class EmptyCorpus(ScreenMatchError):
    """Training requires a non-empty corpus."""


class DimensionMismatch(ScreenMatchError):
    """Vector or matrix dimensions do not match the expected shape."""


class InvalidConfig(ScreenMatchError):
    """Model or training configuration violates its invariants."""


class NonFiniteGradient(ScreenMatchError):
    """Backward pass produced NaN or infinite gradients."""


class CheckpointError(ScreenMatchError):
    """Checkpoint file is damaged or belongs to an incompatible build."""


class ModelVersionMismatch(ScreenMatchError):
    """Index or checkpoint was produced by a different model version."""


class EmptyIndex(ScreenMatchError):
    """Search requires at least one indexed element."""


class EmptyAnnotationStore(ScreenMatchError):
    """Overlay transfer requires at least one stored annotation."""


class UnknownId(ScreenMatchError):
    """Referenced screen, element, annotation or trace does not exist."""


class GateNotMet(ScreenMatchError):
    """A configured acceptance gate rejected the request."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class NoMatch(GateNotMet):
    """Replay could not locate the recorded target on the live screen."""
