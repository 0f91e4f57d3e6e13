"""screenmatch: screen correspondence via multi-modal element embeddings.

Featurizes detected UI elements across category/appearance/text modalities,
encodes them with a transformer trained by masked element prediction, and
matches embeddings between screens through similarity-matrix assignment.
Ships an evaluation harness, a synthetic corpus generator, and an
embedding-index service for search, overlay transfer, and replay.
"""

from .encoder import EncoderConfig, EncoderModel, init_model, load_checkpoint, save_checkpoint
from .errors import ScreenMatchError
from .geometry import BoundingBox, iou
from .matcher import MatchParams, correspond, heuristic_correspond
from .screen import (CorrespondenceMapping, CorrespondencePair, Screen,
                     UIElement, load_screen, parse_screen, save_screen,
                     serialize_screen)
from .taxonomy import NUM_CATEGORIES, TAXONOMY_VERSION, ElementCategory, category_table
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "BoundingBox", "CorrespondenceMapping", "CorrespondencePair",
    "ElementCategory", "EncoderConfig", "EncoderModel", "MatchParams",
    "NUM_CATEGORIES", "Screen", "ScreenMatchError", "TAXONOMY_VERSION",
    "TrainConfig", "UIElement", "category_table", "correspond",
    "heuristic_correspond", "init_model", "iou", "load_checkpoint",
    "load_screen", "parse_screen", "save_checkpoint", "save_screen",
    "serialize_screen", "train", "__version__",
]
