import numpy as np
import pytest

from screenmatch.encoder import EncoderConfig, init_model
from screenmatch.geometry import BoundingBox
from screenmatch.rng import derived_rng
from screenmatch.screen import Screen, UIElement
from screenmatch.synthcorpus import SCREEN_CATEGORIES, generate_screen
from screenmatch.taxonomy import make_category


@pytest.fixture(scope="session")
def tiny_model():
    """Smallest model that exercises every code path; untrained."""
    return init_model(EncoderConfig(hidden=8, layers=1, heads=2, dropout=0.0, seed=0))


@pytest.fixture(scope="session")
def small_model():
    return init_model(EncoderConfig(hidden=16, layers=1, heads=2, dropout=0.0, seed=1))


@pytest.fixture(scope="session")
def login_screen():
    return generate_screen("login", derived_rng(0, "fixture-login"),
                           screen_id="login-fixture")


@pytest.fixture(scope="session")
def register_screen():
    return generate_screen("register", derived_rng(0, "fixture-register"),
                           screen_id="register-fixture")


@pytest.fixture(scope="session")
def nine_screens():
    """One instantiation per screen category."""
    return [generate_screen(cat, derived_rng(0, f"fixture-{cat}"),
                            screen_id=f"{cat}-fixture")
            for cat in SCREEN_CATEGORIES]


def make_element(element_id, x1, y1, x2, y2, base="button", text=None, **kw):
    return UIElement(element_id=element_id, bounds=BoundingBox(x1, y1, x2, y2),
                     category=make_category(base), text=text, **kw)


def make_screen(screen_id, elements, **kw):
    kw.setdefault("app_id", "test.app")
    kw.setdefault("width_px", 1080)
    kw.setdefault("height_px", 1920)
    return Screen(screen_id=screen_id, elements=tuple(elements), **kw)


@pytest.fixture
def two_button_screen():
    return make_screen("two-btn", [
        make_element("ok", 0.1, 0.8, 0.45, 0.9, text="OK"),
        make_element("cancel", 0.55, 0.8, 0.9, 0.9, text="Cancel"),
    ])


def rig_rng(tag: str) -> np.random.Generator:
    return derived_rng(1234, tag)
