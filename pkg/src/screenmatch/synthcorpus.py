"""Synthetic screen generator.

Nine category templates, each a set of role slots with nominal layouts,
per-role phrase pools, and shared style families. Instantiation jitters
positions, applies a global layout offset, samples phrases, and shuffles
element order, so absolute position and list index are unreliable cues
while roles stay recoverable from text, style, and relative geometry.

Ambiguity is deliberate: login and register screens carry several fields of
the same category and style family that only text and position distinguish,
popups carry twin dialog buttons, and search results repeat one row style.
"""

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import UnknownCategory
from .geometry import BoundingBox
from .rng import derived_rng
from .screen import APPEARANCE_DIM, Screen, UIElement, save_screen
from .taxonomy import make_category

GENERATOR_VERSION = "synth-v1"

SCREEN_CATEGORIES = (
    "media_player", "in_app_purchase", "login", "permission_request",
    "register", "pre_login", "popup", "search", "web_view",
)


@dataclass(frozen=True)
class Slot:
    role: str
    base: str
    style: str
    box: tuple
    texts: tuple = ()
    kind: Optional[str] = None
    state: Optional[str] = None
    optional: bool = False


def _t(*args, **kw) -> Slot:
    return Slot(*args, **kw)


TEMPLATES: dict = {
    "login": (
        _t("title_text", "text", "title", (0.25, 0.10, 0.75, 0.16),
           ("Welcome Back", "Welcome back!", "Welcome")),
        _t("app_logo", "picture", "logo", (0.40, 0.19, 0.60, 0.29)),
        _t("username_field", "text_field", "field", (0.10, 0.34, 0.90, 0.41),
           ("Email", "Email address", "Email or username")),
        _t("password_field", "text_field", "field", (0.10, 0.45, 0.90, 0.52),
           ("Password", "Your password", "Passcode")),
        _t("login_button", "button", "primary", (0.10, 0.57, 0.90, 0.64),
           ("Log In", "Log In Now", "Login")),
        _t("forgot_link", "text", "link", (0.25, 0.67, 0.75, 0.71),
           ("Forgot password?", "Forgot your password?")),
        _t("social_google", "button", "social_g", (0.10, 0.76, 0.47, 0.83)),
        _t("social_facebook", "button", "social_f", (0.53, 0.76, 0.90, 0.83)),
        _t("signup_link", "text", "link2", (0.25, 0.87, 0.75, 0.91),
           ("Create account", "Create an account", "Create new account"),
           optional=True),
    ),
    "register": (
        _t("title_text", "text", "title", (0.25, 0.07, 0.75, 0.13),
           ("Create your account", "Create an account", "Create account")),
        _t("name_field", "text_field", "field", (0.10, 0.18, 0.90, 0.25),
           ("Full name", "Your full name", "Name")),
        _t("email_field", "text_field", "field", (0.10, 0.29, 0.90, 0.36),
           ("Email", "Email address", "Work email")),
        _t("password_field", "text_field", "field", (0.10, 0.40, 0.90, 0.47),
           ("Password", "Enter password", "Your password")),
        _t("confirm_field", "text_field", "field", (0.10, 0.51, 0.90, 0.58),
           ("Password", "Enter password", "Your password")),
        _t("terms_checkbox", "checkbox", "check", (0.10, 0.63, 0.16, 0.67),
           state="unchecked"),
        _t("terms_text", "text", "body", (0.20, 0.63, 0.90, 0.67),
           ("I agree to the Terms", "I accept the Terms")),
        _t("register_button", "button", "primary", (0.10, 0.72, 0.90, 0.79),
           ("Register", "Register now", "Register free")),
        _t("login_link", "text", "link", (0.20, 0.84, 0.80, 0.88),
           ("Already have an account?", "Already registered?"),
           optional=True),
    ),
    "pre_login": (
        _t("hero_image", "picture", "hero", (0.10, 0.08, 0.90, 0.42)),
        _t("app_logo", "picture", "logo", (0.42, 0.45, 0.58, 0.54)),
        _t("tagline", "text", "title", (0.15, 0.57, 0.85, 0.63),
           ("Your music, anywhere", "Your music, your way",
            "Your music starts here")),
        _t("page_dots", "page_control", "dots", (0.40, 0.66, 0.60, 0.69)),
        _t("login_button", "button", "primary", (0.10, 0.73, 0.90, 0.80),
           ("Log In", "Log In Now")),
        _t("register_button", "button", "secondary", (0.10, 0.83, 0.90, 0.90),
           ("Sign Up", "Sign Up Free")),
        _t("skip_link", "text", "link", (0.30, 0.93, 0.70, 0.96),
           ("Skip for now", "Skip", "Skip intro"), optional=True),
    ),
    "popup": (
        _t("scrim", "container", "scrim", (0.02, 0.02, 0.98, 0.98)),
        _t("dialog_box", "dialog", "dialog_bg", (0.08, 0.30, 0.92, 0.66)),
        _t("popup_title", "text", "title", (0.12, 0.33, 0.88, 0.39),
           ("Discard changes?", "Discard draft?", "Discard this?")),
        _t("popup_message", "text", "body", (0.12, 0.42, 0.88, 0.51),
           ("This action cannot be undone.",
            "This action is permanent.")),
        _t("cancel_button", "button", "dialog_btn", (0.12, 0.55, 0.48, 0.62),
           ("Cancel", "No, cancel")),
        _t("confirm_button", "button", "dialog_btn", (0.52, 0.55, 0.88, 0.62),
           ("OK", "Okay")),
        _t("close_icon", "icon", "icon_dark", (0.84, 0.31, 0.90, 0.35),
           kind="close", optional=True),
    ),
    "permission_request": (
        _t("perm_icon", "icon", "icon_accent", (0.42, 0.16, 0.58, 0.25),
           kind="location"),
        _t("perm_title", "text", "title", (0.15, 0.30, 0.85, 0.36),
           ("Location access", "Location services", "Location permission")),
        _t("perm_body", "text", "body", (0.12, 0.40, 0.88, 0.50),
           ("We use this to find nearby results.",
            "We use this to improve recommendations.")),
        _t("precise_toggle", "toggle", "toggle", (0.74, 0.54, 0.88, 0.59),
           state="on"),
        _t("precise_text", "text", "body", (0.12, 0.54, 0.70, 0.59),
           ("Use precise location",)),
        _t("allow_button", "button", "primary", (0.10, 0.66, 0.90, 0.73),
           ("Allow", "Allow access")),
        _t("deny_button", "button", "secondary", (0.10, 0.77, 0.90, 0.84),
           ("Deny", "Deny access")),
    ),
    "media_player": (
        _t("album_art", "picture", "art", (0.15, 0.10, 0.85, 0.48)),
        _t("track_title", "text", "title", (0.15, 0.52, 0.85, 0.58),
           ("Midnight Drive", "Midnight Drive (Live)",
            "Midnight Drive - Remix")),
        _t("artist_name", "text", "body", (0.20, 0.60, 0.80, 0.64),
           ("The Wanderers", "The Wanderers Band", "Wanderers")),
        _t("progress_slider", "slider", "slider", (0.10, 0.68, 0.90, 0.71)),
        _t("time_elapsed", "text", "small", (0.10, 0.73, 0.22, 0.76),
           ("0:42", "0:15", "0:07")),
        _t("time_total", "text", "small", (0.78, 0.73, 0.90, 0.76),
           ("3:30", "3:45", "3:12")),
        _t("prev_icon", "icon", "icon_dark", (0.18, 0.80, 0.28, 0.87),
           kind="skip_previous"),
        _t("play_icon", "icon", "icon_accent", (0.43, 0.78, 0.57, 0.89),
           kind="play"),
        _t("next_icon", "icon", "icon_dark", (0.72, 0.80, 0.82, 0.87),
           kind="skip_next"),
        _t("shuffle_icon", "icon", "icon_dim", (0.06, 0.81, 0.13, 0.86),
           kind="shuffle", optional=True),
    ),
    "in_app_purchase": (
        _t("product_image", "picture", "product", (0.25, 0.08, 0.75, 0.30)),
        _t("product_title", "text", "title", (0.15, 0.33, 0.85, 0.39),
           ("Premium Plan", "Premium Plus", "Premium Annual")),
        _t("plan_segment", "segmented_control", "segment", (0.15, 0.43, 0.85, 0.49),
           ("Monthly", "Yearly")),
        _t("price_text", "text", "price", (0.30, 0.53, 0.70, 0.60),
           ("$4.99 / month", "$9.99 / month", "$39.99 / year")),
        _t("renew_toggle", "toggle", "toggle", (0.74, 0.64, 0.88, 0.69),
           state="off"),
        _t("renew_text", "text", "body", (0.12, 0.64, 0.70, 0.69),
           ("Auto-renew",)),
        _t("buy_button", "button", "primary", (0.10, 0.74, 0.90, 0.81),
           ("Buy Now", "Buy", "Buy today")),
        _t("restore_link", "text", "link", (0.25, 0.85, 0.75, 0.89),
           ("Restore purchases",), optional=True),
        _t("close_icon", "icon", "icon_dark", (0.88, 0.04, 0.94, 0.08),
           kind="close"),
    ),
    "search": (
        _t("search_field", "text_field", "searchbar", (0.06, 0.05, 0.80, 0.11),
           ("Search", "Search products", "Type to search")),
        _t("search_icon", "icon", "icon_dim", (0.84, 0.06, 0.92, 0.10),
           kind="search"),
        _t("filter_segment", "segmented_control", "segment", (0.06, 0.14, 0.94, 0.19),
           ("All", "Top results")),
        _t("result_thumb_1", "picture", "thumb", (0.06, 0.24, 0.22, 0.33)),
        _t("result_title_1", "text", "result", (0.26, 0.26, 0.94, 0.31),
           ("Wireless headphones", "Bluetooth headphones",
            "Studio headphones")),
        _t("result_thumb_2", "picture", "thumb", (0.06, 0.38, 0.22, 0.47)),
        _t("result_title_2", "text", "result", (0.26, 0.40, 0.94, 0.45),
           ("Desk lamp", "LED desk lamp", "Folding desk lamp")),
        _t("result_thumb_3", "picture", "thumb", (0.06, 0.52, 0.22, 0.61)),
        _t("result_title_3", "text", "result", (0.26, 0.54, 0.94, 0.59),
           ("Coffee grinder", "Burr coffee grinder", "Manual coffee grinder")),
        _t("cancel_link", "text", "link", (0.40, 0.95, 0.60, 0.98),
           ("Cancel",), optional=True),
    ),
    "web_view": (
        _t("back_icon", "icon", "icon_dark", (0.04, 0.04, 0.11, 0.09),
           kind="arrow_backward"),
        _t("forward_icon", "icon", "icon_dark", (0.14, 0.04, 0.21, 0.09),
           kind="arrow_forward"),
        _t("url_bar", "text_field", "urlbar", (0.24, 0.04, 0.76, 0.09),
           ("example.com", "www.example.com", "m.example.com")),
        _t("refresh_icon", "icon", "icon_dark", (0.79, 0.04, 0.86, 0.09),
           kind="refresh"),
        _t("share_icon", "icon", "icon_dark", (0.89, 0.04, 0.96, 0.09),
           kind="share"),
        _t("page_body", "container", "page_bg", (0.02, 0.12, 0.98, 0.98)),
        _t("headline_text", "text", "title", (0.08, 0.16, 0.92, 0.22),
           ("Top story: markets rally", "Top story: markets climb")),
        _t("paragraph_1", "text", "body", (0.08, 0.26, 0.92, 0.40),
           ("Lorem ipsum dolor sit amet, consectetur.",
            "Lorem ipsum dolor sit amet elit.")),
        _t("page_image", "picture", "photo", (0.08, 0.44, 0.92, 0.66)),
        _t("paragraph_2", "text", "body", (0.08, 0.70, 0.92, 0.84),
           ("Sed do eiusmod tempor incididunt ut labore.",
            "Sed do eiusmod tempor ut dolore.")),
    ),
}

# (category, role) -> phrase pool, for perturb()'s text-variant swaps
ROLE_POOLS = {(cat, slot.role): slot.texts
              for cat, slots in TEMPLATES.items() for slot in slots if slot.texts}

# Slot groups whose rectangles shuffle uniformly per app: real layouts
# disagree on these orders, so position alone cannot identify the role and
# text (fields) or appearance (social buttons) has to. A nested tuple moves
# as a glued run that keeps its internal order, the way confirm-password
# always sits directly under password even when the form rows move around.
SHUFFLE_GROUPS = {
    "login": (("social_google", "social_facebook"),),
    "register": (("name_field", "email_field",
                  ("password_field", "confirm_field")),),
}


def _shuffled_boxes(boxes: dict, group: tuple, rng: np.random.Generator) -> None:
    leaves = [r for item in group
              for r in ((item,) if isinstance(item, str) else item)]
    rects = sorted((boxes[r] for r in leaves), key=lambda b: (b[1], b[0]))
    order = rng.permutation(len(group))
    permuted = [r for i in order
                for r in ((group[i],) if isinstance(group[i], str) else group[i])]
    for role, rect in zip(permuted, rects):
        boxes[role] = rect

_INSERT_POOL = (
    ("icon", "info", "icon_dim", ()),
    ("icon", "star", "icon_dim", ()),
    ("icon", "settings", "icon_dark", ()),
    ("text", None, "small", ("New", "Beta", "Ad")),
    ("picture", None, "thumb", ()),
)

_DIMS = ((1080, 1920), (1170, 2532), (720, 1280))


def style_vector(style: str) -> np.ndarray:
    """Deterministic 88-dim base appearance for a style family; instances add
    noise on top of it."""
    h = int.from_bytes(hashlib.blake2b(style.encode(), digest_size=8).digest(),
                       "little")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[h]))
    return rng.uniform(0.2, 0.8, size=APPEARANCE_DIM)


def _clamped_box(x1, y1, x2, y2) -> BoundingBox:
    w = min(x2 - x1, 1.0)
    h = min(y2 - y1, 1.0)
    x1 = min(max(x1, 0.0), 1.0 - w)
    y1 = min(max(y1, 0.0), 1.0 - h)
    return BoundingBox(x1, y1, x1 + w, y1 + h)


def generate_screen(category: str, rng: np.random.Generator,
                    screen_id: Optional[str] = None) -> Screen:
    """One template instantiation; deterministic for a given generator state."""
    if category not in TEMPLATES:
        raise UnknownCategory(f"unknown screen category {category!r}")
    slots = TEMPLATES[category]
    boxes = {slot.role: slot.box for slot in slots}
    for group in SHUFFLE_GROUPS.get(category, ()):
        _shuffled_boxes(boxes, group, rng)
    gdx = rng.uniform(-0.03, 0.03)
    gdy = rng.uniform(-0.05, 0.05)
    elements = []
    for slot in slots:
        include = (not slot.optional) or rng.random() < 0.75
        dx = gdx + rng.uniform(-0.01, 0.01)
        dy = gdy + rng.uniform(-0.01, 0.01)
        scale = rng.uniform(0.97, 1.03)
        text = str(rng.choice(slot.texts)) if slot.texts else None
        appearance = np.clip(style_vector(slot.style)
                             + rng.normal(0.0, 0.02, APPEARANCE_DIM), 0.0, 1.0)
        confidence = float(rng.uniform(0.9, 1.0))
        if not include:
            continue
        x1, y1, x2, y2 = boxes[slot.role]
        cx, cy = (x1 + x2) / 2 + dx, (y1 + y2) / 2 + dy
        w, h = (x2 - x1) * scale, (y2 - y1) * scale
        bounds = _clamped_box(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)
        elements.append(UIElement(
            element_id=slot.role,
            bounds=bounds,
            category=make_category(slot.base, sub_kind=slot.kind, state=slot.state),
            detection_confidence=confidence,
            text=text,
            appearance_vector=appearance,
            role_label=slot.role,
        ))
    order = rng.permutation(len(elements))
    elements = [elements[i] for i in order]
    if screen_id is None:
        screen_id = f"{category}-{rng.integers(0, 16**8):08x}"
    width, height = _DIMS[int(rng.integers(0, len(_DIMS)))]
    return Screen(screen_id=screen_id, app_id=f"synth.{category}",
                  width_px=width, height_px=height,
                  elements=tuple(elements), screen_category=category)


@dataclass(frozen=True)
class PerturbSpec:
    translate: tuple = (0.0, 0.0)
    style_noise_sigma: float = 0.0
    text_variant_rate: float = 0.0
    insert_count: int = 0
    delete_count: int = 0
    reorder: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.text_variant_rate <= 1.0:
            raise ValueError("text_variant_rate must lie in [0, 1]")
        if self.insert_count < 0 or self.delete_count < 0:
            raise ValueError("insert/delete counts must be non-negative")


def _effective_translation(s: Screen, dx: float, dy: float) -> tuple:
    """Clip the requested rigid shift so no box leaves the unit square."""
    x1 = min(el.bounds.x1 for el in s.elements)
    x2 = max(el.bounds.x2 for el in s.elements)
    y1 = min(el.bounds.y1 for el in s.elements)
    y2 = max(el.bounds.y2 for el in s.elements)
    return (float(np.clip(dx, -x1, 1.0 - x2)), float(np.clip(dy, -y1, 1.0 - y2)))


def perturb(s: Screen, spec: PerturbSpec,
            screen_id: Optional[str] = None) -> tuple[Screen, list]:
    """Perturbed copy plus the ground-truth identity pairs of the survivors.

    Inserted elements appear only on the output side and in no ground-truth
    pair; deletions never remove the last element.
    """
    rng = derived_rng(spec.seed, f"perturb-{s.screen_id}")
    dx, dy = _effective_translation(s, *spec.translate)
    elements = list(s.elements)

    n_delete = min(spec.delete_count, len(elements) - 1)
    if n_delete > 0:
        drop = set(rng.choice(len(elements), size=n_delete, replace=False).tolist())
        elements = [el for i, el in enumerate(elements) if i not in drop]

    out = []
    for el in elements:
        bounds = el.bounds.translate(dx, dy)
        text = el.text
        if (text is not None and s.screen_category is not None
                and rng.random() < spec.text_variant_rate):
            pool = ROLE_POOLS.get((s.screen_category, el.role_label), ())
            variants = [p for p in pool if p != text]
            if variants:
                text = str(rng.choice(variants))
        appearance = el.appearance_vector
        if appearance is not None and spec.style_noise_sigma > 0:
            appearance = np.clip(
                appearance + rng.normal(0.0, spec.style_noise_sigma, appearance.shape),
                0.0, 1.0)
        out.append(replace(el, bounds=bounds, text=text,
                           appearance_vector=appearance))

    for i in range(spec.insert_count):
        base, kind, style, texts = _INSERT_POOL[int(rng.integers(0, len(_INSERT_POOL)))]
        w = rng.uniform(0.05, 0.14)
        h = rng.uniform(0.03, 0.08)
        x1 = rng.uniform(0.0, 1.0 - w)
        y1 = rng.uniform(0.0, 1.0 - h)
        out.append(UIElement(
            element_id=f"ins-{i}",
            bounds=BoundingBox(x1, y1, x1 + w, y1 + h),
            category=make_category(base, sub_kind=kind),
            detection_confidence=float(rng.uniform(0.8, 1.0)),
            text=str(rng.choice(texts)) if texts else None,
            appearance_vector=np.clip(
                style_vector(style) + rng.normal(0.0, 0.02, APPEARANCE_DIM), 0.0, 1.0),
        ))

    if spec.reorder:
        order = rng.permutation(len(out))
        out = [out[i] for i in order]

    survivors = {el.element_id for el in elements}
    gt = [(el.element_id, el.element_id) for el in s.elements
          if el.element_id in survivors]
    target = Screen(screen_id=screen_id or f"{s.screen_id}-p{spec.seed}",
                    app_id=s.app_id, width_px=s.width_px, height_px=s.height_px,
                    elements=tuple(out), screen_category=s.screen_category)
    return target, gt


@dataclass(frozen=True)
class CorpusConfig:
    screens_per_category: int = 10
    intra_pairs_per_category: int = 5
    same_screen_pairs_per_category: int = 5
    translate_max: tuple = (0.06, 0.06)
    style_noise_sigma: float = 0.03
    text_variant_rate: float = 0.10
    insert_count: int = 1
    delete_count: int = 1
    reorder: bool = True
    seed: int = 0
    categories: tuple = SCREEN_CATEGORIES

    def as_dict(self) -> dict:
        return {
            "screens_per_category": self.screens_per_category,
            "intra_pairs_per_category": self.intra_pairs_per_category,
            "same_screen_pairs_per_category": self.same_screen_pairs_per_category,
            "translate_max": list(self.translate_max),
            "style_noise_sigma": self.style_noise_sigma,
            "text_variant_rate": self.text_variant_rate,
            "insert_count": self.insert_count,
            "delete_count": self.delete_count,
            "reorder": self.reorder,
            "seed": self.seed,
            "categories": list(self.categories),
        }


def generate_corpus_screens(cfg: CorpusConfig) -> dict:
    """All base instantiations, keyed by screen_id."""
    screens = {}
    for cat in cfg.categories:
        if cat not in TEMPLATES:
            raise UnknownCategory(f"unknown screen category {cat!r}")
        for i in range(cfg.screens_per_category):
            rng = derived_rng(cfg.seed, f"screen-{cat}-{i}")
            s = generate_screen(cat, rng, screen_id=f"{cat}-{i:03d}")
            screens[s.screen_id] = s
    return screens


def generate_pairs(cfg: CorpusConfig, out_dir) -> dict:
    """Write screens/, pairs/, and manifest.json; returns the manifest."""
    out_dir = Path(out_dir)
    (out_dir / "screens").mkdir(parents=True, exist_ok=True)
    (out_dir / "pairs").mkdir(parents=True, exist_ok=True)
    screens = generate_corpus_screens(cfg)
    pair_files = []

    for cat in cfg.categories:
        ids = [f"{cat}-{i:03d}" for i in range(cfg.screens_per_category)]
        rng = derived_rng(cfg.seed, f"pairs-{cat}")
        for n in range(cfg.intra_pairs_per_category):
            if len(ids) < 2:
                break
            a, b = rng.choice(len(ids), size=2, replace=False)
            sa, sb = screens[ids[int(a)]], screens[ids[int(b)]]
            shared = sorted(set(sa.element_ids()) & set(sb.element_ids()))
            pair_files.append((f"intra_class-{cat}-{n:03d}", {
                "screen_a": sa.screen_id, "screen_b": sb.screen_id,
                "relation": "intra_class",
                "gt_pairs": [[r, r] for r in shared],
            }))
        for n in range(cfg.same_screen_pairs_per_category):
            base = screens[ids[int(rng.integers(0, len(ids)))]]
            spec = PerturbSpec(
                translate=(float(rng.uniform(-cfg.translate_max[0], cfg.translate_max[0])),
                           float(rng.uniform(-cfg.translate_max[1], cfg.translate_max[1]))),
                style_noise_sigma=cfg.style_noise_sigma,
                text_variant_rate=cfg.text_variant_rate,
                insert_count=cfg.insert_count,
                delete_count=cfg.delete_count,
                reorder=cfg.reorder,
                seed=int(rng.integers(0, 2 ** 31)),
            )
            target, gt = perturb(base, spec, screen_id=f"{base.screen_id}-v{n:02d}")
            screens[target.screen_id] = target
            pair_files.append((f"same_screen-{cat}-{n:03d}", {
                "screen_a": base.screen_id, "screen_b": target.screen_id,
                "relation": "same_screen",
                "gt_pairs": [[x, y] for x, y in gt],
            }))

    for sid in sorted(screens):
        save_screen(screens[sid], out_dir / "screens" / f"{sid}.json")
    for name, doc in pair_files:
        with open(out_dir / "pairs" / f"{name}.json", "w") as f:
            json.dump(doc, f, indent=1, sort_keys=True)
            f.write("\n")
    manifest = {
        "generator_version": GENERATOR_VERSION,
        "config": cfg.as_dict(),
        "screen_count": len(screens),
        "pair_count": len(pair_files),
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    return manifest
