"""Fixed element-category taxonomy.

12 detector base classes; toggle and checkbox split by selection state and
icon split into sub-kinds, for 83 entries total.  The table ordering is
versioned: changing it changes every one-hot feature, so any edit must bump
``TAXONOMY_VERSION``.
"""

from dataclasses import dataclass
from typing import Optional

from .errors import UnknownCategoryName

TAXONOMY_VERSION = "taxonomy-v1"

BASE_CLASSES = (
    "button",
    "checkbox",
    "container",
    "dialog",
    "icon",
    "page_control",
    "picture",
    "segmented_control",
    "slider",
    "text",
    "text_field",
    "toggle",
)

# "generic" is the degrade target for unknown icon names and stays first.
ICON_KINDS = ("generic",) + tuple(sorted([
    "add", "alarm", "arrow_backward", "arrow_downward", "arrow_forward",
    "arrow_upward", "attach", "bluetooth", "bookmark", "calendar", "call",
    "camera", "cart", "chat", "check", "close", "cloud", "dashboard",
    "delete", "download", "edit", "emoji", "expand_less", "expand_more",
    "external_link", "favorite", "filter", "flash", "folder", "gift",
    "globe", "grid", "help", "history", "home", "info", "keyboard", "link",
    "list", "location", "lock", "mail", "menu", "microphone", "minus",
    "more_horizontal", "more_vertical", "music", "mute", "notifications",
    "pause", "person", "play", "playlist", "redo", "refresh", "repeat",
    "reply", "save", "scan", "search", "send", "settings", "share",
    "shuffle", "skip_next", "skip_previous", "star", "stop",
]))

_STATEFUL = {"checkbox": ("checked", "unchecked"), "toggle": ("off", "on")}


def _build_table():
    entries = []
    for base in BASE_CLASSES:
        if base in _STATEFUL:
            entries.extend((base, state) for state in sorted(_STATEFUL[base]))
        elif base == "icon":
            entries.extend(("icon", kind) for kind in ICON_KINDS)
        else:
            entries.append((base, None))
    return tuple(entries)


_TABLE = _build_table()
_INDEX = {entry: i for i, entry in enumerate(_TABLE)}

NUM_CATEGORIES = len(_TABLE)
assert NUM_CATEGORIES == 83, NUM_CATEGORIES


def category_table() -> tuple:
    """The full ordered (base_class, sub_kind) table."""
    return _TABLE


def entry_at(flat_index: int) -> tuple:
    return _TABLE[flat_index]


@dataclass(frozen=True)
class ElementCategory:
    base_class: str
    sub_kind: Optional[str]
    flat_index: int

    @property
    def name(self) -> str:
        if self.sub_kind is None:
            return self.base_class
        return f"{self.base_class}:{self.sub_kind}"


def _normalize_state(base: str, state: str) -> str:
    s = state.strip().lower()
    if base == "toggle":
        mapping = {"on": "on", "off": "off", "selected": "on", "true": "on",
                   "unselected": "off", "false": "off"}
    else:
        mapping = {"checked": "checked", "unchecked": "unchecked",
                   "selected": "checked", "true": "checked",
                   "unselected": "unchecked", "false": "unchecked"}
    if s not in mapping:
        raise UnknownCategoryName(f"unknown {base} state: {state!r}")
    return mapping[s]


def make_category(base_class: str, sub_kind: Optional[str] = None,
                  state: Optional[str] = None) -> ElementCategory:
    """Resolve a detector class (+ icon kind or selection state) to a table entry.

    Unknown icon kinds degrade to the generic icon entry; stateful classes
    without a state default to the inactive one (off / unchecked).
    """
    base = base_class.strip().lower()
    if base not in BASE_CLASSES:
        raise UnknownCategoryName(f"unknown element class: {base_class!r}")
    if base == "icon":
        kind = (sub_kind or "generic").strip().lower()
        if ("icon", kind) not in _INDEX:
            kind = "generic"
        sub = kind
    elif base in _STATEFUL:
        default = "off" if base == "toggle" else "unchecked"
        sub = _normalize_state(base, state) if state is not None else default
    else:
        sub = None
    return ElementCategory(base, sub, _INDEX[(base, sub)])


def category_from_name(name: str) -> ElementCategory:
    """Inverse of ``ElementCategory.name`` (e.g. ``"icon:add"``, ``"toggle:on"``)."""
    if ":" in name:
        base, sub = name.split(":", 1)
    else:
        base, sub = name, None
    if base in _STATEFUL:
        return make_category(base, state=sub)
    return make_category(base, sub_kind=sub)


def category_from_index(flat_index: int) -> ElementCategory:
    base, sub = _TABLE[int(flat_index)]
    return ElementCategory(base, sub, int(flat_index))
