"""Local asset catalog (parametric boxes) and per-room-type knowledge."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping

from .scene import RelationType

ASSET_CLASSES = ("large-furniture", "small-object", "supporter", "container")

CLASS_DEFAULT_SIZE: dict[str, tuple[float, float, float]] = {
    "large-furniture": (1.0, 1.0, 1.0),
    "small-object": (0.2, 0.2, 0.2),
    "supporter": (1.2, 0.6, 0.75),
    "container": (0.8, 0.3, 1.8),
}

_SUPPORTER_WORDS = ("table", "desk", "counter", "nightstand", "stand", "dresser", "island", "vanity")
_CONTAINER_WORDS = ("shelf", "cabinet", "bookcase", "rack", "cupboard", "closet")


@dataclass(frozen=True)
class AssetEntry:
    size: tuple[float, float, float]
    asset_class: str

    def __post_init__(self):
        if len(self.size) != 3 or min(self.size) <= 0:
            raise ValueError(f"bad asset size {self.size}")
        if self.asset_class not in ASSET_CLASSES:
            raise ValueError(f"unknown asset class {self.asset_class!r}")


@dataclass(frozen=True)
class AssetCatalog:
    entries: Mapping[str, AssetEntry] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Mapping[str, Mapping]) -> "AssetCatalog":
        return cls(
            {
                name.lower(): AssetEntry(tuple(float(v) for v in e["size"]), e["class"])
                for name, e in data.items()
            }
        )

    @classmethod
    def load(cls, path: str | Path | None = None) -> "AssetCatalog":
        if path is None:
            return default_catalog()
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {
            k: {"size": list(e.size), "class": e.asset_class} for k, e in sorted(self.entries.items())
        }

    def lookup(self, category: str) -> AssetEntry | None:
        return self.entries.get(category.lower().strip())

    def class_of(self, category: str, relation: RelationType | None = None) -> str:
        e = self.lookup(category)
        if e is not None:
            return e.asset_class
        name = category.lower()
        if relation is not None and RelationType(relation).is_support:
            return "small-object"
        if any(w in name for w in _CONTAINER_WORDS):
            return "container"
        if any(w in name for w in _SUPPORTER_WORDS):
            return "supporter"
        return "large-furniture"

    def size_of(self, category: str, relation: RelationType | None = None) -> tuple[float, float, float]:
        e = self.lookup(category)
        if e is not None:
            return e.size
        return CLASS_DEFAULT_SIZE[self.class_of(category, relation)]


@lru_cache(maxsize=1)
def default_catalog() -> AssetCatalog:
    text = resources.files("roomweave.data").joinpath("catalog.json").read_text(encoding="utf-8")
    return AssetCatalog.from_dict(json.loads(text))


@dataclass(frozen=True)
class RoomTypeInfo:
    name: str
    size: tuple[float, float, float]
    essential: tuple[str, ...]
    typical: tuple[str, ...]
    incongruous: tuple[str, ...]
    crowd: tuple[str, ...]


GENERIC_ROOM = RoomTypeInfo("room", (5.0, 5.0, 3.0), (), (), (), ("chair",))


@lru_cache(maxsize=1)
def room_types() -> dict[str, RoomTypeInfo]:
    text = resources.files("roomweave.data").joinpath("room_types.json").read_text(encoding="utf-8")
    out = {}
    for name, d in json.loads(text).items():
        out[name] = RoomTypeInfo(
            name,
            tuple(d["size"]),
            tuple(d["essential"]),
            tuple(d["typical"]),
            tuple(d["incongruous"]),
            tuple(d["crowd"]),
        )
    return out


def room_type_info(name: str) -> RoomTypeInfo:
    return room_types().get(name.lower().strip(), GENERIC_ROOM)


_DESIGN_RE = re.compile(r"design\s+(?:me\s+)?an?\s+([a-z' -]+?)(?:[.,!?]|\s+with\b|\s+that\b|\s+for\b|$)", re.I)


def infer_room_type(query: str) -> str:
    """Room type named by a query such as ``"Design me a bedroom"``.

    Known room types mentioned anywhere in the query win; otherwise the noun
    phrase after "design me a" is returned; otherwise ``"room"``.
    """
    q = query.lower()
    known = sorted(room_types(), key=len, reverse=True)
    for name in known:
        if re.search(rf"\b{re.escape(name)}\b", q):
            return name
    if "kid" in q or "child" in q:
        return "children room"
    m = _DESIGN_RE.search(query)
    if m:
        return m.group(1).strip().lower()
    return "room"


def category_matches(category: str, wanted: str) -> bool:
    """Token-level match: "double bed" satisfies "bed"."""
    cat = category.lower()
    want = wanted.lower()
    if cat == want:
        return True
    return set(want.split()) <= set(cat.split())
