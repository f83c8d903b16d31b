"""Scene state: room bounds, placed objects, relations and the scene file format.

All values are immutable. Floats are quantized to 6 significant digits on
construction so that a serialize/parse round trip is structurally exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

ROOM = "room"


class SceneSyntaxError(ValueError):
    """Scene text is not well-formed."""

    def __init__(self, message: str, lineno: int | None = None, colno: int | None = None):
        self.lineno = lineno
        self.colno = colno
        where = f" (line {lineno}, column {colno})" if lineno is not None else ""
        super().__init__(message + where)


class SceneValidationError(ValueError):
    """A scene invariant is violated. ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class DeltaError(ValueError):
    """A delta cannot be applied: stale reference or id collision."""

    def __init__(self, kind: str, obj_id: str):
        self.kind = kind
        self.obj_id = obj_id
        super().__init__(f"{kind}: {obj_id!r}")


class RelationType(str, Enum):
    AGAINST_WALL = "against_wall"
    SIDE_AGAINST_WALL = "side_against_wall"
    ON_FLOOR = "on_floor"
    FRONT_AGAINST = "front_against"
    FRONT_TO_FRONT = "front_to_front"
    LEFTRIGHT_TO_LEFTRIGHT = "leftright_to_leftright"
    SIDE_BY_SIDE = "side_by_side"
    BACK_TO_BACK = "back_to_back"
    ON_TOP = "on_top"
    INSIDE = "inside"

    @property
    def is_room_relation(self) -> bool:
        return self in ROOM_RELATIONS

    @property
    def is_support(self) -> bool:
        return self in SUPPORT_RELATIONS


ROOM_RELATIONS = frozenset(
    {RelationType.AGAINST_WALL, RelationType.SIDE_AGAINST_WALL, RelationType.ON_FLOOR}
)
SUPPORT_RELATIONS = frozenset({RelationType.ON_TOP, RelationType.INSIDE})


def quantize(x: float) -> float:
    """Round to 6 significant digits; maps -0.0 to 0.0."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r}")
    return float(f"{x:.6g}") + 0.0


def normalize_yaw(deg: float) -> float:
    y = quantize(float(deg) % 360.0)
    y = y % 360.0
    return 0.0 if y >= 360.0 else y + 0.0


def _vec3(value: Any, name: str) -> tuple[float, float, float]:
    try:
        items = [float(v) for v in value]
    except (TypeError, ValueError):
        raise SceneValidationError(name, "expected three numbers") from None
    if len(items) != 3:
        raise SceneValidationError(name, "expected three numbers")
    try:
        return tuple(quantize(v) for v in items)  # type: ignore[return-value]
    except ValueError as exc:
        raise SceneValidationError(name, str(exc)) from None


def _relation(value: Any, name: str) -> RelationType | None:
    if value is None or isinstance(value, RelationType):
        return value
    try:
        return RelationType(value)
    except ValueError:
        raise SceneValidationError(name, f"unknown relation {value!r}") from None


@dataclass(frozen=True)
class RoomBounds:
    width: float
    depth: float
    height: float
    room_type: str = "room"

    def __post_init__(self):
        for name in ("width", "depth", "height"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise SceneValidationError(f"room.{name}", "must be a positive number")
            object.__setattr__(self, name, quantize(v))

    @property
    def area(self) -> float:
        return self.width * self.depth


@dataclass(frozen=True)
class SceneObject:
    """One placed item.

    ``location`` is the bounding-box center, ``rotation`` the yaw in degrees
    (counter-clockwise about +z; the front face points along local +y), and
    ``size`` the full extents along the local axes. ``size`` may be ``None``
    only for not-yet-instantiated adds inside a :class:`SceneDelta`.
    """

    id: str
    category: str
    location: tuple[float, float, float]
    rotation: float = 0.0
    size: tuple[float, float, float] | None = None
    parent: str = ROOM
    relation: RelationType | None = None
    source: str = "unknown"

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise SceneValidationError("id", "must be a non-empty string")
        if self.id == ROOM:
            raise SceneValidationError("id", "'room' is reserved")
        object.__setattr__(self, "location", _vec3(self.location, f"{self.id}.location"))
        object.__setattr__(self, "rotation", normalize_yaw(self.rotation))
        if self.size is not None:
            size = _vec3(self.size, f"{self.id}.size")
            if min(size) <= 0:
                raise SceneValidationError(f"{self.id}.size", "extents must be positive")
            object.__setattr__(self, "size", size)
        rel = _relation(self.relation, f"{self.id}.relation")
        object.__setattr__(self, "relation", rel)
        in_room = rel is None or rel.is_room_relation
        if in_room and self.parent != ROOM:
            raise SceneValidationError(
                f"{self.id}.parent", f"relation {rel and rel.value!r} requires parent 'room'"
            )
        if not in_room and self.parent == ROOM:
            raise SceneValidationError(
                f"{self.id}.parent", f"relation {rel.value!r} requires an object parent"
            )

    @property
    def footprint_area(self) -> float:
        assert self.size is not None
        return self.size[0] * self.size[1]

    def moved(self, dx: float, dy: float, dz: float = 0.0) -> "SceneObject":
        x, y, z = self.location
        return replace(self, location=(x + dx, y + dy, z + dz))


@dataclass(frozen=True)
class SceneMeta:
    query: str = ""
    step: int = 0

    def __post_init__(self):
        if not isinstance(self.step, int) or self.step < 0:
            raise SceneValidationError("meta.step", "must be an integer >= 0")


@dataclass(frozen=True)
class Scene:
    room: RoomBounds
    objects: tuple[SceneObject, ...] = ()
    meta: SceneMeta = field(default_factory=SceneMeta)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        ids = set()
        for i, o in enumerate(self.objects):
            if o.id in ids:
                raise SceneValidationError(f"objects[{i}].id", f"duplicate id {o.id!r}")
            ids.add(o.id)
            if o.size is None:
                raise SceneValidationError(f"objects[{i}].size", "missing size")
        for i, o in enumerate(self.objects):
            if o.parent != ROOM and o.parent not in ids:
                raise SceneValidationError(
                    f"objects[{i}].parent", f"unresolved parent {o.parent!r}"
                )
        parents = {o.id: o.parent for o in self.objects}
        for i, o in enumerate(self.objects):
            seen = {o.id}
            p = o.parent
            while p != ROOM:
                if p in seen:
                    raise SceneValidationError(f"objects[{i}].parent", "parent chain cycles")
                seen.add(p)
                p = parents[p]

    @cached_property
    def by_id(self) -> dict[str, SceneObject]:
        return {o.id: o for o in self.objects}

    @cached_property
    def children(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {}
        for o in self.objects:
            out.setdefault(o.parent, []).append(o.id)
        return {k: tuple(v) for k, v in out.items()}

    def get(self, obj_id: str) -> SceneObject:
        return self.by_id[obj_id]

    def descendants(self, obj_id: str) -> list[str]:
        out, stack = [], list(self.children.get(obj_id, ()))
        while stack:
            c = stack.pop(0)
            out.append(c)
            stack.extend(self.children.get(c, ()))
        return out

    def ancestors(self, obj_id: str) -> list[str]:
        out = []
        p = self.by_id[obj_id].parent
        while p != ROOM:
            out.append(p)
            p = self.by_id[p].parent
        return out

    def with_objects(self, objects: Iterable[SceneObject]) -> "Scene":
        return replace(self, objects=tuple(objects))

    def replace_objects(self, updated: Mapping[str, SceneObject]) -> "Scene":
        if not updated:
            return self
        return replace(self, objects=tuple(updated.get(o.id, o) for o in self.objects))

    def with_step(self, step: int) -> "Scene":
        return replace(self, meta=replace(self.meta, step=step))


UPDATABLE_FIELDS = ("location", "rotation", "size", "parent", "relation")


@dataclass(frozen=True)
class SceneDelta:
    """Additions, removals and field updates proposed by a tool."""

    adds: tuple[SceneObject, ...] = ()
    removes: tuple[str, ...] = ()
    updates: tuple[tuple[str, str, Any], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "adds", tuple(self.adds))
        object.__setattr__(self, "removes", tuple(self.removes))
        object.__setattr__(self, "updates", tuple(tuple(u) for u in self.updates))
        add_ids = [a.id for a in self.adds]
        if len(set(add_ids)) != len(add_ids):
            raise SceneValidationError("adds", "duplicate add ids")
        if set(add_ids) & set(self.removes):
            raise SceneValidationError("removes", "ids overlap with adds")
        seen = set()
        for i, (oid, name, _value) in enumerate(self.updates):
            if name not in UPDATABLE_FIELDS:
                raise SceneValidationError(f"updates[{i}].field", f"cannot update {name!r}")
            if (oid, name) in seen:
                raise SceneValidationError(f"updates[{i}]", f"duplicate update of {oid}.{name}")
            seen.add((oid, name))

    @property
    def is_empty(self) -> bool:
        return not (self.adds or self.removes or self.updates)

    def referenced_ids(self) -> set[str]:
        return set(self.removes) | {u[0] for u in self.updates}


def _coerce_update(name: str, value: Any) -> Any:
    if name in ("location", "size"):
        return tuple(float(v) for v in value)
    if name == "rotation":
        return float(value)
    if name == "relation":
        return _relation(value, "relation")
    return str(value)


def apply_delta(s: Scene, delta: SceneDelta) -> Scene:
    """Return a new scene with ``delta`` applied; ``s`` is left untouched.

    Removals come first; children of a removed object that are not removed
    themselves are reparented to the room with no relation. Adds follow, then
    field updates. The result is re-validated.
    """
    for rid in delta.removes:
        if rid not in s.by_id:
            raise DeltaError("stale reference", rid)
    for oid, _name, _value in delta.updates:
        if oid not in s.by_id or oid in delta.removes:
            raise DeltaError("stale reference", oid)
    for a in delta.adds:
        if a.id in s.by_id and a.id not in delta.removes:
            raise DeltaError("id collision", a.id)
        if a.size is None:
            raise SceneValidationError(f"{a.id}.size", "add has no size; fill it from a catalog")

    removed = set(delta.removes)
    objects = []
    for o in s.objects:
        if o.id in removed:
            continue
        if o.parent in removed:
            o = replace(o, parent=ROOM, relation=None)
        objects.append(o)
    objects.extend(delta.adds)

    grouped: dict[str, dict[str, Any]] = {}
    for oid, name, value in delta.updates:
        grouped.setdefault(oid, {})[name] = _coerce_update(name, value)
    if grouped:
        objects = [replace(o, **grouped[o.id]) if o.id in grouped else o for o in objects]
    return replace(s, objects=tuple(objects))


# --------------------------------------------------------------------------
# scene file format

def _fmt_float(x: float) -> str:
    s = f"{x:.6g}"
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def _fmt_value(v: Any) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, float):
        return _fmt_float(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    if isinstance(v, Enum):
        return json.dumps(v.value)
    return json.dumps(v, ensure_ascii=False)


def _fmt_obj(pairs: Sequence[tuple[str, Any]]) -> str:
    return "{" + ", ".join(f"{json.dumps(k)}: {_fmt_value(v)}" for k, v in pairs) + "}"


def object_pairs(o: SceneObject) -> list[tuple[str, Any]]:
    pairs: list[tuple[str, Any]] = [
        ("id", o.id),
        ("category", o.category),
        ("location", list(o.location)),
        ("rotation", o.rotation),
    ]
    if o.size is not None:
        pairs.append(("size", list(o.size)))
    pairs += [
        ("parent", o.parent),
        ("relation", o.relation.value if o.relation else None),
        ("source", o.source),
    ]
    return pairs


def object_to_dict(o: SceneObject) -> dict[str, Any]:
    return dict(object_pairs(o))


def serialize_scene(s: Scene) -> bytes:
    """Deterministic UTF-8 rendering of a scene, one object per line."""
    room = _fmt_obj(
        [
            ("width", s.room.width),
            ("depth", s.room.depth),
            ("height", s.room.height),
            ("type", s.room.room_type),
        ]
    )
    meta = _fmt_obj([("query", s.meta.query), ("step", s.meta.step)])
    lines = ["{", f'  "room": {room},']
    if s.objects:
        lines.append('  "objects": [')
        body = [f"    {_fmt_obj(object_pairs(o))}" for o in s.objects]
        lines.append(",\n".join(body))
        lines.append("  ],")
    else:
        lines.append('  "objects": [],')
    lines.append(f'  "meta": {meta}')
    lines.append("}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _require(d: Mapping[str, Any], key: str, path: str) -> Any:
    if key not in d:
        raise SceneValidationError(f"{path}.{key}", "missing field")
    return d[key]


def object_from_dict(d: Any, path: str, *, require_size: bool = True,
                     default_source: str = "unknown") -> SceneObject:
    if not isinstance(d, Mapping):
        raise SceneValidationError(path, "expected an object")
    size = d.get("size")
    if size is None and require_size:
        raise SceneValidationError(f"{path}.size", "missing field")
    oid = _require(d, "id", path)
    category = _require(d, "category", path)
    if not isinstance(oid, str) or not isinstance(category, str):
        raise SceneValidationError(path, "id and category must be strings")
    rotation = d.get("rotation", 0.0)
    if isinstance(rotation, bool) or not isinstance(rotation, (int, float)):
        raise SceneValidationError(f"{path}.rotation", "must be a number")
    parent = d.get("parent", ROOM)
    if not isinstance(parent, str):
        raise SceneValidationError(f"{path}.parent", "must be a string")
    try:
        return SceneObject(
            id=oid,
            category=category,
            location=_require(d, "location", path),
            rotation=rotation,
            size=size,
            parent=parent,
            relation=d.get("relation"),
            source=str(d.get("source", default_source)),
        )
    except SceneValidationError as exc:
        raise SceneValidationError(f"{path}.{exc.path}", str(exc).split(": ", 1)[-1]) from None


def scene_from_dict(data: Any) -> Scene:
    if not isinstance(data, Mapping):
        raise SceneValidationError("$", "expected an object")
    room_d = _require(data, "room", "$")
    if not isinstance(room_d, Mapping):
        raise SceneValidationError("room", "expected an object")
    room = RoomBounds(
        width=_require(room_d, "width", "room"),
        depth=_require(room_d, "depth", "room"),
        height=_require(room_d, "height", "room"),
        room_type=str(room_d.get("type", "room")),
    )
    objs = data.get("objects", [])
    if not isinstance(objs, list):
        raise SceneValidationError("objects", "expected a list")
    objects = [object_from_dict(o, f"objects[{i}]") for i, o in enumerate(objs)]
    meta_d = data.get("meta", {}) or {}
    meta = SceneMeta(query=str(meta_d.get("query", "")), step=meta_d.get("step", 0))
    return Scene(room=room, objects=tuple(objects), meta=meta)


def scene_to_dict(s: Scene) -> dict[str, Any]:
    return json.loads(serialize_scene(s))


def parse_scene(text: bytes | str) -> Scene:
    """Parse scene-format text. Raises SceneSyntaxError or SceneValidationError."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SceneSyntaxError(f"not UTF-8: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    return scene_from_dict(data)


# --------------------------------------------------------------------------
# delta format: {"adds": [...], "removes": [...], "updates": [{"id", "field", "value"}]}

def delta_from_dict(data: Any, *, source: str = "unknown") -> SceneDelta:
    if not isinstance(data, Mapping):
        raise SceneValidationError("delta", "expected an object")
    unknown = set(data) - {"adds", "removes", "updates"}
    if unknown:
        raise SceneValidationError("delta", f"unknown keys {sorted(unknown)}")
    adds_d = data.get("adds", []) or []
    removes = data.get("removes", []) or []
    updates_d = data.get("updates", []) or []
    if not isinstance(adds_d, list) or not isinstance(removes, list) or not isinstance(updates_d, list):
        raise SceneValidationError("delta", "adds, removes and updates must be lists")
    adds = [
        object_from_dict(a, f"adds[{i}]", require_size=False, default_source=source)
        for i, a in enumerate(adds_d)
    ]
    if not all(isinstance(r, str) for r in removes):
        raise SceneValidationError("removes", "ids must be strings")
    updates = []
    for i, u in enumerate(updates_d):
        if not isinstance(u, Mapping) or not {"id", "field", "value"} <= set(u):
            raise SceneValidationError(f"updates[{i}]", "expected {id, field, value}")
        name = u["field"]
        try:
            value = _coerce_update(name, u["value"]) if name in UPDATABLE_FIELDS else u["value"]
        except (TypeError, ValueError):
            raise SceneValidationError(f"updates[{i}].value", "bad value") from None
        updates.append((str(u["id"]), name, value))
    return SceneDelta(adds=tuple(adds), removes=tuple(removes), updates=tuple(updates))


def delta_to_dict(delta: SceneDelta) -> dict[str, Any]:
    def value(v: Any) -> Any:
        if isinstance(v, Enum):
            return v.value
        if isinstance(v, tuple):
            return list(v)
        return v

    return {
        "adds": [object_to_dict(a) for a in delta.adds],
        "removes": list(delta.removes),
        "updates": [{"id": i, "field": f, "value": value(v)} for i, f, v in delta.updates],
    }
