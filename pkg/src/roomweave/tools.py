"""Bundled tools: three initializers, three implementers, five refiners.

Non-LLM tools are deterministic given the scene, the instruction and the
environment seed. LLM tools ask the gateway for a delta and keep only the
parts of it their card allows.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .catalog import AssetCatalog, category_matches, infer_room_type, room_type_info
from .geometry import box_of, boundary_violation, from_local, obb_overlap
from .scene import (
    ROOM,
    RelationType,
    Scene,
    SceneDelta,
    SceneObject,
    parse_scene,
    serialize_scene,
)
from .toolkit import Registry, ToolCard, ToolEnv, ToolInvocation, ToolOutcome

log = logging.getLogger(__name__)

PRETRAINED_ROOMS = ("living room", "bedroom", "dining room")

SEATS = ("chair", "dining chair", "office chair", "stool")
TABLES = ("dining table", "restaurant table", "meeting table", "kitchen island",
          "kitchen counter", "desk", "kids desk", "coffee table", "reception desk")

# Curated tabletop arrangements, rows listed from the back edge to the front.
MICROSCENES: dict[str, list[list[str]]] = {
    "desk": [["monitor"], ["keyboard", "mouse"]],
    "kids desk": [["table lamp", "pen holder"], ["notebook"]],
    "nightstand": [["table lamp", "alarm clock"]],
    "dining table": [["plate", "plate", "plate"], ["vase", "fruit bowl"], ["plate", "plate", "plate"]],
    "restaurant table": [["plate"], ["candle", "glass"], ["plate"]],
    "coffee table": [["magazine", "vase", "remote"]],
    "tv stand": [["tv"]],
    "side table": [["table lamp"]],
    "kitchen counter": [["kettle", "cutting board", "microwave"]],
    "kitchen island": [["fruit bowl", "bowl", "jar"]],
    "meeting table": [["notebook", "notebook", "notebook", "notebook"],
                      ["water bottle", "water bottle", "water bottle"],
                      ["notebook", "notebook", "notebook", "notebook"]],
    "dresser": [["photo frame", "jar", "vase"]],
    "vanity": [["soap", "towel"]],
    "reception desk": [["monitor", "pen holder", "tissue box"]],
    "console table": [["vase", "photo frame"]],
}
DEFAULT_MICROSCENE = [["vase"]]
ROW_GAP = 0.05
EDGE = 0.02


def _data_dir(name: str) -> Path:
    return Path(str(resources.files("roomweave.data").joinpath(name)))


def _slug(category: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", category.lower()).strip("_") or "object"


class IdPool:
    """Hands out fresh ids of the form ``<category>_<k>``."""

    def __init__(self, taken: Iterable[str]):
        self.taken = set(taken)

    def new(self, category: str) -> str:
        base = _slug(category)
        k = 0
        while f"{base}_{k}" in self.taken:
            k += 1
        oid = f"{base}_{k}"
        self.taken.add(oid)
        return oid


def _room_type(s: Scene, env: ToolEnv, inv: ToolInvocation) -> str:
    if s.room.room_type and s.room.room_type != "room":
        return s.room.room_type
    return infer_room_type(inv.instruction or env.query)


def _remap(objects: Sequence[SceneObject], taken: set[str], source: str) -> list[SceneObject]:
    """Give imported objects ids that do not clash with ``taken``, keeping
    parent links consistent."""
    pool = IdPool(taken)
    mapping = {}
    for o in objects:
        mapping[o.id] = o.id if o.id not in pool.taken else pool.new(o.category)
        pool.taken.add(mapping[o.id])
    out = []
    for o in objects:
        parent = mapping.get(o.parent, o.parent)
        out.append(replace(o, id=mapping[o.id], parent=parent, source=source))
    return out


def _replace_all(s: Scene, objects: Sequence[SceneObject], source: str) -> SceneDelta:
    removes = tuple(o.id for o in s.objects)
    adds = _remap(objects, set(removes), source)
    return SceneDelta(adds=tuple(adds), removes=removes)


def load_scene_dir(directory: Path) -> list[tuple[Path, Scene]]:
    out = []
    if directory is None or not directory.is_dir():
        return out
    for p in sorted(directory.glob("*.json")):
        try:
            out.append((p, parse_scene(p.read_bytes())))
        except ValueError as exc:
            log.warning("skipping unreadable scene file %s: %s", p, exc)
    return out


def _rescaled(src: Scene, target: Scene) -> list[SceneObject]:
    """Objects of ``src`` stretched to the footprint of ``target``'s room."""
    kx = target.room.width / src.room.width
    ky = target.room.depth / src.room.depth
    if kx == 1.0 and ky == 1.0:
        return list(src.objects)
    return [
        replace(o, location=(o.location[0] * kx, o.location[1] * ky, o.location[2]))
        for o in src.objects
    ]


def _words(text: str) -> set[str]:
    return set(re.findall(r"[a-z]+", text.lower()))


# --------------------------------------------------------------------------
# initializers

def init_library(s: Scene, inv: ToolInvocation, gateway, env: ToolEnv) -> ToolOutcome:
    rt = _room_type(s, env, inv)
    scenes = load_scene_dir(env.library_dir or _data_dir("library"))
    if not scenes:
        return ToolOutcome.failure("scene library is empty")
    want = _words(rt)
    hint = _words(inv.instruction)

    def rank(item):
        path, sc = item
        exact = sc.room.room_type.lower() == rt.lower()
        overlap = len(want & _words(sc.room.room_type))
        cats = set().union(*(_words(o.category) for o in sc.objects)) if sc.objects else set()
        return (-int(exact), -overlap, -len(hint & cats), path.name)

    path, best = min(scenes, key=rank)
    if best.room.room_type.lower() != rt.lower() and not (want & _words(best.room.room_type)):
        return ToolOutcome.failure(f"no library scene resembles a {rt}")
    delta = _replace_all(s, _rescaled(best, s), inv.tool_id)
    return ToolOutcome(delta, narrative=f"loaded {path.stem} ({len(delta.adds)} objects)")


def init_pretrained(s: Scene, inv: ToolInvocation, gateway, env: ToolEnv) -> ToolOutcome:
    rt = _room_type(s, env, inv)
    if rt not in PRETRAINED_ROOMS:
        return ToolOutcome.failure(f"no pre-generated layouts for {rt}")
    directory = env.pretrained_dir or _data_dir("pretrained")
    variants = [(p, sc) for p, sc in load_scene_dir(directory) if sc.room.room_type == rt]
    if not variants:
        return ToolOutcome.failure(f"no pre-generated layouts for {rt} in {directory}")
    rng = random.Random(f"{env.seed}:{inv.step}:{rt}")
    path, chosen = variants[rng.randrange(len(variants))]
    delta = _replace_all(s, _rescaled(chosen, s), inv.tool_id)
    return ToolOutcome(delta, narrative=f"sampled layout {path.stem} ({len(delta.adds)} objects)")


# --------------------------------------------------------------------------
# implementers

def _supported_children(s: Scene) -> set[str]:
    return {o.parent for o in s.objects if o.relation is not None and o.relation.is_support}


def _targets_from_instruction(s: Scene, inv: ToolInvocation, candidates: list[SceneObject]):
    named = [o for o in candidates if o.id in inv.instruction]
    return named or candidates


def _microscene_for(category: str) -> list[list[str]]:
    for key in sorted(MICROSCENES, key=len, reverse=True):
        if category_matches(category, key):
            return MICROSCENES[key]
    return DEFAULT_MICROSCENE


def _pack_rows(host: SceneObject, rows: list[list[str]], catalog: AssetCatalog,
               relation: RelationType, z_of, pool: IdPool, source: str,
               margin: float = EDGE) -> list[SceneObject]:
    """Lay rows of items across ``host`` in its own frame. Items that do not
    fit are dropped."""
    hx = host.size[0] / 2 - margin
    hy = host.size[1] / 2 - margin
    fitted = []
    depth_used = 0.0
    for row in rows:
        sizes = [catalog.size_of(c) for c in row]
        keep, width = [], 0.0
        for c, sz in zip(row, sizes):
            w = width + sz[0] + (ROW_GAP if keep else 0.0)
            if w <= 2 * hx and sz[1] <= 2 * hy:
                keep.append((c, sz))
                width = w
        if not keep:
            continue
        row_depth = max(sz[1] for _c, sz in keep)
        extra = row_depth + (ROW_GAP if fitted else 0.0)
        if depth_used + extra > 2 * hy:
            break
        fitted.append((keep, width, row_depth))
        depth_used += extra
    out = []
    y = -depth_used / 2
    for keep, width, row_depth in fitted:
        x = -width / 2
        cy = y + row_depth / 2
        for c, sz in keep:
            wx, wy = from_local(host, (x + sz[0] / 2, cy))
            out.append(SceneObject(
                id=pool.new(c), category=c, location=(wx, wy, z_of(sz)),
                rotation=host.rotation, size=sz, parent=host.id, relation=relation,
                source=source,
            ))
            x += sz[0] + ROW_GAP
        y += row_depth + ROW_GAP
    return out


def add_tabletop_visual(s: Scene, inv: ToolInvocation, gateway, env: ToolEnv) -> ToolOutcome:
    catalog = env.catalog
    busy = _supported_children(s)
    empty = [o for o in s.objects
             if catalog.class_of(o.category) == "supporter" and o.id not in busy]
    if not empty:
        return ToolOutcome.failure("no empty supporter to dress")
    pool = IdPool(s.by_id)
    adds = []
    for host in _targets_from_instruction(s, inv, empty):
        top = host.location[2] + host.size[2] / 2
        items = _pack_rows(host, _microscene_for(host.category), catalog, RelationType.ON_TOP,
                           lambda sz, top=top: top + sz[2] / 2, pool, inv.tool_id)
        adds += items
    if not adds:
        return ToolOutcome.failure("nothing fits on the empty supporters")
    hosts = sorted({a.parent for a in adds})
    return ToolOutcome(SceneDelta(adds=tuple(adds)),
                       narrative=f"arranged {len(adds)} items on {', '.join(hosts)}")


def _crowd_category(s: Scene, inv: ToolInvocation, env: ToolEnv) -> str | None:
    text = inv.instruction.lower()
    for name in sorted(env.catalog.entries, key=len, reverse=True):
        if re.search(rf"\b{re.escape(name)}s?\b", text):
            return name
    crowd = room_type_info(_room_type(s, env, inv)).crowd
    return crowd[0] if crowd else None


def _clear(candidate: SceneObject, others: Iterable[SceneObject], room, pad: float = 0.05) -> bool:
    if boundary_violation(candidate, room) > 0:
        return False
    grown = replace(candidate, size=(candidate.size[0] + 2 * pad, candidate.size[1] + 2 * pad,
                                     candidate.size[2]))
    gb = box_of(grown)
    return not any(obb_overlap(gb, box_of(o)).intersects for o in others)


def _fill_inside(s: Scene, category: str, env: ToolEnv, inv: ToolInvocation) -> list[SceneObject]:
    catalog = env.catalog
    busy = _supported_children(s)
    hosts = [o for o in s.objects
             if catalog.class_of(o.category) == "container" and o.id not in busy]
    pool = IdPool(s.by_id)
    sz = catalog.size_of(category)
    adds = []
    for host in _targets_from_instruction(s, inv, hosts):
        inner_h = host.size[2] - 2 * 0.03
        levels = max(0, min(3, int(inner_h // (sz[2] + 0.15))))
        per_row = int((host.size[0] - 0.1) // (sz[0] + 0.02))
        per_row = min(6, per_row)
        if levels == 0 or per_row == 0 or sz[1] > host.size[1] - 0.1:
            continue
        bottom = host.location[2] - host.size[2] / 2 + 0.03 + 0.005
        step = inner_h / levels
        for lv in range(levels):
            z = bottom + lv * step + sz[2] / 2
            items = _pack_rows(host, [[category] * per_row], catalog, RelationType.INSIDE,
                               lambda _sz, z=z: z, pool, inv.tool_id, margin=0.05)
            adds += items
    if adds:
        return adds
    # no container: use empty supporters instead
    tops = [o for o in s.objects
            if catalog.class_of(o.category) == "supporter" and o.id not in busy]
    for host in _targets_from_instruction(s, inv, tops):
        top = host.location[2] + host.size[2] / 2
        n = max(1, min(4, int((host.size[0] - 0.1) // (sz[0] + ROW_GAP))))
        adds += _pack_rows(host, [[category] * n], catalog, RelationType.ON_TOP,
                           lambda z_sz, top=top: top + z_sz[2] / 2, pool, inv.tool_id)
    return adds


def _seats_around_tables(s: Scene, seat: str, env: ToolEnv, inv: ToolInvocation):
    catalog = env.catalog
    tables = [o for o in s.objects if o.parent == ROOM and any(category_matches(o.category, t)
              for t in TABLES if t not in ("desk", "kids desk", "coffee table", "reception desk"))]
    if not tables:
        return []
    pool = IdPool(s.by_id)
    sz = catalog.size_of(seat)
    placed = list(s.objects)
    adds = []
    for t in _targets_from_instruction(s, inv, tables):
        n = max(1, int(t.size[0] // 0.65))
        for side in (-1, 1):
            for k in range(n):
                lx = (k + 0.5) * t.size[0] / n - t.size[0] / 2
                ly = side * (t.size[1] / 2 + 0.05 + sz[1] / 2)
                wx, wy = from_local(t, (lx, ly))
                yaw = t.rotation if side < 0 else t.rotation + 180.0
                # a lone seat per side aims at the table; rows of seats simply face it
                if n == 1:
                    link = {"parent": t.id, "relation": RelationType.FRONT_AGAINST}
                else:
                    link = {}
                cand = SceneObject(pool.new(seat), seat, (wx, wy, sz[2] / 2), yaw, sz,
                                   source=inv.tool_id, **link)
                others = [o for o in placed if o.id != t.id]
                if _clear(cand, others, s.room, pad=0.02):
                    adds.append(cand)
                    placed.append(cand)
                else:
                    pool.taken.discard(cand.id)
    return adds


def _unit(category: str, catalog: AssetCatalog):
    """Main item plus companion seats, as (category, local x, local y, yaw, relation)."""
    sz = catalog.size_of(category)
    members = [(category, 0.0, 0.0, 0.0, None)]
    if any(category_matches(category, t) for t in ("restaurant table", "dining table")):
        ch = catalog.size_of("dining chair")
        off = sz[1] / 2 + 0.05 + ch[1] / 2
        members += [("dining chair", 0.0, -off, 0.0, RelationType.FRONT_AGAINST),
                    ("dining chair", 0.0, off, 180.0, RelationType.FRONT_AGAINST)]
    elif any(category_matches(category, t) for t in ("desk", "kids desk")):
        # the desk's front is its local +y side; the chair faces back at it
        ch = catalog.size_of("chair")
        members += [("chair", 0.0, sz[1] / 2 + 0.05 + ch[1] / 2, 180.0,
                     RelationType.FRONT_AGAINST)]
    return members


def _tile_floor(s: Scene, category: str, env: ToolEnv, inv: ToolInvocation, limit: int = 12):
    catalog = env.catalog
    members = _unit(category, catalog)
    boxes = []
    for cat, lx, ly, _yaw, _rel in members:
        sz = catalog.size_of(cat)
        boxes.append((lx - sz[0] / 2, lx + sz[0] / 2, ly - sz[1] / 2, ly + sz[1] / 2))
    x0, x1 = min(b[0] for b in boxes), max(b[1] for b in boxes)
    y0, y1 = min(b[2] for b in boxes), max(b[3] for b in boxes)
    uw, ud = x1 - x0, y1 - y0
    aisle = 0.6
    pool = IdPool(s.by_id)
    placed = list(s.objects)
    adds = []
    room = s.room
    nx = int((room.width - 0.2 + aisle) // (uw + aisle))
    ny = int((room.depth - 0.2 + aisle) // (ud + aisle))
    if nx == 0 or ny == 0:
        return []
    mx = (room.width - (nx * uw + (nx - 1) * aisle)) / 2
    my = (room.depth - (ny * ud + (ny - 1) * aisle)) / 2
    for j in range(ny):
        for i in range(nx):
            if len(adds) >= limit * len(members):
                break
            ox = mx + i * (uw + aisle) - x0
            oy = my + j * (ud + aisle) - y0
            group = []
            main_id = None
            for cat, lx, ly, yaw, rel in members:
                sz = catalog.size_of(cat)
                oid = pool.new(cat)
                if rel is None:
                    main_id = oid
                    o = SceneObject(oid, cat, (ox + lx, oy + ly, sz[2] / 2), yaw, sz,
                                    source=inv.tool_id)
                else:
                    o = SceneObject(oid, cat, (ox + lx, oy + ly, sz[2] / 2), yaw, sz,
                                    parent=main_id, relation=rel, source=inv.tool_id)
                group.append(o)
            if all(_clear(o, placed, room, pad=0.1) for o in group):
                adds += group
                placed += group
            else:
                for o in group:
                    pool.taken.discard(o.id)
    return adds


def add_crowd(s: Scene, inv: ToolInvocation, gateway, env: ToolEnv) -> ToolOutcome:
    category = _crowd_category(s, inv, env)
    if category is None:
        return ToolOutcome.failure("no repeated category to crowd this room with")
    cls = env.catalog.class_of(category)
    if cls == "small-object":
        adds = _fill_inside(s, category, env, inv)
        how = "filled storage with"
    elif any(category_matches(category, seat) for seat in SEATS) and (
        adds := _seats_around_tables(s, category, env, inv)
    ):
        how = "seated tables with"
    else:
        adds = _tile_floor(s, category, env, inv)
        how = "tiled the floor with"
    if not adds:
        return ToolOutcome.failure(f"no room left for more {category}")
    return ToolOutcome(SceneDelta(adds=tuple(adds)),
                       narrative=f"{how} {len(adds)} x {category}")


# --------------------------------------------------------------------------
# LLM-backed tools

def _bindings(s: Scene, inv: ToolInvocation, env: ToolEnv) -> dict[str, str]:
    demand = inv.instruction or env.query
    return {"user_demand": demand, "scene_layout": serialize_scene(s).decode("utf-8")}


def _clean_adds(s: Scene, adds: Sequence[SceneObject], source: str,
                taken: set[str] | None = None) -> list[SceneObject]:
    """Fresh ids for clashing adds; object relations to unknown parents are
    dropped."""
    taken = set(s.by_id) if taken is None else taken
    renamed = _remap(adds, taken, source)
    known = set(s.by_id) | {a.id for a in renamed}
    out = []
    for a in renamed:
        if a.parent != ROOM and a.parent not in known:
            a = replace(a, parent=ROOM, relation=None)
        out.append(a)
    return out


def init_llm(s: Scene, inv: ToolInvocation, gateway, env: ToolEnv) -> ToolOutcome:
    delta = gateway.ask("init_llm", _bindings(s, inv, env), "delta", source=inv.tool_id)
    if not delta.adds:
        return ToolOutcome.failure("the model proposed no objects")
    removes = tuple(o.id for o in s.objects)
    adds = _clean_adds(s, delta.adds, inv.tool_id, taken=set(removes))
    # object parents must come from the new layout
    new_ids = {a.id for a in adds}
    adds = [a if a.parent == ROOM or a.parent in new_ids else replace(a, parent=ROOM, relation=None)
            for a in adds]
    return ToolOutcome(SceneDelta(adds=tuple(adds), removes=removes),
                       narrative=f"laid out {len(adds)} objects")


def add_objects_llm(s: Scene, inv: ToolInvocation, gateway, env: ToolEnv) -> ToolOutcome:
    delta = gateway.ask("add_objects", _bindings(s, inv, env), "delta", source=inv.tool_id)
    if not delta.adds:
        return ToolOutcome.failure("the model proposed no additions")
    adds = _clean_adds(s, delta.adds, inv.tool_id)
    return ToolOutcome(SceneDelta(adds=tuple(adds)),
                       narrative="added " + ", ".join(a.id for a in adds))


def remove_object(s: Scene, inv: ToolInvocation, gateway, env: ToolEnv) -> ToolOutcome:
    ids = gateway.ask("remove_object", _bindings(s, inv, env), "ids")
    keep = []
    for i in ids:
        if i in s.by_id and i not in keep:
            keep.append(i)
    if not keep:
        return ToolOutcome.failure("none of the named objects exist")
    return ToolOutcome(SceneDelta(removes=tuple(keep)), narrative="removed " + ", ".join(keep))


def _llm_update(template: str, fields: tuple[str, ...]):
    def run(s: Scene, inv: ToolInvocation, gateway, env: ToolEnv) -> ToolOutcome:
        delta = gateway.ask(template, _bindings(s, inv, env), "delta", source=inv.tool_id)
        ups = [u for u in delta.updates if u[0] in s.by_id and u[1] in fields]
        if "parent" in fields:
            ups = _consistent_relation_updates(s, ups)
        if not ups:
            return ToolOutcome.failure("the model proposed no usable updates")
        return ToolOutcome(SceneDelta(updates=tuple(ups)),
                           narrative=f"updated {len(ups)} fields via {template}")

    run.__name__ = template
    return run


def _consistent_relation_updates(s: Scene, ups):
    """Keep parent/relation updates only where the pair stays valid."""
    by_obj: dict[str, dict[str, object]] = {}
    for oid, name, value in ups:
        by_obj.setdefault(oid, {})[name] = value
    out = []
    for oid, change in by_obj.items():
        o = s.by_id[oid]
        parent = change.get("parent", o.parent)
        rel = change.get("relation", o.relation)
        rel = RelationType(rel) if rel is not None else None
        if parent != ROOM and (parent not in s.by_id or parent == oid
                               or oid in _ancestors_in(s, parent)):
            continue
        if (rel is None or rel.is_room_relation) != (parent == ROOM):
            if rel is not None and rel.is_room_relation:
                parent = ROOM
            else:
                continue
        if parent != o.parent:
            out.append((oid, "parent", parent))
        if rel != o.relation:
            out.append((oid, "relation", rel))
    return out


def _ancestors_in(s: Scene, oid: str) -> list[str]:
    return [oid, *s.ancestors(oid)]


# --------------------------------------------------------------------------
# cards

CARDS: list[ToolCard] = [
    ToolCard(
        "init_library", "initializer",
        "Copies the closest matching hand-made layout from the local scene library.",
        supported_room_types="any",
        use_cases=("start from a complete, tidy layout", "room types with a library match"),
        strengths="Layouts are complete and realistic for the room types the library covers.",
        weaknesses="Ignores detailed wishes in the request; fails when no library room is similar.",
        input_schema={"instruction": "string", "room_type": "string"},
    ),
    ToolCard(
        "init_pretrained", "initializer",
        "Samples a pre-generated layout of a common room type.",
        supported_room_types=PRETRAINED_ROOMS,
        use_cases=("quick clean starting layout for a living room, bedroom or dining room",),
        strengths="Tidy, collision-free furniture arrangement with sensible relations.",
        weaknesses="Only three room types; furniture only, no small items; ignores the request text.",
        input_schema={"instruction": "string", "room_type": "string"},
    ),
    ToolCard(
        "init_llm", "initializer",
        "Asks the language model to lay out the whole room from the request.",
        supported_room_types="any",
        use_cases=("unusual room types", "requests naming specific furniture"),
        strengths="Follows the request closely and works for any room type.",
        weaknesses="Placements can be rough and may need refinement.",
        input_schema={"instruction": "string"},
        requires_llm=True,
    ),
    ToolCard(
        "add_objects_llm", "implementer",
        "Asks the language model for missing objects: large furniture, items on tops, "
        "inside storage or on walls.",
        use_cases=("add missing large furniture", "put items on tables or in shelves",
                   "add wall-mounted items"),
        strengths="Flexible; can add any category with relations to existing objects.",
        weaknesses="Item placement on small surfaces is approximate.",
        input_schema={"instruction": "string"},
        requires_llm=True,
    ),
    ToolCard(
        "add_tabletop_visual", "implementer",
        "Dresses empty tables, desks and other supporters with a coordinated group of small "
        "items (image-guided arrangement, run locally from curated sets).",
        use_cases=("fill empty table tops", "place a related group of items on one surface"),
        strengths="Items come as arranged groups that sit correctly on their surface.",
        weaknesses="Only works on supporters with nothing on them; one set per supporter type.",
        input_schema={"instruction": "string", "target_ids": "list of object ids (optional)"},
    ),
    ToolCard(
        "add_crowd", "implementer",
        "Adds many copies of one category: rows of tables or machines on free floor, "
        "chairs around tables, or books and items filling storage.",
        use_cases=("restaurants, classrooms, gyms", "fill shelves", "seat dining tables"),
        strengths="Produces dense, orderly repeated arrangements quickly.",
        weaknesses="Repetitive; needs free floor or empty storage.",
        input_schema={"instruction": "string", "category": "string (optional)"},
    ),
    ToolCard(
        "remove_object", "refiner",
        "Removes objects that are redundant or do not belong in the room.",
        use_cases=("delete out-of-place objects", "thin out clutter"),
        strengths="Clears collisions and oddities at once.",
        weaknesses="Lowers completeness; never adds anything.",
        input_schema={"instruction": "string"},
        requires_llm=True,
    ),
    ToolCard(
        "add_relation", "refiner",
        "Attaches explicit relations (against a wall, facing, on top) to objects.",
        use_cases=("anchor furniture to walls", "make chairs face tables"),
        strengths="The executor keeps related objects aligned from then on.",
        weaknesses="Does not move objects by itself beyond what the relation implies.",
        input_schema={"instruction": "string"},
        requires_llm=True,
    ),
    ToolCard(
        "update_rotation", "refiner",
        "Turns objects that face the wrong way.",
        use_cases=("fix backwards chairs", "turn sofas toward the tv"),
        strengths="Small, targeted edit.",
        weaknesses="Rotation only.",
        input_schema={"instruction": "string"},
        requires_llm=True,
    ),
    ToolCard(
        "update_size", "refiner",
        "Resizes objects with implausible proportions.",
        use_cases=("shrink oversized objects", "fix flattened items"),
        strengths="Small, targeted edit.",
        weaknesses="Size only.",
        input_schema={"instruction": "string"},
        requires_llm=True,
    ),
    ToolCard(
        "update_layout", "refiner",
        "Moves objects to better positions; the executor then separates any overlaps.",
        use_cases=("clear overlaps", "open walkways", "regroup furniture"),
        strengths="Well suited to collision and placement problems.",
        weaknesses="May disturb arrangements that were already good.",
        input_schema={"instruction": "string"},
        requires_llm=True,
    ),
]

IMPLS = {
    "init_library": init_library,
    "init_pretrained": init_pretrained,
    "init_llm": init_llm,
    "add_objects_llm": add_objects_llm,
    "add_tabletop_visual": add_tabletop_visual,
    "add_crowd": add_crowd,
    "remove_object": remove_object,
    "add_relation": _llm_update("add_relation", ("parent", "relation")),
    "update_rotation": _llm_update("update_rotation", ("rotation",)),
    "update_size": _llm_update("update_size", ("size",)),
    "update_layout": _llm_update("update_layout", ("location", "rotation")),
}


def default_registry(extra_cards: Sequence[str | Path] = ()) -> Registry:
    """All bundled tools, plus external tools described by card files."""
    from .toolkit import load_tool_card_file

    r = Registry()
    for card in CARDS:
        r.register(card, IMPLS[card.tool_id])
    for path in extra_cards:
        card, impl = load_tool_card_file(path)
        r.register(card, impl)
    return r


def cards_json(registry: Registry) -> str:
    return json.dumps([c.to_dict() for c in registry.cards()], indent=2)
