"""Physics-aware executor.

``execute`` turns a tool's :class:`SceneDelta` into a new scene: the delta is
completed from the asset catalog, applied, every declared relation is
enforced, and a bounded position-based solver removes collisions and
boundary violations. Nothing here raises on an unsolvable layout; residual
violations are reported instead.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable

from .catalog import AssetCatalog, default_catalog
from .geometry import (
    DEFAULT_TOL,
    FACE_PAIRS,
    INSIDE_MARGIN,
    WALL_FACES,
    Tolerances,
    box_of,
    boundary_resolution,
    boundary_violation,
    check_relation,
    face_extent,
    face_normal,
    face_pair_gap,
    front_against_gap,
    from_local,
    obb_overlap,
    to_local,
    walls,
    wall_face_ok,
    yaw_axes,
)
from .metrics import PhysicalMetrics, colliding_pairs, physical_metrics
from .scene import ROOM, RelationType, RoomBounds, Scene, SceneDelta, SceneObject, apply_delta

log = logging.getLogger(__name__)

# world angle of the outward direction (toward the wall) for each wall
_WALL_ANGLE = {"y0": 270.0, "x1": 0.0, "y1": 90.0, "x0": 180.0}
# local angle of each face normal
_FACE_ANGLE = {"+x": 0.0, "+y": 90.0, "-x": 180.0, "-y": 270.0}
# clamps aim this far inside a limit so 6-digit rounding cannot push past it
_INSET = 1e-3


class InfeasibleRelation(ValueError):
    """The declared relation cannot be satisfied by moving the child."""

    def __init__(self, child_id: str, reason: str):
        self.child_id = child_id
        super().__init__(f"{child_id}: {reason}")


@dataclass(frozen=True)
class OptimConfig:
    max_steps: int = 100
    step_damping: float = 1.0
    # children move with parents; smaller footprint moves first on ties
    priority: str = "footprint"
    tol: Tolerances = DEFAULT_TOL

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not 0.0 < self.step_damping <= 1.0:
            raise ValueError("step_damping must be in (0, 1]")


@dataclass
class ExecutionReport:
    pre: PhysicalMetrics
    post: PhysicalMetrics
    sweeps: int = 0
    infeasible: list[str] = field(default_factory=list)
    log: dict[str, list[str]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "pre": self.pre.to_dict(),
            "post": self.post.to_dict(),
            "sweeps": self.sweeps,
            "infeasible": list(self.infeasible),
            "log": {k: list(v) for k, v in self.log.items()},
        }


@dataclass
class OptimResult:
    scene: Scene
    residual: PhysicalMetrics
    sweeps: int
    log: list[str]


# --------------------------------------------------------------------------
# small helpers

def _ang_diff(a: float, b: float) -> float:
    d = abs((a - b) % 360.0)
    return min(d, 360.0 - d)


def _children_map(objs: dict[str, SceneObject]) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for o in objs.values():
        out.setdefault(o.parent, []).append(o.id)
    return out


def _descendants(children: dict[str, list[str]], oid: str) -> list[str]:
    out, stack = [], list(children.get(oid, ()))
    while stack:
        c = stack.pop(0)
        out.append(c)
        stack.extend(children.get(c, ()))
    return out


def _ancestors(objs: dict[str, SceneObject], oid: str) -> list[str]:
    out, p = [], objs[oid].parent
    while p != ROOM:
        out.append(p)
        p = objs[p].parent
    return out


def _place(objs, children, oid: str, new: SceneObject) -> None:
    """Replace ``objs[oid]`` by ``new`` and carry its descendants rigidly."""
    old = objs[oid]
    objs[oid] = new
    desc = _descendants(children, oid)
    if not desc:
        return
    dyaw = new.rotation - old.rotation
    r = math.radians(dyaw)
    c, s = math.cos(r), math.sin(r)
    if dyaw % 90.0 == 0.0:
        c, s = round(c), round(s)
    dz = new.location[2] - old.location[2]
    for d in desc:
        o = objs[d]
        rx, ry = o.location[0] - old.location[0], o.location[1] - old.location[1]
        loc = (
            new.location[0] + c * rx - s * ry,
            new.location[1] + s * rx + c * ry,
            o.location[2] + dz,
        )
        objs[d] = replace(o, location=loc, rotation=o.rotation + dyaw)


def _translate(objs, children, oid: str, dx: float, dy: float, dz: float = 0.0) -> None:
    _place(objs, children, oid, objs[oid].moved(dx, dy, dz))


def _parent_of(objs, o: SceneObject):
    return ROOM if o.parent == ROOM else objs[o.parent]


def _holds(objs, o: SceneObject, room: RoomBounds, tol: Tolerances) -> bool:
    if o.relation is None:
        return True
    return check_relation(o, _parent_of(objs, o), o.relation, room, tol)


def _extent_in_frame(child: SceneObject, frame_yaw: float) -> tuple[float, float]:
    """Half extents of the child's footprint along a frame rotated by frame_yaw."""
    r = math.radians(child.rotation - frame_yaw)
    c, s = abs(math.cos(r)), abs(math.sin(r))
    if (child.rotation - frame_yaw) % 90.0 == 0.0:
        c, s = round(c), round(s)
    hx, hy = child.size[0] / 2, child.size[1] / 2
    return c * hx + s * hy, s * hx + c * hy


def _clamp(v: float, lim: float) -> float:
    if lim <= 0:
        return 0.0
    return max(-lim, min(lim, v))


# --------------------------------------------------------------------------
# relation enforcement

def _nearest_wall(o: SceneObject, room: RoomBounds):
    best = None
    for name, n, off in walls(room):
        d = abs(n[0] * o.location[0] + n[1] * o.location[1] - off)
        if best is None or d < best[0] - 1e-12:
            best = (d, name, n, off)
    return best[1:]


def _snap_to_wall(o: SceneObject, faces: Iterable[str], room: RoomBounds) -> SceneObject:
    name, n, _off = _nearest_wall(o, room)
    # pick the allowed face needing the least rotation
    target = _WALL_ANGLE[name]
    face = min(faces, key=lambda f: _ang_diff(o.rotation + _FACE_ANGLE[f], target))
    yaw = (target - _FACE_ANGLE[face]) % 360.0
    depth, half_w = face_extent(o, face)
    x, y, z = o.location
    if name in ("y0", "y1"):
        along, length = x, room.width
    else:
        along, length = y, room.depth
    lo, hi = half_w, length - half_w
    along = length / 2 if lo > hi else min(max(along, lo), hi)
    if name == "y0":
        x, y = along, depth
    elif name == "y1":
        x, y = along, room.depth - depth
    elif name == "x0":
        x, y = depth, along
    else:
        x, y = room.width - depth, along
    return replace(o, location=(x, y, z), rotation=yaw)


def _enforce_on_top(o: SceneObject, p: SceneObject) -> SceneObject:
    if o.footprint_area > p.footprint_area:
        raise InfeasibleRelation(o.id, f"footprint larger than the top of {p.id}")
    top = p.location[2] + p.size[2] / 2
    ex, ey = _extent_in_frame(o, p.rotation)
    lx, ly = to_local(p, o.location[:2])
    px, py = p.size[0] / 2, p.size[1] / 2
    limx = max(0.0, px - ex - _INSET)
    limy = max(0.0, py - ey - _INSET)
    nx, ny = from_local(p, (_clamp(lx, limx), _clamp(ly, limy)))
    return replace(o, location=(nx, ny, top + o.size[2] / 2))


def _enforce_inside(o: SceneObject, p: SceneObject) -> SceneObject:
    m = INSIDE_MARGIN + _INSET
    px, py, pz = (s / 2 - m for s in p.size)
    chz = o.size[2] / 2
    if chz > pz:
        raise InfeasibleRelation(o.id, f"taller than the interior of {p.id}")
    options = sorted(
        {o.rotation, p.rotation % 360.0, (p.rotation + 90.0) % 360.0,
         (p.rotation + 180.0) % 360.0, (p.rotation + 270.0) % 360.0},
        key=lambda y: (_ang_diff(y, o.rotation), y),
    )
    for yaw in options:
        cand = replace(o, rotation=yaw)
        ex, ey = _extent_in_frame(cand, p.rotation)
        if ex > px or ey > py:
            continue
        lx, ly = to_local(p, o.location[:2])
        nx, ny = from_local(p, (_clamp(lx, px - ex), _clamp(ly, py - ey)))
        pzc = p.location[2]
        z = min(max(o.location[2], pzc - pz + chz), pzc + pz - chz)
        return replace(cand, location=(nx, ny, z))
    raise InfeasibleRelation(o.id, f"does not fit inside {p.id}")


def _enforce_front_against(o: SceneObject, p: SceneObject, tol: Tolerances) -> SceneObject:
    dx, dy = p.location[0] - o.location[0], p.location[1] - o.location[1]
    if math.hypot(dx, dy) < 1e-9:
        pf = face_normal(p, "+y")
        off = p.size[1] / 2 + o.size[1] / 2 + tol.eps_gap
        o = o.moved(pf[0] * off, pf[1] * off)
        dx, dy = -pf[0], -pf[1]
    yaw = math.degrees(math.atan2(-dx, dy)) % 360.0
    o = replace(o, rotation=yaw)
    f = face_normal(o, "+y")
    _ang, gap = front_against_gap(o, p)
    shift = gap - tol.eps_gap / 2
    return o.moved(f[0] * shift, f[1] * shift)


def _face_pair_candidate(o: SceneObject, cface: str, p: SceneObject, pface: str,
                         tol: Tolerances) -> SceneObject:
    yaw = (p.rotation + _FACE_ANGLE[pface] + 180.0 - _FACE_ANGLE[cface]) % 360.0
    cand = replace(o, rotation=yaw)
    n = face_normal(p, pface)
    t = (-n[1], n[0])
    ep, wp = face_extent(p, pface)
    ec, wc = face_extent(cand, cface)
    rel = (o.location[0] - p.location[0], o.location[1] - p.location[1])
    lat = _clamp(rel[0] * t[0] + rel[1] * t[1], abs(wp - wc))
    dist = ep + tol.eps_gap / 2 + ec
    x = p.location[0] + n[0] * dist + t[0] * lat
    y = p.location[1] + n[1] * dist + t[1] * lat
    return replace(cand, location=(x, y, o.location[2]))


def _enforce_face_pair(o: SceneObject, p: SceneObject, rel: RelationType,
                       tol: Tolerances) -> SceneObject:
    best = None
    for cf, pf in FACE_PAIRS[rel]:
        cand = _face_pair_candidate(o, cf, p, pf, tol)
        cost = _ang_diff(cand.rotation, o.rotation) / 90.0 + math.hypot(
            cand.location[0] - o.location[0], cand.location[1] - o.location[1]
        )
        if best is None or cost < best[0] - 1e-12:
            best = (cost, cand)
    return best[1]


def _enforced_pose(objs, oid: str, room: RoomBounds, tol: Tolerances) -> SceneObject:
    o = objs[oid]
    rel = o.relation
    if rel is RelationType.ON_FLOOR:
        return replace(o, location=(o.location[0], o.location[1], o.size[2] / 2))
    if rel in WALL_FACES:
        return _snap_to_wall(o, WALL_FACES[rel], room)
    p = objs[o.parent]
    if rel is RelationType.ON_TOP:
        return _enforce_on_top(o, p)
    if rel is RelationType.INSIDE:
        return _enforce_inside(o, p)
    if rel is RelationType.FRONT_AGAINST:
        return _enforce_front_against(o, p, tol)
    return _enforce_face_pair(o, p, rel, tol)


def _enforce_in_place(objs, children, oid: str, room: RoomBounds, tol: Tolerances) -> bool:
    """Enforce one relation inside the working dict. Returns True if moved."""
    o = objs[oid]
    if o.relation is None or _holds(objs, o, room, tol):
        return False
    new = _enforced_pose(objs, oid, room, tol)
    if not check_relation(new, _parent_of(objs, new), new.relation, room, tol):
        raise InfeasibleRelation(oid, f"{new.relation.value} could not be satisfied")
    _place(objs, children, oid, new)
    return True


def enforce_relation(s: Scene, child_id: str, tol: Tolerances = DEFAULT_TOL) -> Scene:
    """Minimally move ``child_id`` (and its descendants) so its declared
    relation holds. Raises :class:`InfeasibleRelation` when that is impossible;
    the input scene is never modified."""
    o = s.get(child_id)
    if o.relation is None:
        raise ValueError(f"{child_id} has no declared relation")
    objs = dict(s.by_id)
    _enforce_in_place(objs, _children_map(objs), child_id, s.room, tol)
    return s.with_objects(objs[x.id] for x in s.objects)


def _topological(objs: dict[str, SceneObject]) -> list[str]:
    depth = {oid: len(_ancestors(objs, oid)) for oid in objs}
    return sorted(objs, key=lambda k: (depth[k], k))


def _enforce_all(objs, children, room, tol, logs: list[str], infeasible: set[str]) -> int:
    moved = 0
    for oid in _topological(objs):
        try:
            if _enforce_in_place(objs, children, oid, room, tol):
                moved += 1
                logs.append(f"enforce {oid} {objs[oid].relation.value}")
        except InfeasibleRelation as exc:
            if oid not in infeasible:
                logs.append(f"infeasible {exc}")
            infeasible.add(oid)
    return moved


def enforce_relations(s: Scene, tol: Tolerances = DEFAULT_TOL):
    """Enforce every declared relation, parents before children.

    Returns (scene, log lines, ids whose relation is infeasible)."""
    objs = dict(s.by_id)
    logs: list[str] = []
    infeasible: set[str] = set()
    _enforce_all(objs, _children_map(objs), s.room, tol, logs, infeasible)
    return s.with_objects(objs[x.id] for x in s.objects), logs, sorted(infeasible)


# --------------------------------------------------------------------------
# collision and boundary solver

def _shift_to_separate(a: SceneObject, b: SceneObject, direction) -> float:
    """Smallest s >= 0 such that a moved by s * direction is clear of b."""
    ba, bb = box_of(a), box_of(b)
    d = (a.location[0] - b.location[0], a.location[1] - b.location[1])
    best = math.inf
    for axis in (*ba.axes, *bb.axes):
        t = direction[0] * axis[0] + direction[1] * axis[1]
        if abs(t) < 1e-9:
            continue
        dist = d[0] * axis[0] + d[1] * axis[1]
        r = _radius(ba, axis) + _radius(bb, axis)
        s = (r - dist) / t if t > 0 else (r + dist) / -t
        best = min(best, max(0.0, s))
    return best


def _radius(box, axis) -> float:
    u, v = box.axes
    return box.half_extents[0] * abs(axis[0] * u[0] + axis[1] * u[1]) + box.half_extents[1] * abs(
        axis[0] * v[0] + axis[1] * v[1]
    )


def _slide_direction(objs, o: SceneObject, room: RoomBounds, tol: Tolerances):
    """Allowed sliding direction for a relation-constrained object, or None
    when it may move freely."""
    rel = o.relation
    if rel is None or not _holds(objs, o, room, tol):
        return None
    if rel in WALL_FACES:
        for face in WALL_FACES[rel]:
            if wall_face_ok(o, face, room, tol):
                n = face_normal(o, face)
                return (-n[1], n[0])
        return None
    if rel in FACE_PAIRS:
        p = objs[o.parent]
        for cf, pf in FACE_PAIRS[rel]:
            ang, gap, lateral, reach = face_pair_gap(o, cf, p, pf)
            if ang <= tol.eps_ang and -tol.eps_pen <= gap <= tol.eps_gap and lateral < reach:
                n = face_normal(o, cf)
                return (-n[1], n[0])
    return None


def _in_region(objs, o: SceneObject, room: RoomBounds, tol: Tolerances) -> bool:
    """Whether a moved object is still acceptable: inside the room, and a
    support child still on or in its parent."""
    if boundary_violation(o, room) > tol.eps_pen:
        return False
    if o.relation is not None and o.relation.is_support:
        return check_relation(o, objs[o.parent], o.relation, room, tol)
    return True


def _family(objs, oid: str) -> set[str]:
    fam = {oid, *_ancestors(objs, oid)}
    return fam


def _new_hits(objs, children, moved: dict[str, SceneObject], skip: str, tol: Tolerances) -> int:
    """Collisions between moved objects and everything else, ignoring the
    partner of the pair being resolved and support families."""
    hits = 0
    for mid, m in moved.items():
        fam = _family(objs, mid) | set(_descendants(children, mid))
        mb = box_of(m)
        for oid, o in objs.items():
            if oid in moved or oid == skip or oid in fam:
                continue
            ov = obb_overlap(mb, box_of(o))
            if ov.intersects and ov.penetration_depth > tol.eps_pen:
                hits += 1
    return hits


def _preview(objs, children, oid: str, dx: float, dy: float) -> dict[str, SceneObject]:
    trial = {k: objs[k] for k in [oid, *_descendants(children, oid)]}
    out = dict(trial)
    tmp = dict(objs)
    _translate(tmp, children, oid, dx, dy)
    for k in out:
        out[k] = tmp[k]
    return out


def _candidates(objs, mover: SceneObject, other: SceneObject, primary, room, tol):
    """Displacements for ``mover``: the MTV move first, then the other
    separating directions ordered by length."""
    slide = _slide_direction(objs, mover, room, tol)
    if slide is not None:
        dirs = [slide, (-slide[0], -slide[1])]
    else:
        ba, bb = box_of(mover), box_of(other)
        dirs = [primary]
        for ax in (*ba.axes, *bb.axes):
            dirs += [ax, (-ax[0], -ax[1])]
    out = []
    seen = set()
    for d in dirs:
        key = (round(d[0], 9), round(d[1], 9))
        if key in seen:
            continue
        seen.add(key)
        s = _shift_to_separate(mover, other, d)
        if math.isfinite(s):
            out.append((s, d))
    first = out[:1] if slide is None else []
    rest = sorted(out[len(first):], key=lambda t: t[0])
    return first + rest


def _resolve_pair(objs, children, aid: str, bid: str, room: RoomBounds, cfg: OptimConfig,
                  area) -> str | None:
    tol = cfg.tol
    a, b = objs[aid], objs[bid]
    ov = obb_overlap(box_of(a), box_of(b))
    if not ov.intersects or ov.penetration_depth <= tol.eps_pen:
        return None
    if bid in _ancestors(objs, aid):
        order = [aid]
    elif aid in _ancestors(objs, bid):
        order = [bid]
    else:
        # lower priority moves: smaller footprint, then the larger id
        order = sorted((aid, bid), key=lambda k: (area(k), _neg(k)))
    options = []
    for mover_id in order:
        mover = objs[mover_id]
        other = objs[bid if mover_id == aid else aid]
        sign = 1.0 if mover_id == aid else -1.0
        primary = (sign * ov.mtv[0], sign * ov.mtv[1])
        for s, d in _candidates(objs, mover, other, primary, room, tol):
            step = (s + tol.eps_pen) * cfg.step_damping
            dx, dy = d[0] * step, d[1] * step
            moved = _preview(objs, children, mover_id, dx, dy)
            if not _in_region(objs, moved[mover_id], room, tol):
                continue
            hits = _new_hits(objs, children, moved, other.id, tol)
            if hits == 0:
                _translate(objs, children, mover_id, dx, dy)
                return f"move {mover_id} by ({dx:.3f}, {dy:.3f}) away from {other.id}"
            options.append((hits, step, len(options), mover_id, dx, dy))
    if options:
        _h, _st, _k, mover_id, dx, dy = min(options)
    else:
        mover_id = order[0]
        sign = 1.0 if mover_id == aid else -1.0
        step = (ov.penetration_depth + tol.eps_pen) * cfg.step_damping
        dx, dy = sign * ov.mtv[0] * step, sign * ov.mtv[1] * step
    _translate(objs, children, mover_id, dx, dy)
    return f"push {mover_id} by ({dx:.3f}, {dy:.3f})"


def _neg(s: str):
    # sort key putting lexicographically larger ids first
    return [-ord(c) for c in s] + [1]


def _build(s: Scene, objs) -> Scene:
    return s.with_objects(objs[x.id] for x in s.objects)


def run_optimizer(s: Scene, cfg: OptimConfig = OptimConfig(),
                  infeasible: set[str] | None = None) -> OptimResult:
    """Sweep boundary projection, pairwise separation and relation
    re-enforcement until the scene is clean or the budget runs out."""
    tol = cfg.tol
    room = s.room
    objs = dict(s.by_id)
    children = _children_map(objs)
    infeasible = set() if infeasible is None else infeasible
    logs: list[str] = []
    order = sorted(objs)

    def area(k: str) -> float:
        root = objs[k]
        return root.footprint_area

    sweeps = 0
    current = s
    while sweeps < cfg.max_steps:
        current = _build(s, objs)
        if physical_metrics(current, tol).violations == 0:
            break
        sweeps += 1
        # (1) boundary projection
        for oid in order:
            o = objs[oid]
            if boundary_violation(o, room) > tol.eps_pen:
                dx, dy, dz = boundary_resolution(o, room)
                _translate(objs, children, oid, dx, dy, dz)
                logs.append(f"sweep {sweeps}: project {oid} by ({dx:.3f}, {dy:.3f}, {dz:.3f})")
        # (2) pairwise separation
        pairs = []
        for i, j, _d in colliding_pairs(_build(s, objs), tol):
            a, b = sorted((s.objects[i].id, s.objects[j].id))
            pairs.append((a, b))
        for a, b in sorted(pairs):
            msg = _resolve_pair(objs, children, a, b, room, cfg, area)
            if msg:
                logs.append(f"sweep {sweeps}: {msg}")
        # (3) relations
        _enforce_all(objs, children, room, tol, logs, infeasible)
        current = _build(s, objs)
    residual = physical_metrics(current, tol)
    return OptimResult(current, residual, sweeps, logs)


def optimize(s: Scene, cfg: OptimConfig = OptimConfig()) -> tuple[Scene, PhysicalMetrics]:
    r = run_optimizer(s, cfg)
    return r.scene, r.residual


# --------------------------------------------------------------------------
# execution pipeline

def fill_sizes(delta: SceneDelta, catalog: AssetCatalog) -> tuple[SceneDelta, list[str]]:
    """Give size-less adds their catalog (or class-default) size."""
    logs = []
    adds = []
    for a in delta.adds:
        if a.size is None:
            size = catalog.size_of(a.category, a.relation)
            known = catalog.lookup(a.category) is not None
            logs.append(f"size {a.id} <- {list(size)} ({'catalog' if known else 'class default'})")
            a = replace(a, size=size)
        adds.append(a)
    return replace(delta, adds=tuple(adds)), logs


def execute(s_prev: Scene, delta: SceneDelta, catalog: AssetCatalog | None = None,
            cfg: OptimConfig = OptimConfig()) -> tuple[Scene, ExecutionReport]:
    catalog = catalog or default_catalog()
    delta, fill_log = fill_sizes(delta, catalog)
    s = apply_delta(s_prev, delta)
    pre = physical_metrics(s, cfg.tol)
    apply_log = (
        [f"add {a.id} ({a.category})" for a in delta.adds]
        + [f"remove {r}" for r in delta.removes]
        + [f"update {i}.{f}" for i, f, _v in delta.updates]
    )
    s, enf_log, infeasible = enforce_relations(s, cfg.tol)
    inf = set(infeasible)
    result = run_optimizer(s, cfg, inf)
    report = ExecutionReport(
        pre=pre,
        post=result.residual,
        sweeps=result.sweeps,
        infeasible=sorted(inf),
        log={"apply": apply_log, "fill": fill_log, "enforce": enf_log, "optimize": result.log},
    )
    if result.residual.violations:
        log.info("executor left residual violations: %s", result.residual.to_dict())
    return result.scene, report
