"""Oriented-box math on yaw-only boxes.

Everything here works in the floor plane plus a z interval: with rotation
restricted to yaw, a 2D separating-axis test over the four footprint axes
combined with a z-interval test is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scene import ROOM, RelationType, RoomBounds, SceneObject

Vec2 = tuple[float, float]

# shell thickness approximating container walls for the "inside" relation
INSIDE_MARGIN = 0.03


@dataclass(frozen=True)
class Tolerances:
    eps_wall: float = 0.05
    eps_gap: float = 0.10
    eps_ang: float = 5.0
    eps_pen: float = 1e-4
    eps_floor: float = 0.01

    def __post_init__(self):
        for name in ("eps_wall", "eps_gap", "eps_ang", "eps_pen", "eps_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class OrientedBox:
    center: tuple[float, float, float]
    yaw: float
    half_extents: tuple[float, float, float]

    def __post_init__(self):
        if min(self.half_extents) <= 0:
            raise ValueError("half extents must be positive")
        if not 0.0 <= self.yaw < 360.0:
            raise ValueError("yaw must be in [0, 360)")

    @property
    def axes(self) -> tuple[Vec2, Vec2]:
        return yaw_axes(self.yaw)

    def corners(self) -> list[Vec2]:
        return _corners(self.center, self.yaw, self.half_extents)

    @property
    def z_range(self) -> tuple[float, float]:
        return self.center[2] - self.half_extents[2], self.center[2] + self.half_extents[2]


@dataclass(frozen=True)
class Overlap:
    intersects: bool
    penetration_depth: float = 0.0
    mtv: Vec2 = (0.0, 0.0)


def yaw_axes(yaw: float) -> tuple[Vec2, Vec2]:
    """Local +x and +y (front) axes in world coordinates."""
    if yaw % 90.0 == 0.0:
        c, s = {0: (1.0, 0.0), 1: (0.0, 1.0), 2: (-1.0, 0.0), 3: (0.0, -1.0)}[int(yaw // 90) % 4]
    else:
        r = math.radians(yaw)
        c, s = math.cos(r), math.sin(r)
    return (c, s), (-s, c)


def _corners(center, yaw, half) -> list[Vec2]:
    (ux, uy), (vx, vy) = yaw_axes(yaw)
    cx, cy = center[0], center[1]
    hx, hy = half[0], half[1]
    return [
        (cx + sx * hx * ux + sy * hy * vx, cy + sx * hx * uy + sy * hy * vy)
        for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1))
    ]


def box_of(o: SceneObject) -> OrientedBox:
    assert o.size is not None
    return OrientedBox(
        center=o.location,
        yaw=o.rotation,
        half_extents=(o.size[0] / 2, o.size[1] / 2, o.size[2] / 2),
    )


def footprint_corners(o: SceneObject) -> list[Vec2]:
    """Counter-clockwise footprint corners, starting at local (-x, -y)."""
    return box_of(o).corners()


def _dot(a: Vec2, b: Vec2) -> float:
    return a[0] * b[0] + a[1] * b[1]


def _radius(box: OrientedBox, axis: Vec2) -> float:
    u, v = box.axes
    return box.half_extents[0] * abs(_dot(axis, u)) + box.half_extents[1] * abs(_dot(axis, v))


def _z_overlap(a: OrientedBox, b: OrientedBox) -> float:
    a0, a1 = a.z_range
    b0, b1 = b.z_range
    return min(a1, b1) - max(a0, b0)


def obb_overlap(a: OrientedBox, b: OrientedBox) -> Overlap:
    """Separating-axis test. The z interval is checked first; the penetration
    depth and MTV come from the four footprint axes. The MTV points from b
    toward a."""
    if _z_overlap(a, b) <= 0:
        return Overlap(False)
    d = (a.center[0] - b.center[0], a.center[1] - b.center[1])
    best, best_axis = math.inf, (0.0, 0.0)
    for axis in (*a.axes, *b.axes):
        dist = _dot(d, axis)
        ov = _radius(a, axis) + _radius(b, axis) - abs(dist)
        if ov <= 0:
            return Overlap(False)
        if ov < best:
            best = ov
            best_axis = axis if dist >= 0 else (-axis[0], -axis[1])
    return Overlap(True, best, best_axis)


def separation_along(a: OrientedBox, b: OrientedBox, direction: Vec2) -> float:
    """Smallest signed shift s such that ``a`` moved by ``s * direction`` no
    longer overlaps ``b`` in the floor plane. Returns 0.0 if already apart and
    ``inf`` when no shift along ``direction`` separates them."""
    if not obb_overlap(a, b).intersects:
        return 0.0
    d = (a.center[0] - b.center[0], a.center[1] - b.center[1])
    best = math.inf
    for axis in (*a.axes, *b.axes):
        t = _dot(direction, axis)
        if abs(t) < 1e-12:
            continue
        dist = _dot(d, axis)
        r = _radius(a, axis) + _radius(b, axis)
        for target in (r, -r):
            s = (target - dist) / t
            # coincident centers tie both ways: prefer moving along direction
            if abs(s) < abs(best) - 1e-12 or (abs(abs(s) - abs(best)) <= 1e-12 and s > best):
                best = s
    return best


def pairwise_penetration(objects: Sequence[SceneObject]) -> np.ndarray:
    """Vectorized SAT over all pairs. Entry (i, j) is the footprint penetration
    depth when boxes i and j intersect, else 0. Symmetric with zero diagonal."""
    n = len(objects)
    if n < 2:
        return np.zeros((n, n))
    loc = np.array([o.location for o in objects], dtype=float)
    half = np.array([o.size for o in objects], dtype=float) / 2.0
    yaw = np.array([o.rotation for o in objects], dtype=float)
    ax = np.empty((n, 2, 2))
    for k, y in enumerate(yaw):
        ax[k] = yaw_axes(float(y))
    # z gate
    z0 = loc[:, 2] - half[:, 2]
    z1 = loc[:, 2] + half[:, 2]
    zov = np.minimum(z1[:, None], z1[None, :]) - np.maximum(z0[:, None], z0[None, :])
    d = loc[None, :, :2] - loc[:, None, :2]  # (i, j) -> c_j - c_i

    def radius(idx_axes: np.ndarray) -> np.ndarray:
        # idx_axes: (n, n, 2) axis per pair; radius of every box i and j along it
        ri = half[:, None, 0] * np.abs(np.einsum("ijk,ik->ij", idx_axes, ax[:, 0])) + half[
            :, None, 1
        ] * np.abs(np.einsum("ijk,ik->ij", idx_axes, ax[:, 1]))
        rj = half[None, :, 0] * np.abs(np.einsum("ijk,jk->ij", idx_axes, ax[:, 0])) + half[
            None, :, 1
        ] * np.abs(np.einsum("ijk,jk->ij", idx_axes, ax[:, 1]))
        return ri + rj

    overlaps = []
    for owner in (0, 1):
        for a in (0, 1):
            if owner == 0:
                axis = np.broadcast_to(ax[:, None, a, :], (n, n, 2))
            else:
                axis = np.broadcast_to(ax[None, :, a, :], (n, n, 2))
            dist = np.abs(np.einsum("ijk,ijk->ij", d, axis))
            overlaps.append(radius(axis) - dist)
    pen = np.min(np.stack(overlaps), axis=0)
    hit = (pen > 0) & (zov > 0)
    np.fill_diagonal(hit, False)
    return np.where(hit, pen, 0.0)


# --------------------------------------------------------------------------
# room boundary

def boundary_violation(o: SceneObject, room: RoomBounds) -> float:
    """Largest distance any footprint corner or the z extent leaves the room."""
    worst = 0.0
    for x, y in footprint_corners(o):
        worst = max(worst, -x, x - room.width, -y, y - room.depth)
    z, hz = o.location[2], o.size[2] / 2
    worst = max(worst, -(z - hz), (z + hz) - room.height)
    return max(0.0, worst)


def boundary_resolution(o: SceneObject, room: RoomBounds) -> tuple[float, float, float]:
    """Translation that brings ``o`` inside the room (centered on axes where it
    is larger than the room)."""
    xs = [c[0] for c in footprint_corners(o)]
    ys = [c[1] for c in footprint_corners(o)]
    z, hz = o.location[2], o.size[2] / 2

    def fix(lo: float, hi: float, limit: float) -> float:
        if hi - lo > limit:
            return limit / 2 - (lo + hi) / 2
        if lo < 0:
            return -lo
        if hi > limit:
            return limit - hi
        return 0.0

    return fix(min(xs), max(xs), room.width), fix(min(ys), max(ys), room.depth), fix(
        z - hz, z + hz, room.height
    )


def top_surface(o: SceneObject) -> tuple[float, list[Vec2]]:
    return o.location[2] + o.size[2] / 2, footprint_corners(o)


# --------------------------------------------------------------------------
# relations

LOCAL_FACES: dict[str, Vec2] = {"+x": (1.0, 0.0), "-x": (-1.0, 0.0), "+y": (0.0, 1.0), "-y": (0.0, -1.0)}

FACE_PAIRS: dict[RelationType, tuple[tuple[str, str], ...]] = {
    RelationType.FRONT_TO_FRONT: (("+y", "+y"),),
    RelationType.BACK_TO_BACK: (("-y", "-y"),),
    RelationType.LEFTRIGHT_TO_LEFTRIGHT: tuple((a, b) for a in ("+x", "-x") for b in ("+x", "-x")),
    RelationType.SIDE_BY_SIDE: tuple(
        (a, b) for a in ("+x", "-x", "+y") for b in ("+x", "-x", "+y")
    ),
}
WALL_FACES: dict[RelationType, tuple[str, ...]] = {
    RelationType.AGAINST_WALL: ("-y",),
    RelationType.SIDE_AGAINST_WALL: ("+x", "-x", "+y"),
}


class RelationArityError(ValueError):
    pass


def face_normal(o: SceneObject, face: str) -> Vec2:
    u, v = yaw_axes(o.rotation)
    lx, ly = LOCAL_FACES[face]
    return (lx * u[0] + ly * v[0], lx * u[1] + ly * v[1])


def face_extent(o: SceneObject, face: str) -> tuple[float, float]:
    """(half extent along the face normal, half width along the face)."""
    hx, hy = o.size[0] / 2, o.size[1] / 2
    return (hx, hy) if face in ("+x", "-x") else (hy, hx)


def angle_between(a: Vec2, b: Vec2) -> float:
    na, nb = math.hypot(*a), math.hypot(*b)
    if na == 0 or nb == 0:
        return 180.0
    c = max(-1.0, min(1.0, _dot(a, b) / (na * nb)))
    return math.degrees(math.acos(c))


def walls(room: RoomBounds) -> list[tuple[str, Vec2, float]]:
    """(name, inward normal, offset) with the wall plane n . p = offset."""
    return [
        ("y0", (0.0, 1.0), 0.0),
        ("x1", (-1.0, 0.0), -room.width),
        ("y1", (0.0, -1.0), -room.depth),
        ("x0", (1.0, 0.0), 0.0),
    ]


def wall_distance(p: Vec2, normal: Vec2, offset: float) -> float:
    return _dot(p, normal) - offset


def face_midpoint(o: SceneObject, face: str) -> Vec2:
    n = face_normal(o, face)
    e, _ = face_extent(o, face)
    return (o.location[0] + n[0] * e, o.location[1] + n[1] * e)


def wall_face_ok(o: SceneObject, face: str, room: RoomBounds, tol: Tolerances) -> bool:
    n = face_normal(o, face)
    m = face_midpoint(o, face)
    for _name, wn, off in walls(room):
        if angle_between(n, (-wn[0], -wn[1])) <= tol.eps_ang and abs(
            wall_distance(m, wn, off)
        ) <= tol.eps_wall:
            return True
    return False


def face_pair_gap(child: SceneObject, cface: str, parent: SceneObject, pface: str):
    """Angular error, gap and lateral offset for a facing pair of faces.

    The faces face each other when the child's face normal is anti-parallel to
    the parent's; the gap is the distance between the two face planes measured
    along the child's normal.
    """
    nc = face_normal(child, cface)
    np_ = face_normal(parent, pface)
    ang = angle_between(nc, (-np_[0], -np_[1]))
    d = (parent.location[0] - child.location[0], parent.location[1] - child.location[1])
    ec, wc = face_extent(child, cface)
    ep, wp = face_extent(parent, pface)
    gap = _dot(d, nc) - ec - ep
    lateral = abs(_dot(d, (-nc[1], nc[0])))
    return ang, gap, lateral, wc + wp


def front_against_gap(child: SceneObject, parent: SceneObject) -> tuple[float, float]:
    """(angle between child's front and the direction to the parent center,
    gap from the child's front face to the parent box along that front)."""
    f = face_normal(child, "+y")
    d = (parent.location[0] - child.location[0], parent.location[1] - child.location[1])
    ang = angle_between(f, d)
    front = _dot(child.location[:2], f) + child.size[1] / 2
    nearest = min(_dot(c, f) for c in footprint_corners(parent))
    return ang, nearest - front


def to_local(parent: SceneObject, p: Vec2) -> Vec2:
    u, v = yaw_axes(parent.rotation)
    d = (p[0] - parent.location[0], p[1] - parent.location[1])
    return _dot(d, u), _dot(d, v)


def from_local(parent: SceneObject, lp: Vec2) -> Vec2:
    u, v = yaw_axes(parent.rotation)
    return (
        parent.location[0] + lp[0] * u[0] + lp[1] * v[0],
        parent.location[1] + lp[0] * u[1] + lp[1] * v[1],
    )


def inside_ok(child: SceneObject, parent: SceneObject, margin: float = INSIDE_MARGIN) -> bool:
    hx, hy, hz = (s / 2 - margin for s in parent.size)
    if min(hx, hy, hz) <= 0:
        return False
    for c in footprint_corners(child):
        lx, ly = to_local(parent, c)
        if abs(lx) > hx + 1e-9 or abs(ly) > hy + 1e-9:
            return False
    cz, chz = child.location[2], child.size[2] / 2
    pz = parent.location[2]
    return cz - chz >= pz - hz - 1e-9 and cz + chz <= pz + hz + 1e-9


def on_top_ok(child: SceneObject, parent: SceneObject, tol: Tolerances) -> bool:
    base = child.location[2] - child.size[2] / 2
    top = parent.location[2] + parent.size[2] / 2
    if abs(base - top) > tol.eps_floor:
        return False
    lx, ly = to_local(parent, child.location[:2])
    return abs(lx) <= parent.size[0] / 2 + 1e-9 and abs(ly) <= parent.size[1] / 2 + 1e-9


def check_relation(
    child: SceneObject,
    parent: SceneObject | RoomBounds | str | None,
    rel: RelationType,
    room: RoomBounds,
    tol: Tolerances = DEFAULT_TOL,
) -> bool:
    """True iff the geometric predicate of ``rel`` holds within ``tol``.

    ``parent`` is the parent object for object relations, and the room (or the
    string ``"room"`` or ``None``) for room relations.
    """
    rel = RelationType(rel)
    parent_is_room = parent is None or parent == ROOM or isinstance(parent, RoomBounds)
    if rel.is_room_relation != parent_is_room:
        raise RelationArityError(f"{rel.value} does not take a {'room' if parent_is_room else 'object'} parent")

    if rel is RelationType.ON_FLOOR:
        return abs(child.location[2] - child.size[2] / 2) <= tol.eps_floor
    if rel in WALL_FACES:
        return any(wall_face_ok(child, f, room, tol) for f in WALL_FACES[rel])

    assert isinstance(parent, SceneObject)
    if rel is RelationType.ON_TOP:
        return on_top_ok(child, parent, tol)
    if rel is RelationType.INSIDE:
        return inside_ok(child, parent)
    if rel is RelationType.FRONT_AGAINST:
        ang, gap = front_against_gap(child, parent)
        return ang <= tol.eps_ang and -tol.eps_pen <= gap <= tol.eps_gap
    for cf, pf in FACE_PAIRS[rel]:
        ang, gap, lateral, reach = face_pair_gap(child, cf, parent, pf)
        if ang <= tol.eps_ang and -tol.eps_pen <= gap <= tol.eps_gap and lateral < reach:
            return True
    return False


def relation_holds(o: SceneObject, scene_objects: dict[str, SceneObject], room: RoomBounds,
                   tol: Tolerances = DEFAULT_TOL) -> bool:
    """Convenience wrapper resolving the parent from an id map."""
    if o.relation is None:
        return True
    parent = ROOM if o.parent == ROOM else scene_objects[o.parent]
    return check_relation(o, parent, o.relation, room, tol)
