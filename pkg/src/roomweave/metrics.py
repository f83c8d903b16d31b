"""Reflection record: physical metrics and perceptual scores."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Mapping, Protocol

import numpy as np

from .catalog import AssetCatalog, category_matches, default_catalog, room_type_info
from .geometry import (
    DEFAULT_TOL,
    Tolerances,
    boundary_violation,
    check_relation,
    pairwise_penetration,
    relation_holds,
    yaw_axes,
)
from .scene import ROOM, Scene

log = logging.getLogger(__name__)

CRITERIA = ("realism", "functionality", "layout", "completion")

# clearance around floor objects counted as "used" floor when scoring completion
CLEARANCE = 0.3
COVERAGE_CELL = 0.1


@dataclass(frozen=True)
class PhysicalMetrics:
    obj_count: int = 0
    out_of_boundary: int = 0
    collision_pairs: int = 0

    def __post_init__(self):
        n = self.obj_count
        if min(n, self.out_of_boundary, self.collision_pairs) < 0:
            raise ValueError("metrics must be non-negative")
        if self.collision_pairs > n * (n - 1) // 2:
            raise ValueError("more collision pairs than object pairs")

    @property
    def violations(self) -> int:
        return self.out_of_boundary + self.collision_pairs

    def to_dict(self) -> dict:
        return {"obj": self.obj_count, "ob": self.out_of_boundary, "cn": self.collision_pairs}


@dataclass(frozen=True)
class PerceptualScores:
    realism: int
    functionality: int
    layout: int
    completion: int
    comments: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for c in CRITERIA:
            v = getattr(self, c)
            if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= 10:
                raise ValueError(f"{c} must be an integer in [0, 10], got {v!r}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.realism, self.functionality, self.layout, self.completion)

    @property
    def total(self) -> int:
        return sum(self.as_tuple())

    def to_dict(self) -> dict:
        d: dict[str, Any] = {c: getattr(self, c) for c in CRITERIA}
        d["comments"] = {c: self.comments.get(c, "") for c in CRITERIA}
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PerceptualScores":
        return cls(*(int(d[c]) for c in CRITERIA), comments=dict(d.get("comments", {})))


@dataclass(frozen=True)
class Reflection:
    physical: PhysicalMetrics
    perceptual: PerceptualScores
    suggestions: tuple[str, ...] = ()
    step: int = 0

    def __post_init__(self):
        if self.step < 0:
            raise ValueError("step must be >= 0")

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "physical": self.physical.to_dict(),
            "perceptual": self.perceptual.to_dict(),
            "suggestions": list(self.suggestions),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Reflection":
        p = d["physical"]
        return cls(
            PhysicalMetrics(p["obj"], p["ob"], p["cn"]),
            PerceptualScores.from_dict(d["perceptual"]),
            tuple(d.get("suggestions", ())),
            int(d.get("step", 0)),
        )


# --------------------------------------------------------------------------
# physical metrics

def exempt_pairs(s: Scene, tol: Tolerances = DEFAULT_TOL) -> set[frozenset[str]]:
    """(child, parent) pairs whose satisfied support relation excuses contact."""
    out = set()
    for o in s.objects:
        if o.relation is not None and o.relation.is_support:
            if check_relation(o, s.by_id[o.parent], o.relation, s.room, tol):
                out.add(frozenset((o.id, o.parent)))
    return out


def colliding_pairs(s: Scene, tol: Tolerances = DEFAULT_TOL) -> list[tuple[int, int, float]]:
    """Non-exempt colliding pairs as (i, j, depth) with i < j, in index order."""
    pen = pairwise_penetration(s.objects)
    ii, jj = np.nonzero(np.triu(pen > tol.eps_pen, k=1))
    if len(ii) == 0:
        return []
    exempt = exempt_pairs(s, tol)
    objs = s.objects
    return [
        (int(i), int(j), float(pen[i, j]))
        for i, j in zip(ii, jj)
        if frozenset((objs[i].id, objs[j].id)) not in exempt
    ]


def out_of_boundary_ids(s: Scene, tol: Tolerances = DEFAULT_TOL) -> list[str]:
    return [o.id for o in s.objects if boundary_violation(o, s.room) > tol.eps_pen]


def physical_metrics(s: Scene, tol: Tolerances = DEFAULT_TOL) -> PhysicalMetrics:
    return PhysicalMetrics(
        obj_count=len(s.objects),
        out_of_boundary=len(out_of_boundary_ids(s, tol)),
        collision_pairs=len(colliding_pairs(s, tol)),
    )


def relation_failures(s: Scene, tol: Tolerances = DEFAULT_TOL) -> list[str]:
    return [o.id for o in s.objects if not relation_holds(o, s.by_id, s.room, tol)]


# --------------------------------------------------------------------------
# perceptual scores

class ScorerError(RuntimeError):
    """The scorer failed; ``raw`` holds whatever it returned."""

    def __init__(self, message: str, raw: Any = None):
        super().__init__(message)
        self.raw = raw


class Scorer(Protocol):
    def score(self, scene: Scene, view: Any, query: str) -> Any:
        """Return PerceptualScores or a mapping with the four criteria."""


def _coerce_grade(name: str, value: Any, raw: Any) -> int:
    if isinstance(value, Mapping):
        value = value.get("grade")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScorerError(f"{name}: grade is not a number ({value!r})", raw)
    v = int(round(value))
    if v < 0 or v > 10:
        clamped = min(10, max(0, v))
        log.warning("scorer returned %s=%s; clamped to %s", name, v, clamped)
        v = clamped
    return v


def perceptual_scores(s: Scene, view: Any, query: str, scorer: Scorer) -> PerceptualScores:
    """Ask ``scorer`` for the four grades and force them into [0, 10]."""
    raw = scorer.score(s, view, query)
    if isinstance(raw, PerceptualScores):
        return raw
    if not isinstance(raw, Mapping):
        raise ScorerError("scorer returned an unexpected value", raw)
    grades = {}
    comments = dict(raw.get("comments", {}) or {})
    for c in CRITERIA:
        if c not in raw:
            raise ScorerError(f"missing criterion {c!r}", raw)
        grades[c] = _coerce_grade(c, raw[c], raw)
        if isinstance(raw[c], Mapping) and "comment" in raw[c]:
            comments[c] = str(raw[c]["comment"])
    return PerceptualScores(**grades, comments=comments)


def floor_coverage(s: Scene, clearance: float = CLEARANCE, cell: float = COVERAGE_CELL) -> float:
    """Fraction of floor cells lying within ``clearance`` of a floor object."""
    room = s.room
    nx = max(1, int(round(room.width / cell)))
    ny = max(1, int(round(room.depth / cell)))
    xs = (np.arange(nx) + 0.5) * room.width / nx
    ys = (np.arange(ny) + 0.5) * room.depth / ny
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    used = np.zeros(gx.shape, dtype=bool)
    for o in s.objects:
        if o.parent != ROOM:
            continue
        (ux, uy), (vx, vy) = yaw_axes(o.rotation)
        dx, dy = gx - o.location[0], gy - o.location[1]
        lx = np.abs(dx * ux + dy * uy)
        ly = np.abs(dx * vx + dy * vy)
        used |= (lx <= o.size[0] / 2 + clearance) & (ly <= o.size[1] / 2 + clearance)
    return float(used.mean())


def _matches_any(category: str, names) -> bool:
    return any(category_matches(category, n) for n in names)


@dataclass
class HeuristicScorer:
    """Deterministic rubric standing in for a vision-language judge."""

    catalog: AssetCatalog = field(default_factory=default_catalog)
    tol: Tolerances = DEFAULT_TOL

    def score(self, scene: Scene, view: Any = None, query: str = "") -> PerceptualScores:
        return heuristic_score(scene, self.catalog, self.tol)


def supporter_occupancy(s: Scene, catalog: AssetCatalog, tol: Tolerances = DEFAULT_TOL):
    """(occupied, total) over supporter and container objects."""
    held = set()
    for o in s.objects:
        if o.relation is not None and o.relation.is_support:
            if check_relation(o, s.by_id[o.parent], o.relation, s.room, tol):
                held.add(o.parent)
    hosts = [o.id for o in s.objects if catalog.class_of(o.category) in ("supporter", "container")]
    return sum(1 for h in hosts if h in held), len(hosts)


def heuristic_score(s: Scene, catalog: AssetCatalog | None = None,
                    tol: Tolerances = DEFAULT_TOL) -> PerceptualScores:
    catalog = catalog or default_catalog()
    info = room_type_info(s.room.room_type)
    n = len(s.objects)
    phys = physical_metrics(s, tol)
    bad_rel = relation_failures(s, tol)
    comments = {}

    problems = phys.collision_pairs + phys.out_of_boundary + len(bad_rel)
    layout = 10 - 2 * min(5, problems)
    comments["layout"] = (
        f"{phys.collision_pairs} colliding pairs, {phys.out_of_boundary} out of bounds, "
        f"{len(bad_rel)} unmet relations"
    )

    if n == 0:
        return PerceptualScores(0, 0, layout, 0, comments={
            "realism": "room is empty",
            "functionality": "room is empty",
            "layout": comments["layout"],
            "completion": "room is empty",
        })

    cov = floor_coverage(s)
    occupied, hosts = supporter_occupancy(s, catalog, tol)
    occ = occupied / hosts if hosts else 1.0
    comp = 0.45 * min(1.0, cov / 0.5) + 0.35 * occ + 0.2 * min(1.0, n / 20)
    completion = int(round(10 * comp))
    if cov < 0.5:
        completion = min(completion, 4)
    comments["completion"] = f"floor use {cov:.0%}, {occupied}/{hosts} supporters dressed"

    cats = [o.category for o in s.objects]
    essential = info.essential
    present = [e for e in essential if any(category_matches(c, e) for c in cats)]
    if essential:
        functionality = int(round(10 * len(present) / len(essential)))
        if len(present) < len(essential):
            functionality = min(functionality, 5)
    else:
        functionality = min(10, 4 + len(set(cats)))
    missing = [e for e in essential if e not in present]
    comments["functionality"] = "missing " + ", ".join(missing) if missing else "essentials present"

    known = tuple(info.essential) + tuple(info.typical)
    distinct = {c for c in cats if _matches_any(c, known)} if known else set(cats)
    small = sum(1 for c in cats if catalog.class_of(c) == "small-object")
    realism = min(10, 3 + len(distinct) + min(3, small // 2))
    odd = sorted({c for c in cats if _matches_any(c, info.incongruous)})
    if odd:
        realism = min(realism, 4)
        comments["realism"] = "out of place: " + ", ".join(odd)
    else:
        comments["realism"] = f"{len(distinct)} fitting categories, {small} small objects"
    return PerceptualScores(realism, functionality, layout, completion, comments=comments)


def suggestions(s: Scene, catalog: AssetCatalog | None = None,
                tol: Tolerances = DEFAULT_TOL) -> tuple[str, ...]:
    catalog = catalog or default_catalog()
    info = room_type_info(s.room.room_type)
    out = []
    pairs = colliding_pairs(s, tol)
    for i, j, depth in pairs[:5]:
        out.append(f"resolve collision {s.objects[i].id} / {s.objects[j].id} ({depth:.2f} m)")
    for oid in out_of_boundary_ids(s, tol)[:5]:
        out.append(f"move {oid} back inside the room")
    for oid in relation_failures(s, tol)[:5]:
        o = s.by_id[oid]
        out.append(f"fix relation {o.relation.value} of {oid}")
    cats = [o.category for o in s.objects]
    for e in info.essential:
        if not any(category_matches(c, e) for c in cats):
            out.append(f"add missing {e}")
    for o in s.objects:
        if _matches_any(o.category, info.incongruous):
            out.append(f"remove out-of-place {o.id}")
    supported = {o.parent for o in s.objects if o.relation is not None and o.relation.is_support}
    bare = [o.id for o in s.objects
            if catalog.class_of(o.category) in ("supporter", "container") and o.id not in supported]
    if bare:
        out.append("populate empty supporters: " + ", ".join(bare))
    out.append(f"diversity: {len(set(cats))} distinct categories")
    return tuple(out)


def category_counts(s: Scene) -> Counter:
    return Counter(o.category for o in s.objects)


def metrics_report(phys: PhysicalMetrics, perc: PerceptualScores | None = None) -> dict:
    """The flat report used by the CLI and the benchmark table."""
    d: dict[str, Any] = phys.to_dict()
    if perc is not None:
        d.update(perc.to_dict())
    return d
