import random

import pytest
from hypothesis import given, settings, strategies as st

from generators import relation_case
from roomweave.catalog import CLASS_DEFAULT_SIZE, default_catalog
from roomweave.executor import (
    InfeasibleRelation,
    OptimConfig,
    enforce_relation,
    enforce_relations,
    execute,
    fill_sizes,
    optimize,
    run_optimizer,
)
from roomweave.geometry import DEFAULT_TOL, box_of, check_relation, face_normal, obb_overlap
from roomweave.metrics import physical_metrics
from roomweave.scene import (
    ROOM,
    RelationType,
    RoomBounds,
    Scene,
    SceneDelta,
    SceneObject,
    serialize_scene,
)

ROOM6 = RoomBounds(6.0, 6.0, 3.0)
BEDROOM = RoomBounds(5.0, 4.0, 3.0, "bedroom")


def cube(oid, x, y, yaw=0.0, size=(1.0, 1.0, 1.0)):
    return SceneObject(oid, "cube", (x, y, size[2] / 2), yaw, size)


def test_bed_snaps_flat_against_nearest_wall():
    bed = SceneObject("bed_0", "double bed", (2.5, 1.0, 0.3), 10.0, (1.6, 2.0, 0.6),
                      relation=RelationType.AGAINST_WALL)
    out = enforce_relation(Scene(BEDROOM, (bed,)), "bed_0").get("bed_0")
    # the back (local -y) meets wall y = 0, so the front faces +y
    assert out.rotation == 0.0
    assert out.location[1] - out.size[1] / 2 == pytest.approx(0.0, abs=1e-9)
    assert out.location[0] == pytest.approx(2.5)


@pytest.mark.parametrize("x,y,yaw", [(4.6, 2.0, 80.0), (2.5, 3.5, 200.0), (0.3, 2.0, 250.0)])
def test_against_wall_on_each_wall(x, y, yaw):
    o = SceneObject("w", "wardrobe", (x, y, 1.0), yaw, (1.0, 0.6, 2.0),
                    relation=RelationType.AGAINST_WALL)
    out = enforce_relation(Scene(BEDROOM, (o,)), "w").get("w")
    assert check_relation(out, ROOM, RelationType.AGAINST_WALL, BEDROOM)


def test_chair_turns_to_face_desk():
    desk = cube("desk_0", 3.0, 3.0, 0.0, (1.2, 0.6, 0.75))
    chair = SceneObject("chair_0", "chair", (1.0, 1.0, 0.45), 0.0, (0.5, 0.5, 0.9),
                        "desk_0", RelationType.FRONT_TO_FRONT)
    out = enforce_relation(Scene(ROOM6, (desk, chair)), "chair_0").get("chair_0")
    assert check_relation(out, desk, RelationType.FRONT_TO_FRONT, ROOM6)
    fc, fd = face_normal(out, "+y"), face_normal(desk, "+y")
    assert fc[0] * fd[0] + fc[1] * fd[1] == pytest.approx(-1.0, abs=1e-6)


def test_enforce_leaves_input_untouched():
    desk = cube("desk_0", 3.0, 3.0)
    chair = SceneObject("c", "chair", (1.0, 1.0, 0.45), 0.0, (0.5, 0.5, 0.9), "desk_0",
                        RelationType.FRONT_AGAINST)
    s = Scene(ROOM6, (desk, chair))
    before = serialize_scene(s)
    enforce_relation(s, "c")
    assert serialize_scene(s) == before


def test_enforce_without_relation_is_an_error():
    with pytest.raises(ValueError):
        enforce_relation(Scene(ROOM6, (cube("a", 1, 1),)), "a")


def test_oversized_child_is_infeasible():
    table = cube("t", 3, 3, 0, (0.5, 0.5, 0.7))
    box = SceneObject("b", "box", (3, 3, 1.0), 0, (1.0, 1.0, 0.3), "t", RelationType.ON_TOP)
    with pytest.raises(InfeasibleRelation):
        enforce_relation(Scene(ROOM6, (table, box)), "b")
    # enforce_relations keeps going and reports the failure instead
    _s, _log, bad = enforce_relations(Scene(ROOM6, (table, box)))
    assert bad == ["b"]


def test_descendants_ride_along():
    stand = SceneObject("n", "nightstand", (2.0, 2.0, 0.3), 0.0, (0.5, 0.4, 0.6),
                        relation=RelationType.AGAINST_WALL)
    lamp = SceneObject("l", "lamp", (2.0, 2.0, 0.8), 0.0, (0.2, 0.2, 0.4), "n", RelationType.ON_TOP)
    s = enforce_relation(Scene(ROOM6, (stand, lamp)), "n")
    assert check_relation(s.get("l"), s.get("n"), RelationType.ON_TOP, ROOM6)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(list(RelationType)))
def test_enforced_relation_holds(seed, rel):
    s = enforce_relation(relation_case(random.Random(seed), rel), "c")
    c = s.get("c")
    parent = ROOM if c.parent == ROOM else s.get(c.parent)
    assert check_relation(c, parent, rel, s.room, DEFAULT_TOL)


def test_two_overlapping_cubes_resolve_quickly():
    s = Scene(ROOM6, (cube("a", 3.0, 3.0), cube("b", 3.4, 3.1)))
    res = run_optimizer(s)
    assert res.residual.violations == 0
    assert res.sweeps <= 2


def test_added_cube_is_pushed_along_mtv():
    s = Scene(ROOM6, (cube("a", 3.0, 3.0, 0, (2.0, 2.0, 1.0)),))
    new = SceneObject("b", "cube", (3.7, 3.1, 0.2), 0.0, (0.4, 0.4, 0.4))
    mtv = obb_overlap(box_of(new), box_of(s.get("a"))).mtv
    out, rep = execute(s, SceneDelta(adds=(new,)))
    assert rep.pre.collision_pairs == 1
    assert physical_metrics(out).to_dict() == {"obj": 2, "ob": 0, "cn": 0}
    moved = out.get("b")
    dx, dy = moved.location[0] - 3.7, moved.location[1] - 3.1
    assert dx * mtv[0] + dy * mtv[1] > 0
    assert not obb_overlap(box_of(moved), box_of(out.get("a"))).intersects


def test_boundary_projection():
    s = Scene(ROOM6, (cube("a", 0.1, 5.9),))
    out, residual = optimize(s)
    assert residual.out_of_boundary == 0
    assert out.get("a").location[:2] == pytest.approx((0.5, 5.5), abs=1e-3)


def test_optimizer_is_deterministic():
    rng = random.Random(3)
    objs = [cube(f"o{k}", rng.uniform(1, 5), rng.uniform(1, 5), rng.uniform(0, 360),
                 (rng.uniform(0.3, 0.9),) * 3) for k in range(12)]
    s = Scene(ROOM6, tuple(objs))
    a, _ = optimize(s)
    b, _ = optimize(s)
    assert serialize_scene(a) == serialize_scene(b)


def test_optim_config_validates():
    with pytest.raises(ValueError):
        OptimConfig(max_steps=0)
    with pytest.raises(ValueError):
        OptimConfig(step_damping=1.5)


def test_fill_sizes_from_catalog_and_class_defaults():
    cat = default_catalog()
    d = SceneDelta(adds=(
        SceneObject("bed_0", "double bed", (2, 2, 0.3)),
        SceneObject("q", "quux gadget", (1, 1, 0.1)),
    ))
    filled, log = fill_sizes(d, cat)
    assert filled.adds[0].size == cat.lookup("double bed").size
    assert filled.adds[1].size == CLASS_DEFAULT_SIZE["large-furniture"]
    assert len(log) == 2


def test_execute_report_has_all_phases():
    s = Scene(ROOM6)
    _out, rep = execute(s, SceneDelta(adds=(SceneObject("t", "table", (3, 3, 0.4)),)))
    assert set(rep.to_dict()["log"]) == {"apply", "fill", "enforce", "optimize"}
