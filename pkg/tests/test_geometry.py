import math
import random

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from oracles import corner_boundary_violation, naive_penetration, sampled_intersects
from roomweave.geometry import (
    DEFAULT_TOL,
    OrientedBox,
    RelationArityError,
    Tolerances,
    box_of,
    boundary_resolution,
    boundary_violation,
    check_relation,
    footprint_corners,
    obb_overlap,
    pairwise_penetration,
    separation_along,
    top_surface,
    yaw_axes,
)
from roomweave.scene import ROOM, RelationType, RoomBounds, SceneObject

ROOM5 = RoomBounds(5.0, 4.0, 3.0)


def cube(oid, x, y, yaw=0.0, size=(1.0, 1.0, 1.0), z=None):
    return SceneObject(oid, "cube", (x, y, size[2] / 2 if z is None else z), yaw, size)


boxes = st.builds(
    lambda x, y, z, yaw, sx, sy, sz: SceneObject("o", "box", (x, y, z), yaw, (sx, sy, sz)),
    st.floats(0, 3), st.floats(0, 3), st.floats(0, 1.5), st.floats(0, 359.99),
    st.floats(0.1, 1.5), st.floats(0.1, 1.5), st.floats(0.1, 1.5),
)


def test_rotated_unit_cubes_intersect():
    # frozen from the closed-grid sampling oracle (10^4 points per box): True
    a, b = cube("a", 0, 0), cube("b", 1.2, 0, 45.0)
    assert sampled_intersects(a, b) is True
    ov = obb_overlap(box_of(a), box_of(b))
    assert ov.intersects
    # the 45 degree corner reaches x = 1.2 - sqrt(2)/2
    assert ov.penetration_depth == pytest.approx(0.5 - (1.2 - math.sqrt(0.5)), abs=1e-12)
    assert ov.mtv == pytest.approx((-1.0, 0.0))


def test_axis_aligned_neighbours_apart():
    a, b = cube("a", 0, 0), cube("b", 1.2, 0)
    assert sampled_intersects(a, b) is False
    assert not obb_overlap(box_of(a), box_of(b)).intersects


def test_touching_boxes_do_not_intersect():
    a, b = cube("a", 0, 0), cube("b", 1.0, 0)
    assert not obb_overlap(box_of(a), box_of(b)).intersects


def test_stacked_boxes_are_separated_by_z():
    a = cube("a", 0, 0)
    b = cube("b", 0, 0, z=1.5)
    assert not obb_overlap(box_of(a), box_of(b)).intersects


def test_mtv_points_from_b_to_a():
    a, b = cube("a", 0.8, 0.1), cube("b", 0, 0)
    ov = obb_overlap(box_of(a), box_of(b))
    assert ov.mtv == pytest.approx((1.0, 0.0))
    assert ov.penetration_depth == pytest.approx(0.2)


def test_yaw_axes_exact_for_right_angles():
    assert yaw_axes(90.0) == ((0.0, 1.0), (-1.0, 0.0))
    assert yaw_axes(180.0) == ((-1.0, 0.0), (0.0, -1.0))


def test_oriented_box_validates():
    with pytest.raises(ValueError):
        OrientedBox((0, 0, 0), 0.0, (0.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        OrientedBox((0, 0, 0), 360.0, (1.0, 1.0, 1.0))


@settings(max_examples=200, deadline=None)
@given(boxes, boxes)
def test_sat_matches_naive_projection(a, b):
    b = SceneObject("p", "box", b.location, b.rotation, b.size)
    ov = obb_overlap(box_of(a), box_of(b))
    ref = naive_penetration(a, b)
    assume(abs(ref) > 1e-9 or not ov.intersects)
    assert ov.intersects == (ref > 0)
    if ov.intersects:
        assert ov.penetration_depth == pytest.approx(ref, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(boxes, boxes)
def test_sampled_overlap_implies_sat_overlap(a, b):
    # the sampling oracle is sound, so its True answers must be confirmed
    b = SceneObject("p", "box", b.location, b.rotation, b.size)
    if sampled_intersects(a, b, points_per_box=1000):
        assert obb_overlap(box_of(a), box_of(b)).intersects


@settings(max_examples=100, deadline=None)
@given(boxes, boxes)
def test_overlap_is_symmetric(a, b):
    b = SceneObject("p", "box", b.location, b.rotation, b.size)
    ab, ba = obb_overlap(box_of(a), box_of(b)), obb_overlap(box_of(b), box_of(a))
    assert ab.intersects == ba.intersects
    if ab.intersects:
        assert ab.penetration_depth == pytest.approx(ba.penetration_depth, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(boxes, boxes, st.floats(-5, 5), st.floats(-5, 5))
def test_overlap_is_translation_invariant(a, b, dx, dy):
    b = SceneObject("p", "box", b.location, b.rotation, b.size)
    ref = obb_overlap(box_of(a), box_of(b))
    moved = obb_overlap(box_of(a.moved(dx, dy)), box_of(b.moved(dx, dy)))
    if abs(ref.penetration_depth) > 1e-6 or not ref.intersects:
        assert moved.intersects == ref.intersects


offsets = st.tuples(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8), st.floats(-0.5, 0.5))


@settings(max_examples=100, deadline=None)
@given(boxes, boxes, offsets)
def test_separation_along_mtv_resolves(a, b, off):
    # b sits near a so most draws overlap
    loc = tuple(p + d for p, d in zip(a.location, off))
    b = SceneObject("p", "box", loc, b.rotation, b.size)
    ov = obb_overlap(box_of(a), box_of(b))
    assume(ov.intersects)
    s = separation_along(box_of(a), box_of(b), ov.mtv)
    assert s == pytest.approx(ov.penetration_depth, abs=1e-9)
    # locations are quantized to 6 significant digits, so push a little past
    moved = a.moved(ov.mtv[0] * (s + 1e-4), ov.mtv[1] * (s + 1e-4))
    assert not obb_overlap(box_of(moved), box_of(b)).intersects


def test_pairwise_matrix_matches_naive_loop():
    rng = random.Random(7)
    objs = [SceneObject(f"o{k}", "box", (rng.uniform(0, 4), rng.uniform(0, 4), rng.uniform(0, 1)),
                        rng.uniform(0, 360), tuple(rng.uniform(0.1, 1.5) for _ in range(3)))
            for k in range(25)]
    pen = pairwise_penetration(objs)
    assert pen.shape == (25, 25)
    assert np.allclose(pen, pen.T)
    assert np.all(np.diag(pen) == 0)
    for i in range(25):
        for j in range(i + 1, 25):
            assert pen[i, j] == pytest.approx(naive_penetration(objs[i], objs[j]), abs=1e-9)


def test_pairwise_small_inputs():
    assert pairwise_penetration([]).shape == (0, 0)
    assert pairwise_penetration([cube("a", 1, 1)]).shape == (1, 1)


def test_boundary_rotated_box_straddling_wall():
    o = SceneObject("o", "box", (0.3, 2.0, 0.5), 30.0, (1.0, 0.6, 1.0))
    # corner enumeration by hand: the lowest x corner is at
    # 0.3 - 0.5*cos30 - 0.3*sin30
    expect = -(0.3 - 0.5 * math.cos(math.radians(30)) - 0.3 * math.sin(math.radians(30)))
    assert boundary_violation(o, ROOM5) == pytest.approx(expect, abs=1e-12)
    assert boundary_violation(o, ROOM5) == pytest.approx(corner_boundary_violation(o, ROOM5))


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 6), st.floats(-1, 5), st.floats(-0.5, 3.5), st.floats(0, 359.99),
       st.floats(0.1, 2), st.floats(0.1, 2), st.floats(0.1, 2))
def test_boundary_matches_corner_enumeration(x, y, z, yaw, sx, sy, sz):
    o = SceneObject("o", "box", (x, y, z), yaw, (sx, sy, sz))
    assert boundary_violation(o, ROOM5) == pytest.approx(
        max(0.0, corner_boundary_violation(o, ROOM5)), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1, 6), st.floats(-1, 5), st.floats(0, 359.99),
       st.floats(0.1, 2), st.floats(0.1, 2))
def test_boundary_resolution_brings_box_inside(x, y, yaw, sx, sy):
    o = SceneObject("o", "box", (x, y, 0.5), yaw, (sx, sy, 1.0))
    dx, dy, dz = boundary_resolution(o, ROOM5)
    # the moved location is quantized to 6 significant digits
    assert boundary_violation(o.moved(dx, dy, dz), ROOM5) <= 1e-5


def test_top_surface_height_and_corners():
    o = cube("t", 1, 1, 0.0, (1.2, 0.6, 0.75))
    z, corners = top_surface(o)
    assert z == pytest.approx(0.75)
    assert corners == footprint_corners(o)


def test_against_wall_back_on_wall():
    bed = SceneObject("bed_0", "bed", (2.5, 1.0, 0.3), 0.0, (1.6, 2.0, 0.6))
    assert check_relation(bed, ROOM, RelationType.AGAINST_WALL, ROOM5)
    turned = SceneObject("bed_0", "bed", (2.5, 1.0, 0.3), 180.0, (1.6, 2.0, 0.6))
    assert not check_relation(turned, ROOM, RelationType.AGAINST_WALL, ROOM5)


def test_against_wall_respects_tolerances():
    bed = SceneObject("bed_0", "bed", (2.5, 1.04, 0.3), 4.0, (1.6, 2.0, 0.6))
    assert check_relation(bed, ROOM, RelationType.AGAINST_WALL, ROOM5)
    assert not check_relation(bed, ROOM, RelationType.AGAINST_WALL, ROOM5,
                              Tolerances(eps_wall=0.01))


def test_lamp_on_nightstand_top():
    stand = cube("n", 1, 1, 0.0, (0.5, 0.4, 0.6))
    lamp = SceneObject("l", "lamp", (1.0, 1.0, 0.8), 0.0, (0.2, 0.2, 0.4), "n", RelationType.ON_TOP)
    assert check_relation(lamp, stand, RelationType.ON_TOP, ROOM5)
    floating = SceneObject("l", "lamp", (1.0, 1.0, 0.9), 0.0, (0.2, 0.2, 0.4), "n",
                           RelationType.ON_TOP)
    assert not check_relation(floating, stand, RelationType.ON_TOP, ROOM5)


def test_inside_shelf():
    shelf = cube("s", 1, 1, 90.0, (0.8, 0.3, 1.8))
    book = SceneObject("b", "book", (1.0, 1.2, 0.5), 90.0, (0.2, 0.15, 0.25), "s", RelationType.INSIDE)
    assert check_relation(book, shelf, RelationType.INSIDE, ROOM5)
    out = SceneObject("b", "book", (1.5, 1.2, 0.5), 90.0, (0.2, 0.15, 0.25), "s", RelationType.INSIDE)
    assert not check_relation(out, shelf, RelationType.INSIDE, ROOM5)


def test_chair_front_against_desk():
    desk = cube("d", 2.0, 3.0, 0.0, (1.2, 0.6, 0.75))
    chair = cube("c", 2.0, 2.45, 0.0, (0.5, 0.5, 0.9))
    # chair front at y=2.7, desk starts at y=2.7
    assert check_relation(chair, desk, RelationType.FRONT_AGAINST, ROOM5)
    away = cube("c", 2.0, 2.45, 180.0, (0.5, 0.5, 0.9))
    assert not check_relation(away, desk, RelationType.FRONT_AGAINST, ROOM5)


def test_front_to_front_pair():
    a = cube("a", 1.0, 1.0, 0.0, (0.5, 0.5, 0.9))
    b = cube("b", 1.0, 1.55, 180.0, (0.5, 0.5, 0.9))
    assert check_relation(a, b, RelationType.FRONT_TO_FRONT, ROOM5)
    assert not check_relation(a, b, RelationType.BACK_TO_BACK, ROOM5)


def test_on_floor():
    assert check_relation(cube("a", 1, 1), ROOM, RelationType.ON_FLOOR, ROOM5)
    assert not check_relation(cube("a", 1, 1, z=0.6), ROOM, RelationType.ON_FLOOR, ROOM5)


def test_relation_arity_error():
    a, b = cube("a", 1, 1), cube("b", 2, 2)
    with pytest.raises(RelationArityError):
        check_relation(a, ROOM, RelationType.ON_TOP, ROOM5)
    with pytest.raises(RelationArityError):
        check_relation(a, b, RelationType.AGAINST_WALL, ROOM5)


def test_default_tolerances():
    t = DEFAULT_TOL
    assert (t.eps_wall, t.eps_gap, t.eps_ang, t.eps_pen, t.eps_floor) == (0.05, 0.10, 5.0, 1e-4, 0.01)
    with pytest.raises(ValueError):
        Tolerances(eps_gap=0.0)
