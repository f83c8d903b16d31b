import io
import math
import xml.etree.ElementTree as ET

import pytest
from PIL import Image

from roomweave.geometry import footprint_corners
from roomweave.render import MARGIN_PX, raster_size, rasterize_for_prompt, render_topdown
from roomweave.scene import RoomBounds, Scene, SceneObject

NS = {"svg": "http://www.w3.org/2000/svg"}


def parse(view):
    return ET.fromstring(view.content)


def groups(root):
    return root.findall("svg:g[@class='object']", NS)


def test_empty_room():
    root = parse(render_topdown(Scene(RoomBounds(5, 4, 3))))
    assert len(root.findall("svg:rect[@class='room']", NS)) == 1
    assert len(root.findall("svg:g[@id='axes']", NS)) == 1
    assert groups(root) == []


def test_one_object_one_glyph(bedroom):
    view = render_topdown(bedroom)
    root = parse(view)
    (g,) = groups(root)
    assert g.get("id") == "obj-bed_0"
    assert len(g.findall("svg:polygon", NS)) == 1
    assert len(g.findall("svg:line[@class='arrow']", NS)) == 1
    (label,) = g.findall("svg:text", NS)
    assert label.text == "double bed (z=0.30)"
    assert view.element_ids == ["obj-bed_0"]


def test_polygon_matches_footprint(bedroom):
    view = render_topdown(bedroom, scale=80)
    poly = groups(parse(view))[0].find("svg:polygon", NS)
    pts = [tuple(map(float, p.split(","))) for p in poly.get("points").split()]
    D = bedroom.room.depth
    for (x, y), (px, py) in zip(footprint_corners(bedroom.objects[0]), pts):
        assert px == pytest.approx(MARGIN_PX + x * 80, abs=0.01)
        assert py == pytest.approx(MARGIN_PX + (D - y) * 80, abs=0.01)


def _arrow_dir(scene):
    line = groups(parse(render_topdown(scene)))[0].find("svg:line", NS)
    dx = float(line.get("x2")) - float(line.get("x1"))
    dy = -(float(line.get("y2")) - float(line.get("y1")))
    return math.degrees(math.atan2(dy, dx))


def test_arrow_rotates_with_yaw():
    room = RoomBounds(5, 4, 3)
    a = Scene(room, (SceneObject("c", "chair", (2, 2, 0.45), 0.0, (0.5, 0.5, 0.9)),))
    b = Scene(room, (SceneObject("c", "chair", (2, 2, 0.45), 90.0, (0.5, 0.5, 0.9)),))
    assert _arrow_dir(a) == pytest.approx(90.0)
    assert (_arrow_dir(b) - _arrow_dir(a)) % 360 == pytest.approx(90.0)


def test_objects_sorted_by_id():
    room = RoomBounds(5, 4, 3)
    objs = tuple(SceneObject(i, "box", (1 + k, 1, 0.5), 0, (0.5, 0.5, 1)) for k, i in
                 enumerate(["zeta", "alpha", "mid"]))
    assert render_topdown(Scene(room, objs)).element_ids == ["obj-alpha", "obj-mid", "obj-zeta"]


def test_svg_is_deterministic(bedroom):
    assert render_topdown(bedroom).content == render_topdown(bedroom).content


def test_png_size_and_determinism(bedroom):
    view = render_topdown(bedroom)
    png = rasterize_for_prompt(view)
    img = Image.open(io.BytesIO(png))
    assert img.size == raster_size(view)
    assert max(img.size) == 1024
    assert rasterize_for_prompt(view) == png


def test_png_of_empty_room():
    png = rasterize_for_prompt(render_topdown(Scene(RoomBounds(3, 3, 3))))
    assert Image.open(io.BytesIO(png)).format == "PNG"


def test_labels_are_escaped():
    s = Scene(RoomBounds(3, 3, 3), (SceneObject("a", "rock & roll <amp>", (1, 1, 0.5), 0, (1, 1, 1)),))
    root = parse(render_topdown(s))
    assert groups(root)[0].find("svg:text", NS).text.startswith("rock & roll <amp>")
