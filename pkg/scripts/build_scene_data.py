"""Regenerate the bundled library and pre-generated layouts.

Each layout is written as rough placements plus relations; the executor
snaps them into place, and a layout is only saved if the result has no
collisions, no boundary violations and every relation holds.

    python3 scripts/build_scene_data.py
"""

from __future__ import annotations

import sys
from pathlib import Path

from roomweave.catalog import default_catalog, room_type_info
from roomweave.executor import execute
from roomweave.metrics import physical_metrics, relation_failures
from roomweave.scene import RoomBounds, Scene, SceneDelta, SceneMeta, SceneObject, serialize_scene
from roomweave.tools import IdPool

DATA = Path(__file__).resolve().parents[1] / "src" / "roomweave" / "data"

W, SW, F = "against_wall", "side_against_wall", "front_against"


def build(room_type: str, items, source: str) -> Scene:
    """items: (category, x, y, yaw, relation, parent index or None)."""
    catalog = default_catalog()
    w, d, h = room_type_info(room_type).size
    pool = IdPool(())
    objs = []
    for cat, x, y, yaw, rel, parent in items:
        size = catalog.size_of(cat)
        oid = pool.new(cat)
        z = size[2] / 2
        objs.append(SceneObject(oid, cat, (x, y, z), yaw, size,
                                parent=objs[parent].id if parent is not None else "room",
                                relation=rel, source=source))
    empty = Scene(RoomBounds(w, d, h, room_type), (), SceneMeta(f"Design me a {room_type}", 0))
    out, report = execute(empty, SceneDelta(adds=tuple(objs)), catalog)
    pm = physical_metrics(out)
    bad = relation_failures(out)
    if pm.violations or bad or report.infeasible:
        raise SystemExit(f"{room_type}/{source}: {pm} relations failing {bad} {report.infeasible}")
    return out


PRETRAINED = {
    "bedroom_0": ("bedroom", [
        ("double bed", 2.5, 1.0, 0, W, None),
        ("nightstand", 1.3, 0.2, 0, "side_by_side", 0),
        ("nightstand", 3.7, 0.2, 0, "side_by_side", 0),
        ("wardrobe", 4.7, 3.0, 90, W, None),
        ("desk", 1.0, 3.7, 180, W, None),
        ("chair", 1.0, 3.0, 0, F, 4),
        ("bookshelf", 0.15, 2.4, 270, W, None),
    ]),
    "bedroom_1": ("bedroom", [
        ("double bed", 1.0, 2.0, 270, W, None),
        ("nightstand", 0.2, 0.7, 270, "side_by_side", 0),
        ("nightstand", 0.2, 3.3, 270, "side_by_side", 0),
        ("wardrobe", 3.6, 3.7, 180, W, None),
        ("desk", 4.7, 1.2, 90, W, None),
        ("chair", 4.0, 1.2, 270, F, 4),
        ("dresser", 2.6, 0.25, 0, W, None),
    ]),
    "bedroom_2": ("bedroom", [
        ("double bed", 2.0, 3.0, 180, W, None),
        ("nightstand", 0.8, 3.8, 180, "side_by_side", 0),
        ("nightstand", 3.2, 3.8, 180, "side_by_side", 0),
        ("wardrobe", 4.2, 0.3, 0, W, None),
        ("dresser", 4.75, 2.4, 90, W, None),
        ("bookshelf", 0.15, 1.2, 270, W, None),
        ("plant", 2.3, 0.3, 0, None, None),
    ]),
    "living_room_0": ("living room", [
        ("sofa", 3.0, 0.45, 0, W, None),
        ("coffee table", 3.0, 1.6, 0, None, None),
        ("tv stand", 3.0, 4.8, 180, W, None),
        ("armchair", 1.1, 1.7, 270, F, 1),
        ("side table", 1.6, 0.3, 0, "side_by_side", 0),
        ("bookshelf", 5.85, 2.5, 90, W, None),
        ("floor lamp", 0.3, 4.6, 0, None, None),
        ("plant", 5.6, 4.6, 0, None, None),
    ]),
    "living_room_1": ("living room", [
        ("sofa", 0.45, 2.5, 270, W, None),
        ("coffee table", 1.7, 2.5, 90, None, None),
        ("tv stand", 5.8, 2.5, 90, W, None),
        ("armchair", 2.0, 0.8, 0, F, 1),
        ("armchair", 2.0, 4.2, 180, F, 1),
        ("bookshelf", 4.0, 4.85, 180, W, None),
        ("plant", 0.3, 0.3, 0, None, None),
    ]),
    "dining_room_0": ("dining room", [
        ("dining table", 2.5, 2.5, 0, None, None),
        ("dining chair", 2.5, 1.7, 0, F, 0),
        ("dining chair", 2.5, 3.3, 180, F, 0),
        ("dining chair", 1.3, 2.5, 270, F, 0),
        ("dining chair", 3.7, 2.5, 90, F, 0),
        ("cabinet", 2.5, 4.8, 180, W, None),
        ("display cabinet", 4.8, 2.5, 90, W, None),
        ("plant", 0.3, 0.3, 0, None, None),
    ]),
    "dining_room_1": ("dining room", [
        ("dining table", 2.3, 2.5, 90, None, None),
        ("dining chair", 1.5, 2.5, 270, F, 0),
        ("dining chair", 3.1, 2.5, 90, F, 0),
        ("dining chair", 2.3, 1.3, 0, F, 0),
        ("dining chair", 2.3, 3.7, 180, F, 0),
        ("console table", 4.8, 2.5, 90, W, None),
        ("cabinet", 2.5, 0.2, 0, W, None),
    ]),
}

LIBRARY = {
    "bedroom": ("bedroom", [
        ("double bed", 2.5, 1.0, 0, W, None),
        ("nightstand", 1.3, 0.2, 0, "side_by_side", 0),
        ("nightstand", 3.7, 0.2, 0, "side_by_side", 0),
        ("wardrobe", 4.7, 3.0, 90, W, None),
        ("dresser", 1.2, 3.75, 180, W, None),
        ("bookshelf", 0.15, 2.2, 270, W, None),
        ("plant", 4.7, 0.3, 0, None, None),
    ]),
    "living_room": ("living room", PRETRAINED["living_room_0"][1]),
    "dining_room": ("dining room", PRETRAINED["dining_room_0"][1]),
    "office": ("office", [
        ("desk", 1.5, 4.7, 180, W, None),
        ("office chair", 1.5, 3.9, 0, F, 0),
        ("desk", 4.0, 4.7, 180, W, None),
        ("office chair", 4.0, 3.9, 0, F, 2),
        ("bookshelf", 0.15, 2.0, 270, W, None),
        ("cabinet", 5.8, 1.5, 90, W, None),
        ("whiteboard", 3.0, 0.05, 0, W, None),
        ("plant", 5.6, 4.6, 0, None, None),
    ]),
    "kitchen": ("kitchen", [
        ("kitchen counter", 1.3, 3.7, 180, W, None),
        ("stove", 2.8, 3.7, 180, W, None),
        ("refrigerator", 4.15, 3.4, 90, W, None),
        ("kitchen cabinet", 0.3, 1.4, 270, W, None),
        ("kitchen island", 2.2, 1.8, 0, None, None),
        ("stool", 1.8, 1.1, 0, F, 4),
        ("stool", 2.6, 1.1, 0, F, 4),
    ]),
    "bathroom": ("bathroom", [
        ("bathtub", 0.4, 1.6, 0, SW, None),
        ("toilet", 1.7, 0.35, 0, W, None),
        ("vanity", 3.25, 1.4, 90, W, None),
        ("bathroom cabinet", 2.5, 2.8, 180, W, None),
        ("trash can", 2.4, 0.3, 0, None, None),
    ]),
    "restaurant": ("restaurant", [
        *[item for tx in (2.8, 5.3, 7.8) for ty in (1.8, 4.0, 6.2) for item in (
            ("restaurant table", tx, ty, 0, None, None),
        )],
        ("reception desk", 0.35, 6.5, 270, W, None),
        ("display cabinet", 5.0, 7.8, 180, W, None),
        ("plant", 0.3, 0.3, 0, None, None),
        ("plant", 9.7, 0.3, 0, None, None),
    ]),
    "gym": ("gym", [
        ("treadmill", 1.0, 5.1, 180, W, None),
        ("treadmill", 2.2, 5.1, 180, W, None),
        ("treadmill", 3.4, 5.1, 180, W, None),
        ("exercise bike", 1.0, 0.6, 0, W, None),
        ("exercise bike", 2.0, 0.6, 0, W, None),
        ("exercise bike", 3.0, 0.6, 0, W, None),
        ("weight bench", 5.5, 3.0, 0, None, None),
        ("rowing machine", 7.0, 1.0, 90, W, None),
        ("storage rack", 7.75, 4.5, 90, W, None),
        ("water dispenser", 4.6, 5.8, 180, W, None),
    ]),
    "meeting_room": ("meeting room", [
        ("meeting table", 3.5, 2.5, 0, None, None),
        *[("office chair", x, y, yaw, None, None) for x in (2.5, 3.5, 4.5)
          for y, yaw in ((1.5, 0), (3.5, 180))],
        ("whiteboard", 0.05, 2.5, 270, W, None),
        ("cabinet", 6.8, 2.5, 90, W, None),
        ("plant", 6.7, 4.7, 0, None, None),
    ]),
    "classroom": ("classroom", [
        ("whiteboard", 4.0, 6.95, 180, W, None),
        ("desk", 4.0, 5.8, 0, None, None),
        ("chair", 4.0, 6.5, 180, F, 1),
        *[("desk", x, y, 180, None, None) for x in (1.8, 4.0, 6.2) for y in (1.5, 3.5)],
        ("bookshelf", 0.15, 5.5, 270, W, None),
    ]),
    "children_room": ("children room", [
        ("single bed", 0.5, 1.2, 0, SW, None),
        ("kids desk", 2.5, 4.2, 180, W, None),
        ("chair", 2.5, 3.5, 0, F, 1),
        ("toy shelf", 4.8, 2.5, 90, W, None),
        ("toy chest", 2.6, 0.25, 0, W, None),
        ("play mat", 3.0, 2.0, 0, None, None),
    ]),
    "waiting_room": ("waiting room", [
        ("reception desk", 3.0, 4.6, 180, W, None),
        *[("chair", 0.25, y, 270, W, None) for y in (1.0, 1.6, 2.2, 2.8)],
        *[("chair", x, 0.25, 0, W, None) for x in (2.0, 2.6, 3.2, 3.8)],
        ("coffee table", 1.5, 1.6, 90, None, None),
        ("water dispenser", 5.8, 0.2, 0, W, None),
        ("plant", 5.7, 4.7, 0, None, None),
    ]),
    "laundry_room": ("laundry room", [
        ("washing machine", 0.8, 2.7, 180, W, None),
        ("dryer", 1.5, 2.7, 180, W, None),
        ("storage rack", 3.25, 1.5, 90, W, None),
        ("cabinet", 0.2, 1.0, 270, W, None),
    ]),
    "hotel": ("hotel", [
        ("double bed", 2.5, 1.0, 0, W, None),
        ("nightstand", 1.3, 0.2, 0, "side_by_side", 0),
        ("nightstand", 3.7, 0.2, 0, "side_by_side", 0),
        ("wardrobe", 4.7, 3.5, 90, W, None),
        ("desk", 1.2, 4.2, 180, W, None),
        ("chair", 1.2, 3.5, 0, F, 4),
        ("armchair", 3.0, 3.6, 180, None, None),
    ]),
}


def main() -> int:
    for folder, table in (("pretrained", PRETRAINED), ("library", LIBRARY)):
        out_dir = DATA / folder
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, (rt, items) in table.items():
            scene = build(rt, items, "init_pretrained" if folder == "pretrained" else "init_library")
            (out_dir / f"{name}.json").write_bytes(serialize_scene(scene))
            print(f"{folder}/{name}: {len(scene.objects)} objects")
    return 0


if __name__ == "__main__":
    sys.exit(main())
