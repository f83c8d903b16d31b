import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from roomweave.scene import ROOM, RoomBounds, Scene, SceneMeta, SceneObject, quantize  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


def random_scene(rng: random.Random, n: int, room=(8.0, 8.0, 3.0), lo=0.1, hi=3.0, flat=True):
    """Free-standing boxes with uniform sizes in [lo, hi] and uniform yaw."""
    W, D, H = room
    objs = []
    for k in range(n):
        sx, sy, sz = (quantize(rng.uniform(lo, hi)) for _ in range(3))
        sz = min(sz, H)
        z = sz / 2 if flat else rng.uniform(0, H)
        objs.append(SceneObject(
            f"box_{k}", "box",
            (quantize(rng.uniform(0, W)), quantize(rng.uniform(0, D)), quantize(z)),
            quantize(rng.uniform(0, 360)), (sx, sy, sz),
        ))
    return Scene(RoomBounds(W, D, H, "room"), tuple(objs), SceneMeta())


@pytest.fixture
def bedroom():
    """One bed with its back on wall y=0."""
    bed = SceneObject("bed_0", "double bed", (2.5, 1.0, 0.3), 0.0, (1.6, 2.0, 0.6),
                      ROOM, None)
    return Scene(RoomBounds(5.0, 4.0, 3.0, "bedroom"), (bed,), SceneMeta("Design me a bedroom"))


@pytest.fixture
def mock_dir():
    return FIXTURES / "mock_bedroom"


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
