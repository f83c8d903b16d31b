"""One test per acceptance criterion. Each prints a single PASS/FAIL line."""

import hashlib
import random
import time
from dataclasses import replace

import httpx
import pytest

import conftest
from conftest import FIXTURES, random_scene
from generators import bundled_layouts, jittered_fixtures, relation_case
from oracles import naive_collision_count
from roomweave import gateway as gw_mod
from roomweave.catalog import default_catalog
from roomweave.cli import main
from roomweave.executor import enforce_relation, run_optimizer
from roomweave.gateway import Gateway, GatewayConfig, LlmScorer
from roomweave.geometry import DEFAULT_TOL, check_relation
from roomweave.metrics import PerceptualScores, heuristic_score, physical_metrics
from roomweave.planner import (
    LlmPlanBackend,
    PlannerConfig,
    Proposal,
    ScriptedBackend,
    classes_for_score_trace,
    initial_scene,
    run_loop,
)
from roomweave.render import render_topdown
from roomweave.scene import ROOM, RelationType, SceneDelta, SceneObject, parse_scene, serialize_scene
from roomweave.toolkit import ToolCard, ToolEnv, ToolOutcome
from roomweave.tools import default_registry

# pinned limits
ORACLE_SCENES, ORACLE_BUDGET_S = 1000, 10.0
LOOP_RUNS, LOOP_BUDGET_S = 10, 5.0
JITTER_CASES, MIN_CONVERGED, MAX_MEAN_SWEEPS = 100, 95, 10.0
PLACEMENTS = 100
PAIRS = 200


def verdict(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_01_collision_count_matches_oracle():
    rng = random.Random(2024)
    scenes = [random_scene(rng, rng.randint(2, 50), flat=bool(k % 2)) for k in range(ORACLE_SCENES)]
    t0 = time.perf_counter()
    got = [physical_metrics(s).collision_pairs for s in scenes]
    elapsed = time.perf_counter() - t0
    want = [naive_collision_count(s.objects) for s in scenes]
    bad = sum(g != w for g, w in zip(got, want))
    verdict(1, bad == 0 and elapsed < ORACLE_BUDGET_S,
            f"{bad} mismatches over {ORACLE_SCENES} scenes, {sum(want)} pairs, {elapsed:.2f} s")


@pytest.fixture(scope="module")
def scripted_runs():
    reg = default_registry()
    runs = []
    for room in ("bedroom", "living room"):
        for seed in range(LOOP_RUNS):
            q = f"Design me a {room}"
            t0 = time.perf_counter()
            res = run_loop(q, reg, env=ToolEnv(seed=seed, query=q))
            runs.append((room, seed, res, time.perf_counter() - t0))
    return runs


def test_02_scripted_runs_have_no_violations(scripted_runs):
    bad = []
    for room, seed, res, secs in scripted_runs:
        pm = physical_metrics(res.final)
        if pm.out_of_boundary or pm.collision_pairs or secs >= LOOP_BUDGET_S:
            bad.append(f"{room}/{seed}: ob {pm.out_of_boundary} cn {pm.collision_pairs} {secs:.2f} s")
    slowest = max(r[3] for r in scripted_runs)
    verdict(2, not bad, f"{len(scripted_runs)} runs, slowest {slowest:.2f} s" + (f"; {bad}" if bad else ""))


def test_03_optimizer_converges_on_jittered_fixtures():
    fixtures = jittered_fixtures(JITTER_CASES, seed=0)
    results = [run_optimizer(s) for s in fixtures]
    converged = sum(r.residual.violations == 0 for r in results)
    mean = sum(r.sweeps for r in results) / len(results)
    verdict(3, converged >= MIN_CONVERGED and mean <= MAX_MEAN_SWEEPS,
            f"{converged}/{JITTER_CASES} converged, mean sweeps {mean:.2f}")


def test_04_relation_round_trip():
    fails = []
    for k, rel in enumerate(RelationType):
        rng = random.Random(1000 + k)
        for _ in range(PLACEMENTS):
            s = enforce_relation(relation_case(rng, rel), "c")
            c = s.get("c")
            parent = ROOM if c.parent == ROOM else s.get(c.parent)
            if not check_relation(c, parent, rel, s.room, DEFAULT_TOL):
                fails.append(rel.value)
    n = len(RelationType) * PLACEMENTS
    verdict(4, len(RelationType) == 10 and not fails,
            f"{len(fails)} failures over {n} placements" + (f" ({sorted(set(fails))})" if fails else ""))


def test_05_score_trace_reproduces_tool_classes():
    reg = default_registry()
    s = initial_scene("Design me a bedroom")
    from roomweave.toolkit import ToolInvocation, invoke
    from roomweave.executor import execute
    out = invoke(reg, ToolInvocation("init_pretrained", "", 1), s, None, ToolEnv())
    scene = execute(s, out.delta)[0]
    scores = [(6, 6, 5, 4), (7, 6, 5, 4), (8, 7, 6, 6), (8, 7, 8, 6), (8, 7, 8, 8)]
    want = ["initializer", "implementer", "refiner", "refiner", "implementer"]
    got = classes_for_score_trace(reg, scores, scene)
    verdict(5, got == want, f"got {got}")


class LowScorer:
    def score(self, scene, view=None, query=""):
        return PerceptualScores(3, 3, 3, 3)


class NeverStops:
    """Offers every local tool at every step and never asks to stop; records
    the memory size at each decision."""

    def __init__(self):
        self.sizes = []

    def propose(self, query, registry, memory, v_prev, scene):
        self.sizes.append(len(memory.entries))
        fresh = not scene.objects
        ids = [c.tool_id for c in registry.cards()
               if not c.requires_llm and (c.tool_class == "initializer") == fresh]
        return Proposal("keep going", [(t, 0.5, "completion") for t in ids], {t: "improve" for t in ids})


def test_06_loop_bounds_and_memory_length():
    cfg = PlannerConfig()
    backend = NeverStops()
    res = run_loop("Design me a bedroom", default_registry(), cfg=cfg, backend=backend, scorer=LowScorer())
    ok = (cfg.max_iterations == 10 and cfg.memory_length == 1 and len(res.steps) == 10
          and max(backend.sizes) <= 1)
    verdict(6, ok, f"{len(res.steps)} steps ({res.stop_reason}), max memory {max(backend.sizes)}")


def _wipe(s, inv, gateway, env):
    return ToolOutcome(SceneDelta(removes=tuple(o.id for o in s.objects)), narrative="cleared the room")


class WipeFirst:
    """Initialize, then always rank the destroying tool on top."""

    def __init__(self):
        self.memories = []

    def propose(self, query, registry, memory, v_prev, scene):
        self.memories.append((dict(memory.multipliers), set(memory.suppressed)))
        if not scene.objects:
            return Proposal("empty", [("init_pretrained", 0.9, "completion")], {"init_pretrained": "start"})
        return Proposal("wipe it", [("wipe", 0.95, "layout"), ("add_tabletop_visual", 0.3, "completion")],
                        {"wipe": "clear", "add_tabletop_visual": "dress tables"})


def test_07_rollback_and_confidence_decay():
    reg = default_registry()
    reg.register(ToolCard("wipe", "refiner", "removes every object"), _wipe)
    backend = WipeFirst()
    res = run_loop("Design me a bedroom", reg, cfg=PlannerConfig(max_iterations=4), backend=backend)
    s2, s3, s4 = res.steps[1], res.steps[2], res.steps[3]
    rolled = (s2.decision.chosen == "wipe" and s2.rolled_back
              and serialize_scene(s2.working_scene) == serialize_scene(s2.scene_before))
    after_one = backend.memories[2][0].get("wipe")
    excluded = s3.decision.chosen == "wipe" and "wipe" not in [t for t, _ in s4.decision.candidates]
    verdict(7, rolled and after_one == 0.5 and excluded,
            f"rolled back {rolled}, multiplier after one failure {after_one}, "
            f"excluded after two {excluded} (step 4 ran {s4.decision.chosen})")


def _clean_bases():
    out = []
    for s in bundled_layouts() + jittered_fixtures(40, seed=5):
        r = run_optimizer(s)
        if r.residual.violations == 0 and not r.scene.objects == ():
            out.append(r.scene)
    return out


def _inject_collision(s, rng):
    floor = [o for o in s.objects if o.parent == ROOM and o.relation is None or o.parent == ROOM]
    before = physical_metrics(s)
    for _ in range(200):
        host = rng.choice(floor)
        dx, dy = (rng.uniform(-0.2, 0.2) for _ in range(2))
        x = min(max(host.location[0] + dx, 0.3), s.room.width - 0.3)
        y = min(max(host.location[1] + dy, 0.3), s.room.depth - 0.3)
        new = SceneObject("injected_0", "trash can", (x, y, 0.2), rng.uniform(0, 360), (0.3, 0.3, 0.4))
        t = s.with_objects(s.objects + (new,))
        pm = physical_metrics(t)
        if pm.collision_pairs == before.collision_pairs + 1 and pm.out_of_boundary == before.out_of_boundary:
            return t
    return None


def _add_supported(s, rng, catalog):
    hosts = [o for o in s.objects if catalog.class_of(o.category) == "supporter"]
    before = physical_metrics(s)
    for _ in range(200):
        if not hosts:
            return None
        host = rng.choice(hosts)
        cat = rng.choice(["cup", "book", "vase", "candle", "remote", "mug"])
        size = catalog.size_of(cat)
        new = SceneObject("added_0", cat, host.location, rng.uniform(0, 360), size,
                          parent=host.id, relation=RelationType.ON_TOP)
        t = enforce_relation(s.with_objects(s.objects + (new,)), "added_0")
        o = t.get("added_0")
        if (check_relation(o, t.get(host.id), RelationType.ON_TOP, t.room, DEFAULT_TOL)
                and physical_metrics(t).violations == before.violations):
            return t
    return None


def test_08_heuristic_scorer_monotonicity():
    rng = random.Random(88)
    catalog = default_catalog()
    bases = _clean_bases()
    layout_up = completion_down = made_c = made_s = 0
    k = 0
    while (made_c < PAIRS or made_s < PAIRS) and k < 20 * PAIRS:
        s = bases[k % len(bases)]
        k += 1
        before = heuristic_score(s, catalog)
        if made_c < PAIRS:
            t = _inject_collision(s, rng)
            if t is not None:
                made_c += 1
                layout_up += heuristic_score(t, catalog).layout > before.layout
        if made_s < PAIRS:
            t = _add_supported(s, rng, catalog)
            if t is not None:
                made_s += 1
                completion_down += heuristic_score(t, catalog).completion < before.completion
    verdict(8, made_c == PAIRS and made_s == PAIRS and layout_up == 0 and completion_down == 0,
            f"{made_c} collision pairs: layout rose {layout_up}x; "
            f"{made_s} support pairs: completion fell {completion_down}x")


def _digest(d):
    return {p.relative_to(d).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(d.rglob("*")) if p.is_file()}


def test_09_generate_is_bit_reproducible(tmp_path, capsys):
    mock = FIXTURES / "mock_bedroom"
    codes = []
    for name in ("a", "b"):
        codes.append(main(["generate", "--query", "Design me a bedroom", "--out", str(tmp_path / name),
                           "--seed", "11", "--backend", "scripted", "--transport", f"mock:{mock}"]))
    capsys.readouterr()
    a, b = _digest(tmp_path / "a"), _digest(tmp_path / "b")
    verdict(9, codes == [0, 0] and a == b and len(a) > 3, f"exit codes {codes}, {len(a)} files, equal {a == b}")


def test_10_round_trip_and_svg_groups(scripted_runs):
    import xml.etree.ElementTree as ET
    ns = {"svg": "http://www.w3.org/2000/svg"}
    fixtures = bundled_layouts(max_objects=10_000) + jittered_fixtures(20, seed=3)
    trip_bad = 0
    for s in fixtures:
        back = parse_scene(serialize_scene(s))
        trip_bad += (back != s) or serialize_scene(back) != serialize_scene(s)
    group_bad = checked = 0
    for _room, _seed, res, _secs in scripted_runs:
        for r in res.steps:
            for scene in (r.scene_after, r.working_scene):
                root = ET.fromstring(render_topdown(scene).content)
                checked += 1
                group_bad += len(root.findall("svg:g[@class='object']", ns)) != len(scene.objects)
    verdict(10, trip_bad == 0 and group_bad == 0,
            f"{trip_bad} round-trip mismatches over {len(fixtures)} fixtures, "
            f"{group_bad} SVG count mismatches over {checked} renders")


def test_11_mock_gateway_loop_is_isolated(monkeypatch):
    hits = []

    def sentinel(*args, **kwargs):
        hits.append(args)
        raise AssertionError("network contact")

    monkeypatch.setattr(gw_mod.LiveTransport, "send", sentinel)
    monkeypatch.setattr(httpx.Client, "send", sentinel)
    monkeypatch.setattr(httpx.HTTPTransport, "handle_request", sentinel)
    gw = Gateway(GatewayConfig(transport=f"mock:{FIXTURES / 'mock_bedroom'}"))
    q = "Design me a bedroom"
    res = run_loop(q, default_registry(), backend=LlmPlanBackend(gw), scorer=LlmScorer(gw), gateway=gw,
                   env=ToolEnv(query=q))
    pm = physical_metrics(res.final)
    calls = len(gw.transport.requests)
    ok = not hits and calls > 0 and pm.out_of_boundary == 0 and pm.collision_pairs == 0 and res.steps
    verdict(11, bool(ok), f"{len(res.steps)} steps, {calls} recorded replies, {len(hits)} network hits, "
                          f"ob {pm.out_of_boundary} cn {pm.collision_pairs} ({res.stop_reason})")
