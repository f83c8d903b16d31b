"""Self-reflective planning loop.

Each step the planner ranks every registered tool, the chosen tool proposes a
delta, the executor applies it, and the new scene is reviewed. A step that
makes things clearly worse is rolled back, and tools that keep failing lose
confidence until the planner stops picking them.
"""

from __future__ import annotations

import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Any, Iterator, Protocol, Sequence

from .catalog import AssetCatalog, category_matches, default_catalog, infer_room_type, room_type_info
from .executor import ExecutionReport, OptimConfig, execute
from .geometry import DEFAULT_TOL, Tolerances, relation_holds
from .metrics import (
    CRITERIA,
    PerceptualScores,
    Reflection,
    Scorer,
    perceptual_scores,
    physical_metrics,
    relation_failures,
    suggestions,
)
from .render import render_topdown
from .scene import (
    ROOM,
    DeltaError,
    RoomBounds,
    Scene,
    SceneMeta,
    SceneValidationError,
)
from .toolkit import Registry, ToolEnv, ToolInvocation, ToolOutcome, invoke, render_cards

log = logging.getLogger(__name__)

TIE_ORDER = ("physical", "completion", "layout", "realism", "functionality")
SUMMARY_LIMIT = 2000


class PlanningError(RuntimeError):
    pass


class LoopError(RuntimeError):
    """Unrecoverable failure inside the loop; ``steps`` holds the partial trace."""

    def __init__(self, message: str, steps: list, scene: Scene):
        super().__init__(message)
        self.steps = steps
        self.scene = scene


@dataclass(frozen=True)
class PlannerConfig:
    max_iterations: int = 10
    memory_length: int = 1
    stop_threshold: int = 8
    confidence_decay: float = 0.5
    rollback_drop: float = 2.0
    max_rollbacks: int = 3

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.memory_length < 1:
            raise ValueError("memory_length must be >= 1")
        if not 0 <= self.stop_threshold <= 10:
            raise ValueError("stop_threshold must be in [0, 10]")
        if not 0.0 < self.confidence_decay < 1.0:
            raise ValueError("confidence_decay must be in (0, 1)")
        if not self.rollback_drop > 0:
            raise ValueError("rollback_drop must be positive")

    def to_dict(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "memory_length": self.memory_length,
            "stop_threshold": self.stop_threshold,
            "confidence_decay": self.confidence_decay,
            "rollback_drop": self.rollback_drop,
            "max_rollbacks": self.max_rollbacks,
        }


@dataclass(frozen=True)
class MemoryEntry:
    invocation: ToolInvocation
    scene_summary: str
    reflection: Reflection


@dataclass
class Memory:
    length: int = 1
    entries: deque = field(default_factory=deque)
    multipliers: dict[str, float] = field(default_factory=dict)
    streak: dict[str, int] = field(default_factory=dict)
    suppressed: set[str] = field(default_factory=set)

    def __post_init__(self):
        self.entries = deque(self.entries, maxlen=self.length)

    def multiplier(self, tool_id: str) -> float:
        return self.multipliers.get(tool_id, 1.0)

    def push(self, entry: MemoryEntry) -> None:
        self.entries.append(entry)

    def render(self) -> str:
        if not self.entries:
            return "(no previous steps)"
        parts = []
        for e in self.entries:
            r = e.reflection
            p = r.perceptual
            parts.append(
                f"step {r.step}: {e.invocation.tool_id} ({e.invocation.instruction or 'no instruction'})\n"
                f"{e.scene_summary}\n"
                f"review: realism {p.realism}, functionality {p.functionality}, layout {p.layout}, "
                f"completion {p.completion}; suggestions: {'; '.join(r.suggestions)}"
            )
        return "\n\n".join(parts)


@dataclass(frozen=True)
class PlanDecision:
    problem_summary: str
    candidates: tuple[tuple[str, float], ...]
    chosen: str | None
    instruction: str
    stop: bool
    rationale: str = ""
    target: str | None = None

    def __post_init__(self):
        if not self.stop:
            if self.chosen is None:
                raise ValueError("a non-stop decision must choose a tool")
            if self.chosen not in [c for c, _ in self.candidates]:
                raise ValueError("chosen tool must be among the candidates")
        confs = [c for _, c in self.candidates]
        if confs != sorted(confs, reverse=True):
            raise ValueError("candidates must be sorted by confidence")

    def to_dict(self) -> dict:
        return {
            "problem_summary": self.problem_summary,
            "candidates": [[t, c] for t, c in self.candidates],
            "chosen": self.chosen,
            "instruction": self.instruction,
            "stop": self.stop,
            "rationale": self.rationale,
            "target": self.target,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlanDecision":
        return cls(d["problem_summary"], tuple((t, float(c)) for t, c in d["candidates"]),
                   d["chosen"], d["instruction"], d["stop"], d.get("rationale", ""),
                   d.get("target"))


@dataclass
class StepRecord:
    step: int
    decision: PlanDecision
    outcome: ToolOutcome
    scene_before: Scene
    scene_after: Scene
    reflection: Reflection
    rolled_back: bool = False
    reflection_before: Reflection | None = None
    report: ExecutionReport | None = None

    @property
    def working_scene(self) -> Scene:
        """The scene the loop holds after this step."""
        return self.scene_before if self.rolled_back else self.scene_after


@dataclass
class Proposal:
    """What a backend suggests before the planner applies memory."""

    problem: str
    candidates: list[tuple[str, float, str | None]]
    instructions: dict[str, str] = field(default_factory=dict)
    stop: bool = False
    rationale: str = ""


class PlanBackend(Protocol):
    def propose(self, query: str, registry: Registry, memory: Memory,
                v_prev: Reflection | None, scene: Scene) -> Proposal:
        ...


# --------------------------------------------------------------------------
# scripted backend

def _scene_facts(scene: Scene, catalog: AssetCatalog, tol: Tolerances = DEFAULT_TOL) -> dict:
    info = room_type_info(scene.room.room_type)
    busy = {o.parent for o in scene.objects if o.relation is not None and o.relation.is_support}
    empty_supporters = [o.id for o in scene.objects
                        if catalog.class_of(o.category) == "supporter" and o.id not in busy]
    empty_containers = [o.id for o in scene.objects
                        if catalog.class_of(o.category) == "container" and o.id not in busy]
    loose = [o.id for o in scene.objects
             if o.parent == ROOM and o.relation is None
             and catalog.class_of(o.category) != "small-object"]
    cats = [o.category for o in scene.objects]
    missing = [e for e in info.essential if not any(category_matches(c, e) for c in cats)]
    odd = [o.id for o in scene.objects if any(category_matches(o.category, x) for x in info.incongruous)]
    crowd = info.crowd[0] if info.crowd else None
    crowdable = False
    if crowd is not None:
        if catalog.class_of(crowd) == "small-object":
            crowdable = bool(empty_containers or empty_supporters)
        else:
            crowdable = True
    return {
        "room_type": scene.room.room_type,
        "empty_supporters": empty_supporters,
        "loose": loose,
        "missing": missing,
        "odd": odd,
        "crowd": crowd,
        "crowdable": crowdable,
        "bad_relations": relation_failures(scene, tol),
    }


def _affinities(target: str, f: dict) -> dict[str, float]:
    if target == "physical":
        return {"update_layout": 1.0, "remove_object": 0.9}
    if target == "completion":
        return {
            "add_tabletop_visual": 1.0 if f["empty_supporters"] else 0.0,
            "add_objects_llm": 0.6,
            "add_crowd": 0.5 if f["crowdable"] else 0.0,
        }
    if target == "realism":
        return {
            "add_crowd": 0.8 if f["crowdable"] else 0.0,
            "add_objects_llm": 0.7,
            "add_tabletop_visual": 0.6 if f["empty_supporters"] else 0.0,
            "remove_object": 0.9 if f["odd"] else 0.0,
        }
    if target == "functionality":
        return {
            "add_objects_llm": 0.8,
            "add_crowd": 0.5 if f["crowdable"] else 0.0,
            "add_tabletop_visual": 0.3 if f["empty_supporters"] else 0.0,
        }
    return {
        "add_relation": 1.0 if f["loose"] else 0.0,
        "update_rotation": 1.0 if f["bad_relations"] else 0.0,
        "update_layout": 0.8,
        "remove_object": 0.6,
        "update_size": 0.5,
    }


def _instruction(tool: str, target: str | None, f: dict, query: str) -> str:
    rt = f["room_type"]
    if tool == "add_tabletop_visual":
        return "arrange related small items on " + ", ".join(f["empty_supporters"])
    if tool == "add_crowd":
        return f"add more {f['crowd']}" if f["crowd"] else "add repeated furniture"
    if tool == "add_objects_llm":
        if target == "functionality" and f["missing"]:
            return "add the missing " + ", ".join(f["missing"])
        return f"add objects a real {rt} would have, on the floor, on tables and in shelves"
    if tool == "remove_object":
        if f["odd"]:
            return "remove " + ", ".join(f["odd"])
        return "remove objects that collide with others or block the room"
    if tool == "add_relation":
        return "give a wall or facing relation to " + ", ".join(f["loose"][:8])
    if tool == "update_rotation":
        return "turn objects to satisfy their relations: " + ", ".join(f["bad_relations"][:8])
    if tool == "update_layout":
        return "move objects apart and away from the walls they cross"
    if tool == "update_size":
        return "fix objects whose size is implausible"
    return query


class ScriptedBackend:
    """Deterministic lowest-score-first policy.

    Every tool's confidence is the best, over review targets, of
    ``urgency(target) * affinity(tool, target)``, where urgency is
    ``(10 - score) / 10`` for a perceptual criterion and 1 for physical
    violations. Affinities depend on what the current scene offers (empty
    supporters, loose furniture, missing essentials).
    """

    policy = "lowest-score-first"

    def __init__(self, catalog: AssetCatalog | None = None, tol: Tolerances = DEFAULT_TOL):
        self.catalog = catalog or default_catalog()
        self.tol = tol

    def propose(self, query: str, registry: Registry, memory: Memory,
                v_prev: Reflection | None, scene: Scene) -> Proposal:
        if not scene.objects or v_prev is None:
            rt = scene.room.room_type
            base = {"init_pretrained": 0.9, "init_library": 0.8, "init_llm": 0.7}
            cands = [(t, c, "initialize") for t, c in base.items() if t in registry]
            for card in registry.cards():
                if card.tool_class == "initializer" and card.tool_id not in base:
                    cands.append((card.tool_id, 0.6, "initialize"))
            instr = f"create a complete {rt} for: {query}"
            return Proposal(f"no layout yet for a {rt}", cands,
                            {t: instr for t, _c, _g in cands}, rationale="start from an initializer")

        f = _scene_facts(scene, self.catalog, self.tol)
        urgency: dict[str, float] = {}
        if v_prev.physical.violations > 0:
            urgency["physical"] = 1.0
        for c in ("completion", "layout", "realism", "functionality"):
            urgency[c] = (10 - getattr(v_prev.perceptual, c)) / 10.0
        best: dict[str, tuple[float, int, str]] = {}
        for rank, target in enumerate(TIE_ORDER):
            if target not in urgency:
                continue
            for tool, aff in _affinities(target, f).items():
                if tool not in registry or aff <= 0:
                    continue
                conf = urgency[target] * aff
                if tool not in best or conf > best[tool][0] + 1e-12:
                    best[tool] = (conf, rank, target)
        cands = [(t, conf, target) for t, (conf, _r, target) in best.items() if conf > 0]
        worst = min(("completion", "layout", "realism", "functionality"),
                    key=lambda c: (getattr(v_prev.perceptual, c), TIE_ORDER.index(c)))
        problem = (f"{v_prev.physical.violations} physical violations"
                   if "physical" in urgency else f"lowest score is {worst}")
        instr = {t: _instruction(t, target, f, query) for t, _c, target in cands}
        return Proposal(problem, cands, instr, rationale=f"targeting {worst}")


def scripted_backend(policy: str = "lowest-score-first", **kw) -> ScriptedBackend:
    if policy != "lowest-score-first":
        raise ValueError(f"unknown policy {policy!r}")
    return ScriptedBackend(**kw)


class LlmPlanBackend:
    """Asks the language model for a ranked plan."""

    def __init__(self, gateway):
        self.gateway = gateway

    def propose(self, query: str, registry: Registry, memory: Memory,
                v_prev: Reflection | None, scene: Scene) -> Proposal:
        from .scene import serialize_scene

        bindings = {
            "user_demand": query,
            "memory": memory.render(),
            "scene_layout": serialize_scene(scene).decode("utf-8"),
            "tool_metadata": render_cards(registry.cards()),
        }
        plan = self.gateway.ask("planner", bindings, "plan")
        target = plan["target"] if isinstance(plan["target"], str) else None
        cands = [(t, c, target) for t, c in plan["candidates"]]
        if plan["tool"] and plan["tool"] not in [c[0] for c in cands]:
            cands.append((plan["tool"], 0.5, target))
        instructions = {t: plan["instruction"] for t, _c, _g in cands}
        return Proposal(plan["problem"], cands, instructions, stop=plan["stop"],
                        rationale="language model plan")


# --------------------------------------------------------------------------
# planning

def meets_stop(v: Reflection | None, threshold: int) -> bool:
    if v is None:
        return False
    return min(v.perceptual.as_tuple()) >= threshold and v.physical.violations == 0


def plan_step(query: str, registry: Registry, memory: Memory, v_prev: Reflection | None,
              backend: PlanBackend, *, scene: Scene, cfg: PlannerConfig = PlannerConfig(),
              llm_available: bool = True) -> PlanDecision:
    """One ranked decision. Memory multipliers scale the backend's
    confidences; suppressed tools, tools needing an absent gateway and
    initializers that do not support the room type are dropped."""
    if len(registry) == 0:
        raise PlanningError("registry is empty")
    if meets_stop(v_prev, cfg.stop_threshold):
        p = v_prev.perceptual
        return PlanDecision(
            "no significant problem left", (), None, "", True,
            rationale=f"min score {min(p.as_tuple())} >= {cfg.stop_threshold} with no violations",
        )
    proposal = backend.propose(query, registry, memory, v_prev, scene)
    if proposal.stop:
        return PlanDecision(proposal.problem or "backend asked to stop", (), None, "", True,
                            rationale=proposal.rationale)
    order = {t: i for i, t in enumerate(registry.tool_ids)}
    scored = []
    fresh = not scene.objects and v_prev is None
    for tool, conf, target in proposal.candidates:
        if tool not in registry or tool in memory.suppressed:
            continue
        card = registry.card(tool)
        if card.requires_llm and not llm_available:
            continue
        if card.tool_class == "initializer" and not card.supports(scene.room.room_type):
            continue
        if fresh and card.tool_class != "initializer":
            continue
        eff = max(0.0, min(1.0, conf)) * memory.multiplier(tool)
        scored.append((eff, order[tool], tool, target))
    memory.suppressed.clear()
    if not scored:
        raise PlanningError("no applicable tool for this step")
    # equal confidence: fixed target order first, then registry order
    rank = {t: i for i, t in enumerate(TIE_ORDER)}
    scored.sort(key=lambda x: (-round(x[0], 9), rank.get(x[3], -1), x[1]))
    eff, _o, chosen, target = scored[0]
    cands = tuple((t, round(e, 6)) for e, _o, t, _g in scored)
    return PlanDecision(
        problem_summary=proposal.problem,
        candidates=cands,
        chosen=chosen,
        instruction=proposal.instructions.get(chosen, ""),
        stop=False,
        rationale=proposal.rationale,
        target=target,
    )


def _target_improved(target: str | None, before: Reflection | None, after: Reflection) -> bool:
    if before is None or target in (None, "initialize"):
        return True
    if target == "physical":
        return after.physical.violations < before.physical.violations
    return getattr(after.perceptual, target) > getattr(before.perceptual, target)


def step_failed(last: StepRecord) -> bool:
    before = last.reflection_before
    if last.outcome.failed or last.rolled_back:
        return True
    if before is not None and last.reflection.physical.violations > before.physical.violations:
        return True
    return not _target_improved(last.decision.target, before, last.reflection)


def update_confidence(m: Memory, last: StepRecord, cfg: PlannerConfig = PlannerConfig()) -> Memory:
    tool = last.decision.chosen
    if tool is None:
        return m
    if step_failed(last):
        m.multipliers[tool] = m.multiplier(tool) * cfg.confidence_decay
        m.streak[tool] = m.streak.get(tool, 0) + 1
        if m.streak[tool] >= 2:
            m.suppressed.add(tool)
    else:
        m.streak[tool] = 0
    return m


# --------------------------------------------------------------------------
# the loop

def summarize_scene(s: Scene, last_delta: str = "", limit: int = SUMMARY_LIMIT) -> str:
    counts = Counter(o.category for o in s.objects)
    pm = physical_metrics(s)
    text = (
        f"{s.room.room_type} {s.room.width}x{s.room.depth} m, objects {pm.obj_count}, "
        f"out of bounds {pm.out_of_boundary}, colliding pairs {pm.collision_pairs}; "
        + ", ".join(f"{n} x {c}" for c, n in sorted(counts.items()))
    )
    if last_delta:
        text += f"; last change: {last_delta}"
    return text[:limit]


def reflect(s: Scene, query: str, scorer: Scorer, step: int,
            catalog: AssetCatalog | None = None, tol: Tolerances = DEFAULT_TOL) -> Reflection:
    view = render_topdown(s)
    perc = perceptual_scores(s, view, query, scorer)
    return Reflection(physical_metrics(s, tol), perc, suggestions(s, catalog, tol), step)


def initial_scene(query: str, room_type: str | None = None) -> Scene:
    rt = room_type or infer_room_type(query)
    w, d, h = room_type_info(rt).size
    return Scene(RoomBounds(w, d, h, rt), (), SceneMeta(query=query, step=0))


@dataclass
class LoopResult:
    final: Scene
    steps: list[StepRecord]
    stop_reason: str
    initial: Scene

    def __iter__(self) -> Iterator[Any]:
        yield self.final
        yield self.steps


def run_loop(query: str, registry: Registry, catalog: AssetCatalog | None = None,
             cfg: PlannerConfig = PlannerConfig(), backend: PlanBackend | None = None,
             scorer: Scorer | None = None, *, gateway=None, env: ToolEnv | None = None,
             optim: OptimConfig = OptimConfig(), start: Scene | None = None) -> LoopResult:
    from .metrics import HeuristicScorer

    catalog = catalog or default_catalog()
    backend = backend or ScriptedBackend(catalog, optim.tol)
    scorer = scorer or HeuristicScorer(catalog, optim.tol)
    env = env or ToolEnv(catalog=catalog, query=query)
    scene = start if start is not None else initial_scene(query)
    first = scene
    v_prev = reflect(scene, query, scorer, scene.meta.step, catalog, optim.tol) if scene.objects else None
    memory = Memory(cfg.memory_length)
    steps: list[StepRecord] = []
    rollbacks = 0
    stop_reason = "max iterations reached"

    for t in range(1, cfg.max_iterations + 1):
        try:
            decision = plan_step(query, registry, memory, v_prev, backend, scene=scene, cfg=cfg,
                                 llm_available=gateway is not None)
        except PlanningError as exc:
            stop_reason = f"planner: {exc}"
            break
        except Exception as exc:
            raise LoopError(f"planning failed at step {t}: {exc}", steps, scene) from exc
        if decision.stop:
            stop_reason = "planner stop: " + decision.rationale
            break
        inv = ToolInvocation(decision.chosen, decision.instruction, t)
        try:
            outcome = invoke(registry, inv, scene, gateway, env)
        except Exception as exc:
            raise LoopError(f"tool {inv.tool_id} failed at step {t}: {exc}", steps, scene) from exc
        report = None
        after = scene
        if not outcome.failed:
            try:
                after, report = execute(scene, outcome.delta, catalog, optim)
            except (DeltaError, SceneValidationError) as exc:
                outcome = ToolOutcome.failure(f"delta rejected: {exc}")
        after = after.with_step(t)
        try:
            reflection = reflect(after, query, scorer, t, catalog, optim.tol)
        except Exception as exc:
            raise LoopError(f"review failed at step {t}: {exc}", steps, scene) from exc
        rolled = False
        if v_prev is not None:
            drop = v_prev.perceptual.total - reflection.perceptual.total
            worse = reflection.physical.violations > v_prev.physical.violations
            rolled = drop > cfg.rollback_drop or worse
        record = StepRecord(t, decision, outcome, scene, after, reflection, rolled, v_prev, report)
        steps.append(record)
        update_confidence(memory, record, cfg)
        memory.push(MemoryEntry(inv, summarize_scene(after, outcome.narrative), reflection))
        log.info("step %d: %s -> %s%s", t, inv.tool_id, reflection.perceptual.as_tuple(),
                 " (rolled back)" if rolled else "")
        if rolled:
            rollbacks += 1
            if rollbacks >= cfg.max_rollbacks:
                stop_reason = f"{rollbacks} consecutive rollbacks"
                break
        else:
            rollbacks = 0
            scene = after
            v_prev = reflection
    return LoopResult(scene, steps, stop_reason, first)


def classes_for_score_trace(registry: Registry, scores: Sequence[Sequence[int]], scene: Scene,
                            cfg: PlannerConfig = PlannerConfig(),
                            backend: PlanBackend | None = None) -> list[str]:
    """Tool classes the planner picks when fed a fixed sequence of reviews.

    ``scores`` lists (realism, functionality, layout, completion) after each
    step, one decision per entry: the first decision is made with no review,
    and the last review only closes the sequence. Confidence updates use the
    same failure rule as the live loop.
    """
    from .metrics import PhysicalMetrics

    backend = backend or ScriptedBackend()
    memory = Memory(cfg.memory_length)
    classes = []
    v_prev = None
    empty = scene.with_objects(())
    for t in range(len(scores)):
        current = empty if v_prev is None else scene
        d = plan_step("", registry, memory, v_prev, backend, scene=current, cfg=cfg)
        classes.append(registry.card(d.chosen).tool_class)
        r, f, lay, c = scores[t]
        refl = Reflection(PhysicalMetrics(len(scene.objects), 0, 0),
                          PerceptualScores(r, f, lay, c), (), t + 1)
        rec = StepRecord(t + 1, d, ToolOutcome(), current, scene, refl, False, v_prev)
        update_confidence(memory, rec, cfg)
        v_prev = refl
    return classes


# --------------------------------------------------------------------------
# traces

TRACE_FORMAT = "roomweave-trace"
TRACE_VERSION = 1


def step_to_dict(r: StepRecord) -> dict:
    from .scene import delta_to_dict, scene_to_dict

    return {
        "step": r.step,
        "decision": r.decision.to_dict(),
        "invocation": ToolInvocation(r.decision.chosen or "", r.decision.instruction, r.step).to_dict(),
        "outcome": {
            "delta": delta_to_dict(r.outcome.delta),
            "narrative": r.outcome.narrative,
            "failed": r.outcome.failed,
            "reason": r.outcome.reason,
        },
        "rolled_back": r.rolled_back,
        "reflection_before": r.reflection_before.to_dict() if r.reflection_before else None,
        "reflection": r.reflection.to_dict(),
        "execution": r.report.to_dict() if r.report else None,
        "scene_before": scene_to_dict(r.scene_before),
        "scene_after": scene_to_dict(r.scene_after),
    }


def step_from_dict(d: dict) -> StepRecord:
    from .scene import delta_from_dict, scene_from_dict

    o = d["outcome"]
    delta = delta_from_dict(o["delta"], source=d["decision"].get("chosen") or "unknown")
    outcome = ToolOutcome(delta, o.get("narrative", ""), bool(o.get("failed")), o.get("reason", ""))
    before = d.get("reflection_before")
    return StepRecord(
        step=int(d["step"]),
        decision=PlanDecision.from_dict(d["decision"]),
        outcome=outcome,
        scene_before=scene_from_dict(d["scene_before"]),
        scene_after=scene_from_dict(d["scene_after"]),
        reflection=Reflection.from_dict(d["reflection"]),
        rolled_back=bool(d["rolled_back"]),
        reflection_before=Reflection.from_dict(before) if before else None,
    )


def trace_to_dict(result: LoopResult, query: str, cfg: PlannerConfig,
                  optim: OptimConfig = OptimConfig(), catalog: AssetCatalog | None = None,
                  extra: dict | None = None) -> dict:
    from .scene import scene_to_dict

    data = {
        "format": TRACE_FORMAT,
        "version": TRACE_VERSION,
        "query": query,
        "planner": cfg.to_dict(),
        "optimizer": {"max_steps": optim.max_steps, "step_damping": optim.step_damping,
                      "priority": optim.priority},
        "stop_reason": result.stop_reason,
        "initial": scene_to_dict(result.initial),
        "steps": [step_to_dict(r) for r in result.steps],
        "final": scene_to_dict(result.final),
    }
    if catalog is not None and catalog is not default_catalog():
        data["catalog"] = catalog.to_dict()
    if extra:
        data.update(extra)
    return data


def dump_trace(data: dict) -> str:
    import json

    return json.dumps(data, indent=1, ensure_ascii=False, sort_keys=False) + "\n"


@dataclass
class ReplayReport:
    steps: int
    divergent: list[int]
    messages: list[str]

    @property
    def ok(self) -> bool:
        return not self.divergent

    def summary(self) -> str:
        return f"{len(self.divergent)} divergent steps of {self.steps}"


def replay(trace: dict, catalog: AssetCatalog | None = None) -> ReplayReport:
    """Re-execute every recorded delta and compare scenes byte for byte.

    A step diverges when re-execution gives a different scene than the one
    recorded, or when the recorded chain is broken (the next step does not
    start from the scene this step left behind).
    """
    from .scene import scene_from_dict, serialize_scene

    if trace.get("format") != TRACE_FORMAT:
        raise ValueError("not a roomweave trace")
    if catalog is None:
        catalog = AssetCatalog.from_dict(trace["catalog"]) if "catalog" in trace else default_catalog()
    opt = trace.get("optimizer", {})
    optim = OptimConfig(max_steps=int(opt.get("max_steps", 100)),
                        step_damping=float(opt.get("step_damping", 1.0)),
                        priority=opt.get("priority", "footprint"))
    records = [step_from_dict(d) for d in trace["steps"]]
    working = scene_from_dict(trace["initial"])
    divergent, messages = [], []
    for r in records:
        bad = []
        if serialize_scene(r.scene_before) != serialize_scene(working):
            bad.append("starts from a different scene than the previous step left")
        if r.outcome.failed:
            expect = r.scene_before.with_step(r.step)
        else:
            try:
                expect, _rep = execute(r.scene_before, r.outcome.delta, catalog, optim)
                expect = expect.with_step(r.step)
            except (DeltaError, SceneValidationError) as exc:
                expect = None
                bad.append(f"delta no longer applies: {exc}")
        if expect is not None and serialize_scene(expect) != serialize_scene(r.scene_after):
            bad.append("re-executed scene differs from the recorded one")
        if bad:
            divergent.append(r.step)
            messages += [f"step {r.step}: {m}" for m in bad]
        working = r.working_scene
    if serialize_scene(working) != serialize_scene(scene_from_dict(trace["final"])):
        messages.append("final scene differs from the last working scene")
        if not divergent or divergent[-1] != (records[-1].step if records else 0):
            divergent.append(records[-1].step if records else 0)
    return ReplayReport(len(records), divergent, messages)
