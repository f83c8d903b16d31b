"""Command line entry point: ``roomweave <command>``.

Exit codes: 0 when the command's main output was fully written, 1 for bad
input or a failed check, 2 for gateway failures (credentials, network).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .catalog import AssetCatalog, default_catalog, infer_room_type, room_types
from .executor import OptimConfig, optimize
from .gateway import Gateway, GatewayConfig, GatewayError, LlmScorer
from .geometry import Tolerances
from .metrics import CRITERIA, HeuristicScorer, metrics_report, perceptual_scores, physical_metrics
from .planner import (
    LlmPlanBackend,
    LoopError,
    PlannerConfig,
    ScriptedBackend,
    dump_trace,
    replay,
    run_loop,
    trace_to_dict,
)
from .render import rasterize_for_prompt, render_topdown
from .scene import SceneSyntaxError, SceneValidationError, parse_scene, scene_from_dict, serialize_scene
from .toolkit import RegistryError, ToolEnv, render_cards
from .tools import default_registry

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("roomweave")

EXIT_OK, EXIT_INPUT, EXIT_GATEWAY = 0, 1, 2


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    gateway: dict[str, Any] = field(default_factory=dict)
    catalog_path: Path | None = None
    library_dir: Path | None = None
    pretrained_dir: Path | None = None
    tool_cards: tuple[Path, ...] = ()
    out: Path | None = None
    seed: int = 0

    def catalog(self) -> AssetCatalog:
        return AssetCatalog.load(self.catalog_path) if self.catalog_path else default_catalog()


_PLANNER_KEYS = set(PlannerConfig().to_dict())
_OPTIM_KEYS = {"max_steps", "step_damping", "priority"}
_GATEWAY_KEYS = {"base_url", "model", "temperature", "max_retries", "timeout", "transport", "api_key"}
_TOL_KEYS = set(Tolerances.__dataclass_fields__)


def _pick(section: dict, allowed: set[str], name: str) -> dict:
    unknown = set(section) - allowed
    if unknown:
        raise UsageError(f"unknown keys in [{name}]: {', '.join(sorted(unknown))}")
    return dict(section)


def load_config(path: str | Path | None) -> RunConfig:
    """Read a TOML run config; missing sections keep module defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    rc = RunConfig()
    try:
        rc.planner = PlannerConfig(**_pick(data.get("planner", {}), _PLANNER_KEYS, "planner"))
        opt = dict(data.get("optimizer", {}))
        tol = _pick(opt.pop("tolerances", {}), _TOL_KEYS, "optimizer.tolerances")
        rc.optim = OptimConfig(**_pick(opt, _OPTIM_KEYS, "optimizer"), tol=Tolerances(**tol))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    rc.gateway = _pick(data.get("gateway", {}), _GATEWAY_KEYS, "gateway")
    paths = _pick(data.get("paths", {}), {"catalog", "library", "pretrained", "tool_cards", "out"}, "paths")
    base = path.parent

    def rel(p):
        return (base / p) if p is not None else None

    rc.catalog_path = rel(paths.get("catalog"))
    rc.library_dir = rel(paths.get("library"))
    rc.pretrained_dir = rel(paths.get("pretrained"))
    rc.tool_cards = tuple(rel(p) for p in paths.get("tool_cards", ()))
    rc.out = rel(paths.get("out"))
    rc.seed = int(data.get("seed", 0))
    return rc


def _gateway_config(rc: RunConfig, transport: str | None) -> GatewayConfig:
    values = dict(rc.gateway)
    if transport is not None:
        values["transport"] = transport
    return GatewayConfig.from_env(**values)


def _read_scene(path: str):
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise UsageError(f"{p}: {exc.strerror}") from None
    try:
        return parse_scene(raw)
    except SceneSyntaxError as exc:
        where = f":{exc.lineno}:{exc.colno}" if exc.lineno is not None else ""
        raise UsageError(f"{p}{where}: {exc}") from None
    except SceneValidationError as exc:
        raise UsageError(f"{p}: {exc}") from None


def _write(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.write_bytes(data)


def _json(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


# --------------------------------------------------------------------------
# generation

@dataclass
class GenerateSettings:
    query: str
    backend: str = "scripted"
    scorer: str = "heuristic"
    transport: str | None = None
    max_steps: int | None = None
    seed: int | None = None


def _needs_gateway(gs: GenerateSettings) -> bool:
    return gs.backend == "llm" or gs.scorer == "llm" or gs.transport is not None


def build_gateway(rc: RunConfig, gs: GenerateSettings) -> Gateway | None:
    if not _needs_gateway(gs):
        return None
    return Gateway(_gateway_config(rc, gs.transport or rc.gateway.get("transport")))


def generate(rc: RunConfig, gs: GenerateSettings, gateway: Gateway | None):
    """Run one loop and return (result, trace dict, metrics dict)."""
    cfg = rc.planner
    if gs.max_steps is not None:
        cfg = replace(cfg, max_iterations=gs.max_steps)
    catalog = rc.catalog()
    registry = default_registry(rc.tool_cards)
    seed = rc.seed if gs.seed is None else gs.seed
    env = ToolEnv(catalog=catalog, library_dir=rc.library_dir, pretrained_dir=rc.pretrained_dir,
                  seed=seed, query=gs.query)
    backend = LlmPlanBackend(gateway) if gs.backend == "llm" else ScriptedBackend(catalog, rc.optim.tol)
    scorer = LlmScorer(gateway) if gs.scorer == "llm" else HeuristicScorer(catalog, rc.optim.tol)
    result = run_loop(gs.query, registry, catalog, cfg, backend, scorer, gateway=gateway, env=env,
                      optim=rc.optim)
    trace = trace_to_dict(result, gs.query, cfg, rc.optim, catalog,
                          extra={"seed": seed, "backend": gs.backend, "scorer": gs.scorer})
    last = next((r.reflection for r in reversed(result.steps) if not r.rolled_back), None)
    final_phys = physical_metrics(result.final, rc.optim.tol)
    report = metrics_report(final_phys, last.perceptual if last else None)
    report["room_type"] = result.final.room.room_type
    report["steps"] = len(result.steps)
    report["stop_reason"] = result.stop_reason
    report["per_step"] = [
        {"step": r.step, "tool": r.decision.chosen, "rolled_back": r.rolled_back,
         **metrics_report(r.reflection.physical, r.reflection.perceptual)}
        for r in result.steps
    ]
    return result, trace, report


def write_generation(out: Path, result, trace: dict, report: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for old in out.glob("step_*.svg"):
        old.unlink()
    for r in result.steps:
        _write(out / f"step_{r.step:02d}.svg", render_topdown(r.scene_after).content)
    _write(out / "final.svg", render_topdown(result.final).content)
    _write(out / "trace.json", dump_trace(trace))
    _write(out / "metrics.json", _json(report))
    _write(out / "final.json", serialize_scene(result.final))


def cmd_generate(args, rc: RunConfig) -> int:
    out = Path(args.out) if args.out else rc.out
    if out is None:
        raise UsageError("generate needs --out (or [paths] out in the config)")
    gs = GenerateSettings(args.query, args.backend, args.scorer, args.transport, args.max_steps, args.seed)
    try:
        gateway = build_gateway(rc, gs)
    except GatewayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GATEWAY
    try:
        result, trace, report = generate(rc, gs, gateway)
    except LoopError as exc:
        cause = exc.__cause__
        print(f"error: {exc}", file=sys.stderr)
        if exc.steps:
            partial = {"format": "roomweave-partial-trace", "error": str(exc),
                       "steps": [r.step for r in exc.steps]}
            _write(out / "trace.partial.json", _json(partial))
        return EXIT_GATEWAY if isinstance(cause, GatewayError) else EXIT_INPUT
    write_generation(out, result, trace, report)
    print(f"{len(result.steps)} steps ({result.stop_reason}); "
          f"obj {report['obj']} ob {report['ob']} cn {report['cn']} -> {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# scene utilities

def cmd_evaluate(args, rc: RunConfig) -> int:
    s = _read_scene(args.scene)
    phys = physical_metrics(s, rc.optim.tol)
    perc = None
    if args.scorer:
        scorer = HeuristicScorer(rc.catalog(), rc.optim.tol)
        if args.scorer == "llm":
            try:
                scorer = LlmScorer(Gateway(_gateway_config(rc, args.transport)))
            except GatewayError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_GATEWAY
        try:
            perc = perceptual_scores(s, render_topdown(s), s.meta.query, scorer)
        except GatewayError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_GATEWAY
    sys.stdout.write(_json(metrics_report(phys, perc)))
    return EXIT_OK


def cmd_optimize(args, rc: RunConfig) -> int:
    s = _read_scene(args.scene)
    cfg = rc.optim if args.steps is None else replace(rc.optim, max_steps=args.steps)
    opt, residual = optimize(s, cfg)
    out = Path(args.out) if args.out else Path(args.scene).with_suffix(".optimized.json")
    _write(out, serialize_scene(opt))
    report = {"before": physical_metrics(s, cfg.tol).to_dict(), "residual": residual.to_dict(),
              "out": str(out)}
    sys.stdout.write(_json(report))
    return EXIT_OK


def _render_one(scene, out: Path, scale: float) -> None:
    view = render_topdown(scene, scale)
    if out.suffix.lower() == ".png":
        _write(out, rasterize_for_prompt(view))
    else:
        _write(out, view.content)


def cmd_render(args, rc: RunConfig) -> int:
    src = Path(args.path)
    try:
        data = json.loads(src.read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"{src}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{src}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    out = Path(args.out)
    if isinstance(data, dict) and data.get("format") == "roomweave-trace":
        ext = ".png" if args.png else ".svg"
        for st in data["steps"]:
            _render_one(scene_from_dict(st["scene_after"]), out / f"step_{st['step']:02d}{ext}", args.scale)
        _render_one(scene_from_dict(data["final"]), out / f"final{ext}", args.scale)
        print(f"rendered {len(data['steps'])} steps to {out}")
        return EXIT_OK
    s = _read_scene(args.path)
    _render_one(s, out, args.scale)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_replay(args, rc: RunConfig) -> int:
    p = Path(args.trace)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
        rep = replay(data)
    except OSError as exc:
        raise UsageError(f"{p}: {exc.strerror}") from None
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{p}: {exc}") from None
    for m in rep.messages:
        print(m, file=sys.stderr)
    print(rep.summary())
    return EXIT_OK if rep.ok else EXIT_INPUT


def cmd_tools(args, rc: RunConfig) -> int:
    reg = default_registry(rc.tool_cards + tuple(Path(p) for p in args.tool_card))
    if args.json:
        sys.stdout.write(_json([c.to_dict() for c in reg.cards()]))
    else:
        print(render_cards(reg.cards()))
        print(f"\n{len(reg)} tools")
    return EXIT_OK


# --------------------------------------------------------------------------
# benchmarking

BENCH_FIELDS = ("obj", "ob", "cn") + CRITERIA


def _suite_queries(suite: Path) -> list[tuple[str, str]]:
    """(room type, query) pairs from every non-empty line of *.txt files."""
    rows = []
    for f in sorted(suite.glob("*.txt")):
        for line in f.read_text(encoding="utf-8").splitlines():
            q = line.strip()
            if q and not q.startswith("#"):
                rows.append((infer_room_type(q), q))
    return rows


def bench_rows(rc: RunConfig, jobs: list[tuple[str, str]], n: int, gs_base: GenerateSettings,
               workers: int = 1) -> list[dict]:
    """Mean metrics per room type over ``n`` seeds per query."""
    tasks = [(rt, q, rc.seed + k) for rt, q in jobs for k in range(n)]

    def one(task):
        rt, q, seed = task
        gs = replace(gs_base, query=q, seed=seed)
        t0 = time.perf_counter()
        try:
            gw = build_gateway(rc, gs)
            _res, _trace, rep = generate(rc, gs, gw)
            rep["seconds"] = time.perf_counter() - t0
            return rt, rep, None
        except (LoopError, GatewayError) as exc:
            return rt, None, str(exc)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, tasks))
    else:
        results = [one(t) for t in tasks]

    order = list(dict.fromkeys(rt for rt, _q in jobs))
    table = []
    for rt in order:
        reps = [r for k, r, _e in results if k == rt and r is not None]
        errors = [e for k, r, e in results if k == rt and e is not None]
        row: dict[str, Any] = {"room": rt, "runs": len(reps), "failed": len(errors)}
        for f in BENCH_FIELDS:
            vals = [r[f] for r in reps if f in r]
            row[f] = round(sum(vals) / len(vals), 2) if vals else None
        row["seconds"] = round(sum(r["seconds"] for r in reps) / len(reps), 3) if reps else None
        if errors:
            row["errors"] = errors
        table.append(row)
    return table


def format_table(rows: Sequence[dict]) -> str:
    cols = ["room", "runs", "failed", *BENCH_FIELDS, "seconds"]
    cells = [[("-" if r.get(c) is None else str(r.get(c))) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def cmd_bench(args, rc: RunConfig) -> int:
    jobs: list[tuple[str, str]] = []
    if args.suite:
        suite = Path(args.suite)
        if not suite.is_dir():
            raise UsageError(f"{suite}: not a directory")
        jobs += _suite_queries(suite)
    if args.rooms:
        known = room_types()
        for rt in [r.strip() for r in args.rooms.split(",") if r.strip()]:
            name = rt.replace("_", " ")
            if name not in known:
                raise UsageError(f"unknown room type {rt!r}")
            jobs.append((name, f"Design me a {name}"))
    if not jobs:
        raise UsageError("empty suite: give --rooms or a --suite with queries")
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    gs = GenerateSettings("", args.backend, args.scorer, args.transport, args.max_steps)
    if _needs_gateway(gs):
        try:
            _gateway_config(rc, gs.transport or rc.gateway.get("transport")).check()
        except GatewayError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_GATEWAY
    rows = bench_rows(rc, jobs, args.n, gs, args.jobs)
    print(format_table(rows))
    if args.out:
        _write(Path(args.out), _json(rows))
    return EXIT_OK if any(r["runs"] for r in rows) else EXIT_INPUT


# --------------------------------------------------------------------------

def _loop_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-steps", type=int, help="iteration budget (default from config, 10)")
    p.add_argument("--backend", choices=("scripted", "llm"), default="scripted")
    p.add_argument("--scorer", choices=("heuristic", "llm"), default="heuristic")
    p.add_argument("--transport", help="live or mock:<fixture dir>")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="roomweave", description="Tool-driven indoor layout synthesis.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--config", help="TOML file with [planner], [optimizer], [gateway], [paths]")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="run the planning loop for a query")
    g.add_argument("--query", required=True)
    g.add_argument("--out", help="output directory")
    g.add_argument("--seed", type=int)
    _loop_flags(g)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="print metrics for a scene file")
    e.add_argument("scene")
    e.add_argument("--scorer", choices=("heuristic", "llm"))
    e.add_argument("--transport")
    e.set_defaults(func=cmd_evaluate)

    o = sub.add_parser("optimize", help="separate collisions and pull objects inside")
    o.add_argument("scene")
    o.add_argument("--steps", type=int, help="sweep budget (default 100)")
    o.add_argument("--out")
    o.set_defaults(func=cmd_optimize)

    r = sub.add_parser("render", help="draw a scene or every step of a trace")
    r.add_argument("path", help="scene file or trace.json")
    r.add_argument("--out", required=True, help=".svg/.png file, or a directory for traces")
    r.add_argument("--scale", type=float, default=100.0, help="pixels per meter")
    r.add_argument("--png", action="store_true", help="write PNG files when rendering a trace")
    r.set_defaults(func=cmd_render)

    rp = sub.add_parser("replay", help="re-execute a trace and check for drift")
    rp.add_argument("trace")
    rp.set_defaults(func=cmd_replay)

    t = sub.add_parser("tools", help="list the tool cards")
    t.add_argument("--json", action="store_true")
    t.add_argument("--tool-card", action="append", default=[], help="extra external tool card file")
    t.set_defaults(func=cmd_tools)

    b = sub.add_parser("bench", help="mean metrics over repeated generations")
    b.add_argument("--suite", help="directory of *.txt files, one query per line")
    b.add_argument("--rooms", help="comma separated room types, e.g. bedroom,living_room")
    b.add_argument("--n", type=int, default=3, help="runs per query")
    b.add_argument("--jobs", type=int, default=1, help="parallel runs")
    b.add_argument("--out", help="also write the rows as JSON")
    _loop_flags(b)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    level = logging.WARNING - 10 * min(2, args.verbose)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = load_config(args.config)
        return args.func(args, rc)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RegistryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
