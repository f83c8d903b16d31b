"""Iterative indoor scene layout synthesis."""

__version__ = "0.1.0"

from .catalog import AssetCatalog, default_catalog
from .executor import OptimConfig, enforce_relation, execute, optimize
from .gateway import Gateway, GatewayConfig, GatewayError, LlmScorer
from .geometry import DEFAULT_TOL, Tolerances, check_relation, obb_overlap
from .metrics import HeuristicScorer, PerceptualScores, PhysicalMetrics, Reflection, physical_metrics
from .planner import LoopResult, PlannerConfig, ScriptedBackend, replay, run_loop
from .render import render_topdown
from .scene import RelationType, RoomBounds, Scene, SceneDelta, SceneObject, parse_scene, serialize_scene
from .toolkit import Registry, ToolCard, ToolInvocation, ToolOutcome, invoke
from .tools import default_registry

__all__ = [
    "AssetCatalog", "DEFAULT_TOL", "Gateway", "GatewayConfig", "GatewayError", "HeuristicScorer",
    "LlmScorer", "LoopResult", "OptimConfig", "PerceptualScores", "PhysicalMetrics", "PlannerConfig",
    "Reflection", "Registry", "RelationType", "RoomBounds", "Scene", "SceneDelta", "SceneObject",
    "ScriptedBackend", "Tolerances", "ToolCard", "ToolInvocation", "ToolOutcome", "check_relation",
    "default_catalog", "default_registry", "enforce_relation", "execute", "invoke", "obb_overlap",
    "optimize", "parse_scene", "physical_metrics", "render_topdown", "replay", "run_loop",
    "serialize_scene",
]
