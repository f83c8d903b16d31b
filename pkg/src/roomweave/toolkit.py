"""Tool cards, the registry and the single entry point for calling a tool.

A tool never edits a scene. It returns a :class:`ToolOutcome` whose delta the
executor applies; that split is what makes rollback a plain assignment.
"""

from __future__ import annotations

import json
import logging
import os
import re
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .catalog import AssetCatalog, default_catalog
from .scene import SceneDelta, SceneValidationError, delta_from_dict, serialize_scene

log = logging.getLogger(__name__)

TOOL_CLASSES = ("initializer", "implementer", "refiner")


class RegistryError(ValueError):
    pass


class MissingGateway(RuntimeError):
    """An LLM-backed tool was invoked without a gateway."""


@dataclass(frozen=True)
class ToolCard:
    tool_id: str
    tool_class: str
    description: str
    supported_room_types: tuple[str, ...] | str = "any"
    use_cases: tuple[str, ...] = ()
    strengths: str = ""
    weaknesses: str = ""
    input_schema: Mapping[str, str] = field(default_factory=lambda: {"instruction": "string"})
    requires_llm: bool = False

    def __post_init__(self):
        if self.tool_class not in TOOL_CLASSES:
            raise RegistryError(f"{self.tool_id}: unknown class {self.tool_class!r}")
        if "instruction" not in self.input_schema:
            raise RegistryError(f"{self.tool_id}: input_schema must include 'instruction'")
        srt = self.supported_room_types
        if not isinstance(srt, str):
            object.__setattr__(self, "supported_room_types", tuple(srt))
        elif srt != "any":
            object.__setattr__(self, "supported_room_types", (srt,))
        object.__setattr__(self, "use_cases", tuple(self.use_cases))
        object.__setattr__(self, "input_schema", dict(self.input_schema))

    def supports(self, room_type: str) -> bool:
        if self.supported_room_types == "any":
            return True
        return room_type.lower().strip() in {r.lower() for r in self.supported_room_types}

    def to_dict(self) -> dict[str, Any]:
        srt = self.supported_room_types
        return {
            "tool_id": self.tool_id,
            "class": self.tool_class,
            "description": self.description,
            "supported_room_types": srt if isinstance(srt, str) else list(srt),
            "use_cases": list(self.use_cases),
            "strengths": self.strengths,
            "weaknesses": self.weaknesses,
            "input_schema": dict(self.input_schema),
            "requires_llm": self.requires_llm,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ToolCard":
        try:
            return cls(
                tool_id=str(d["tool_id"]),
                tool_class=str(d["class"]),
                description=str(d.get("description", "")),
                supported_room_types=d.get("supported_room_types", "any"),
                use_cases=tuple(d.get("use_cases", ())),
                strengths=str(d.get("strengths", "")),
                weaknesses=str(d.get("weaknesses", "")),
                input_schema=dict(d.get("input_schema", {"instruction": "string"})),
                requires_llm=bool(d.get("requires_llm", False)),
            )
        except KeyError as exc:
            raise RegistryError(f"tool card lacks {exc.args[0]!r}") from None


@dataclass(frozen=True)
class ToolInvocation:
    tool_id: str
    instruction: str = ""
    step: int = 0

    def to_dict(self) -> dict:
        return {"tool_id": self.tool_id, "instruction": self.instruction, "step": self.step}


@dataclass(frozen=True)
class ToolOutcome:
    delta: SceneDelta = field(default_factory=SceneDelta)
    narrative: str = ""
    failed: bool = False
    reason: str = ""

    def __post_init__(self):
        if self.failed and not self.delta.is_empty:
            raise ValueError("a failed outcome carries no delta")

    @classmethod
    def failure(cls, reason: str) -> "ToolOutcome":
        return cls(SceneDelta(), narrative=f"failed: {reason}", failed=True, reason=reason)


@dataclass
class ToolEnv:
    """Read-only resources shared by the bundled tools."""

    catalog: AssetCatalog = field(default_factory=default_catalog)
    library_dir: Path | None = None
    pretrained_dir: Path | None = None
    seed: int = 0
    query: str = ""


ToolFn = Callable[..., ToolOutcome]


class Registry:
    def __init__(self):
        self._cards: dict[str, ToolCard] = {}
        self._impls: dict[str, ToolFn] = {}

    def register(self, card: ToolCard, impl: ToolFn) -> "Registry":
        if card.tool_id in self._cards:
            raise RegistryError(f"duplicate tool_id {card.tool_id!r}")
        self._cards[card.tool_id] = card
        self._impls[card.tool_id] = impl
        return self

    def __contains__(self, tool_id: str) -> bool:
        return tool_id in self._cards

    def __len__(self) -> int:
        return len(self._cards)

    @property
    def tool_ids(self) -> list[str]:
        return list(self._cards)

    def cards(self) -> list[ToolCard]:
        return list(self._cards.values())

    def card(self, tool_id: str) -> ToolCard:
        try:
            return self._cards[tool_id]
        except KeyError:
            raise RegistryError(f"unknown tool {tool_id!r}") from None

    def impl(self, tool_id: str) -> ToolFn:
        self.card(tool_id)
        return self._impls[tool_id]

    def subset(self, tool_ids: Sequence[str]) -> "Registry":
        """A registry restricted to ``tool_ids`` (kept in registration order)."""
        keep = set(tool_ids)
        unknown = keep - set(self._cards)
        if unknown:
            raise RegistryError(f"unknown tools {sorted(unknown)}")
        r = Registry()
        for tid in self._cards:
            if tid in keep:
                r.register(self._cards[tid], self._impls[tid])
        return r


def registry_register(registry: Registry, card: ToolCard, impl: ToolFn) -> Registry:
    return registry.register(card, impl)


def invoke(registry: Registry, inv: ToolInvocation, s, gateway=None,
           env: ToolEnv | None = None) -> ToolOutcome:
    """Run one tool on scene ``s``.

    Raises :class:`MissingGateway` when an LLM tool has no gateway. Gateway
    failures (network, auth) propagate; every other failure inside the tool
    is returned as a failed outcome.
    """
    from .gateway import GatewayError

    card = registry.card(inv.tool_id)
    if card.requires_llm and gateway is None:
        raise MissingGateway(f"{inv.tool_id} needs an LLM gateway")
    env = env or ToolEnv()
    impl = registry.impl(inv.tool_id)
    try:
        out = impl(s, inv, gateway, env)
    except GatewayError:
        raise
    except Exception as exc:  # tool bugs and bad model output
        log.warning("tool %s failed: %s", inv.tool_id, exc)
        return ToolOutcome.failure(f"{type(exc).__name__}: {exc}")
    bad = out.delta.referenced_ids() - set(s.by_id)
    if bad:
        return ToolOutcome.failure(f"delta references unknown ids {sorted(bad)}")
    return out


# --------------------------------------------------------------------------
# planner-facing card text

_CARD_BLOCK = re.compile(r"```json tool-card\n(.*?)\n```", re.S)


def render_cards(cards: Sequence[ToolCard]) -> str:
    """One fenced metadata block per tool, for prompt assembly."""
    blocks = []
    for c in cards:
        blocks.append("```json tool-card\n" + json.dumps(c.to_dict(), indent=2) + "\n```")
    return "\n\n".join(blocks)


def parse_cards(text: str) -> list[ToolCard]:
    return [ToolCard.from_dict(json.loads(m)) for m in _CARD_BLOCK.findall(text)]


# --------------------------------------------------------------------------
# third-party tools backed by an external command

def external_tool(command: Sequence[str] | str, timeout: float = 60.0) -> ToolFn:
    """Wrap a command that reads a scene on stdin and prints a delta.

    The instruction is passed in the ``ROOMWEAVE_INSTRUCTION`` environment
    variable.
    """
    argv = shlex.split(command) if isinstance(command, str) else list(command)

    def run(s, inv: ToolInvocation, gateway, env: ToolEnv) -> ToolOutcome:
        proc = subprocess.run(
            argv,
            input=serialize_scene(s),
            capture_output=True,
            timeout=timeout,
            env={**os.environ, "ROOMWEAVE_INSTRUCTION": inv.instruction},
            check=False,
        )
        if proc.returncode != 0:
            return ToolOutcome.failure(
                f"command exited {proc.returncode}: {proc.stderr.decode(errors='replace')[:200]}"
            )
        try:
            delta = delta_from_dict(json.loads(proc.stdout), source=inv.tool_id)
        except (ValueError, SceneValidationError) as exc:
            return ToolOutcome.failure(f"command output is not a delta: {exc}")
        return ToolOutcome(delta, narrative=f"{argv[0]} proposed {len(delta.adds)} adds")

    return run


def load_tool_card_file(path: str | Path) -> tuple[ToolCard, ToolFn]:
    """Read a card file: card fields plus ``"command"``."""
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    if "command" not in data:
        raise RegistryError(f"{path}: tool card file needs a 'command'")
    card = ToolCard.from_dict(data)
    return card, external_tool(data["command"], float(data.get("timeout", 60.0)))
