"""Client for chat-completions style LLM endpoints.

Two transports share one request path: ``LiveTransport`` posts to
``{base_url}/chat/completions`` with httpx, ``MockTransport`` replays canned
replies stored as ``<dir>/<template_id>/<index>.txt``. Structured answers are
read from the first fenced code block of the reply.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol

import httpx

from .metrics import CRITERIA, PerceptualScores, ScorerError
from .prompts import IMAGE_TEMPLATES, SYSTEM, TEMPLATES, repair_note
from .scene import SceneDelta, SceneValidationError, delta_from_dict, serialize_scene

log = logging.getLogger(__name__)

ENV_KEY = "SCENEWEAVER_API_KEY"
ENV_BASE = "SCENEWEAVER_API_BASE"
ENV_MODEL = "SCENEWEAVER_MODEL"

DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_MODEL = "gpt-4o"


class GatewayError(RuntimeError):
    """The endpoint could not produce a reply."""


class GatewayConfigError(GatewayError):
    pass


class AuthenticationError(GatewayError):
    pass


class RetriesExhausted(GatewayError):
    pass


class FixtureMissing(GatewayError):
    pass


class StructuredOutputError(ValueError):
    """A reply had no parseable block or the wrong shape."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class _Retryable(Exception):
    pass


@dataclass(frozen=True)
class GatewayConfig:
    base_url: str = DEFAULT_BASE_URL
    api_key: str = field(default="", repr=False)
    model: str = DEFAULT_MODEL
    temperature: float = 0.2
    max_retries: int = 3
    timeout: float = 60.0
    transport: str = "live"

    def __post_init__(self):
        if self.max_retries < 1:
            raise GatewayConfigError("max_retries must be >= 1")
        if not (self.transport == "live" or self.transport.startswith("mock:")):
            raise GatewayConfigError(f"unknown transport {self.transport!r}")

    @property
    def is_mock(self) -> bool:
        return self.transport.startswith("mock:")

    @property
    def fixture_dir(self) -> Path:
        return Path(self.transport.split(":", 1)[1])

    def check(self) -> None:
        if not self.is_mock and not self.api_key:
            raise GatewayConfigError(f"live transport needs an API key (set {ENV_KEY})")

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None, **overrides) -> "GatewayConfig":
        env = os.environ if env is None else env
        values: dict[str, Any] = {
            "base_url": env.get(ENV_BASE) or DEFAULT_BASE_URL,
            "api_key": env.get(ENV_KEY, ""),
            "model": env.get(ENV_MODEL) or DEFAULT_MODEL,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class Transport(Protocol):
    def send(self, template_id: str, index: int, body: dict) -> str:
        """Return the reply text or raise _Retryable / GatewayError."""


class MockTransport:
    """Replays ``<dir>/<template_id>/<index>.txt``; never touches the network."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.requests: list[tuple[str, int, dict]] = []

    def send(self, template_id: str, index: int, body: dict) -> str:
        self.requests.append((template_id, index, body))
        path = self.directory / template_id / f"{index}.txt"
        if not path.is_file():
            raise FixtureMissing(f"no recorded reply at {path}")
        return path.read_text(encoding="utf-8")


class LiveTransport:
    def __init__(self, cfg: GatewayConfig, client: httpx.Client | None = None):
        self.cfg = cfg
        self._client = client

    @property
    def client(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(timeout=self.cfg.timeout)
        return self._client

    def send(self, template_id: str, index: int, body: dict) -> str:
        url = self.cfg.base_url.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {self.cfg.api_key}"}
        try:
            resp = self.client.post(url, json=body, headers=headers, timeout=self.cfg.timeout)
        except httpx.TransportError as exc:
            raise _Retryable(f"{type(exc).__name__}") from None
        if resp.status_code in (401, 403):
            raise AuthenticationError(f"endpoint rejected credentials ({resp.status_code})")
        if resp.status_code >= 500 or resp.status_code == 429:
            raise _Retryable(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise GatewayError("malformed completion payload") from None


class Gateway:
    """Prompt assembly plus one chat round trip with retries."""

    def __init__(self, cfg: GatewayConfig, transport: Transport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        cfg.check()
        self.cfg = cfg
        if transport is None:
            transport = MockTransport(cfg.fixture_dir) if cfg.is_mock else LiveTransport(cfg)
        self.transport = transport
        self.sleep = sleep
        self.sleeps: list[float] = []
        self.calls: dict[str, int] = {}

    def build_request(self, template_id: str, bindings: Mapping[str, str],
                      image: bytes | None = None) -> dict:
        if template_id not in TEMPLATES:
            raise KeyError(f"unknown template {template_id!r}")
        tpl = TEMPLATES[template_id]
        needs_image = template_id in IMAGE_TEMPLATES or "rendered_image" in tpl.placeholders
        if needs_image and image is None:
            raise ValueError(f"template {template_id!r} requires a rendered image")
        values = dict(bindings)
        if "rendered_image" in tpl.placeholders:
            values.setdefault("rendered_image", "(see the attached image)")
        text = tpl.render(values)
        if image is None:
            content: Any = text
        else:
            url = "data:image/png;base64," + base64.b64encode(image).decode("ascii")
            content = [
                {"type": "text", "text": text},
                {"type": "image_url", "image_url": {"url": url}},
            ]
        return {
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": SYSTEM},
                {"role": "user", "content": content},
            ],
            "temperature": self.cfg.temperature,
        }

    def complete(self, template_id: str, bindings: Mapping[str, str],
                 image: bytes | None = None) -> str:
        body = self.build_request(template_id, bindings, image)
        index = self.calls.get(template_id, 0)
        self.calls[template_id] = index + 1
        delay = 1.0
        for attempt in range(1, self.cfg.max_retries + 1):
            try:
                text = self.transport.send(template_id, index, body)
                log.debug("%s #%d answered on attempt %d", template_id, index, attempt)
                return text
            except _Retryable as exc:
                log.warning("%s #%d attempt %d failed: %s", template_id, index, attempt, exc)
                if attempt == self.cfg.max_retries:
                    raise RetriesExhausted(
                        f"{template_id}: gave up after {attempt} attempts ({exc})"
                    ) from None
                self.sleeps.append(delay)
                self.sleep(delay)
                delay *= 2
        raise RetriesExhausted(template_id)  # pragma: no cover

    def ask(self, template_id: str, bindings: Mapping[str, str], schema: str,
            image: bytes | None = None, **kw) -> Any:
        """complete + extract_structured with one repair round on bad output."""
        raw = self.complete(template_id, bindings, image)
        try:
            return extract_structured(raw, schema, **kw)
        except StructuredOutputError as exc:
            log.info("%s reply unusable (%s); asking once more", template_id, exc)
            fixed = dict(bindings)
            fixed["user_demand"] = str(bindings.get("user_demand", "")) + repair_note(str(exc))
            raw = self.complete(template_id, fixed, image)
            return extract_structured(raw, schema, **kw)


# --------------------------------------------------------------------------
# structured extraction

_FENCE = re.compile(r"```[ \t]*([A-Za-z0-9_-]*)[ \t]*\r?\n(.*?)```", re.S)


def _payload(raw: str) -> Any:
    m = _FENCE.search(raw)
    text = m.group(2) if m else raw.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise StructuredOutputError(f"no parseable JSON block ({exc.msg})", raw) from None


def _verifier_shape(data: Any, raw: str) -> dict:
    if not isinstance(data, Mapping):
        raise StructuredOutputError("expected an object with the four criteria", raw)
    out = {}
    for c in CRITERIA:
        entry = data.get(c)
        if not isinstance(entry, Mapping) or "grade" not in entry:
            raise StructuredOutputError(f"{c}: expected {{grade, comment}}", raw)
        g = entry["grade"]
        if isinstance(g, bool) or not isinstance(g, int):
            raise StructuredOutputError(f"{c}: grade must be an integer, got {g!r}", raw)
        out[c] = {"grade": g, "comment": str(entry.get("comment", ""))}
    return out


def _plan_shape(data: Any, raw: str) -> dict:
    if not isinstance(data, Mapping):
        raise StructuredOutputError("expected a plan object", raw)
    stop = data.get("stop", False)
    if not isinstance(stop, bool):
        raise StructuredOutputError("stop must be true or false", raw)
    cands = data.get("candidates", [])
    if not isinstance(cands, list):
        raise StructuredOutputError("candidates must be a list", raw)
    parsed = []
    for c in cands:
        if not isinstance(c, Mapping) or not isinstance(c.get("tool"), str):
            raise StructuredOutputError("each candidate needs a tool id", raw)
        conf = c.get("confidence", 0.5)
        if isinstance(conf, bool) or not isinstance(conf, (int, float)):
            raise StructuredOutputError("confidence must be a number", raw)
        parsed.append((c["tool"], min(1.0, max(0.0, float(conf)))))
    tool = data.get("tool")
    if not stop and not isinstance(tool, str):
        raise StructuredOutputError("a tool must be chosen unless stopping", raw)
    return {
        "problem": str(data.get("problem", "")),
        "target": data.get("target"),
        "candidates": parsed,
        "tool": tool,
        "instruction": str(data.get("instruction", "")),
        "stop": stop,
    }


def _ids_shape(data: Any, raw: str) -> list[str]:
    if isinstance(data, Mapping):
        data = data.get("removes", data.get("ids"))
    if not isinstance(data, list) or not all(isinstance(i, str) for i in data):
        raise StructuredOutputError("expected a list of object ids", raw)
    return list(data)


def extract_structured(raw: str, schema: str, *, source: str = "unknown") -> Any:
    """Parse the first fenced block (or the whole reply) into ``schema``.

    ``schema`` is one of ``"verifier"`` (dict of grade/comment pairs),
    ``"delta"`` (:class:`SceneDelta`), ``"plan"`` (dict) or ``"ids"`` (list).
    """
    data = _payload(raw)
    if schema == "verifier":
        return _verifier_shape(data, raw)
    if schema == "delta":
        try:
            return delta_from_dict(data, source=source)
        except SceneValidationError as exc:
            raise StructuredOutputError(f"bad delta: {exc}", raw) from None
    if schema == "plan":
        return _plan_shape(data, raw)
    if schema == "ids":
        return _ids_shape(data, raw)
    raise ValueError(f"unknown schema {schema!r}")


def verifier_to_scores(data: Mapping[str, Mapping[str, Any]]) -> PerceptualScores:
    return PerceptualScores(
        *(int(data[c]["grade"]) for c in CRITERIA),
        comments={c: str(data[c].get("comment", "")) for c in CRITERIA},
    )


class LlmScorer:
    """Scorer that shows the rendered view to a vision-capable model."""

    def __init__(self, gateway: Gateway):
        self.gateway = gateway

    def score(self, scene, view, query: str) -> dict:
        from .render import rasterize_for_prompt

        png = rasterize_for_prompt(view)
        bindings = {"user_demand": query, "scene_layout": serialize_scene(scene).decode("utf-8")}
        try:
            data = self.gateway.ask("verifier", bindings, "verifier", image=png)
        except StructuredOutputError as exc:
            raise ScorerError(f"verifier reply unusable: {exc}", exc.raw) from None
        out: dict[str, Any] = {c: data[c]["grade"] for c in CRITERIA}
        out["comments"] = {c: data[c]["comment"] for c in CRITERIA}
        return out

