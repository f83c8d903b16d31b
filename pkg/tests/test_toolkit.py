import json
import sys

import pytest

from roomweave.scene import RoomBounds, Scene, SceneDelta, SceneObject, serialize_scene
from roomweave.toolkit import (
    MissingGateway,
    Registry,
    RegistryError,
    ToolCard,
    ToolEnv,
    ToolInvocation,
    ToolOutcome,
    external_tool,
    invoke,
    load_tool_card_file,
    parse_cards,
    render_cards,
)
from roomweave.tools import CARDS, default_registry

SCENE = Scene(RoomBounds(4, 4, 3), (SceneObject("a", "box", (1, 1, 0.5), 0, (1, 1, 1)),))


def card(tid="t", cls="implementer", **kw):
    return ToolCard(tid, cls, "does a thing", **kw)


def test_bundled_registry_has_eleven_tools():
    reg = default_registry()
    assert len(reg) == 11
    classes = [c.tool_class for c in reg.cards()]
    assert classes.count("initializer") == 3
    assert classes.count("implementer") == 3
    assert classes.count("refiner") == 5


def test_every_card_asks_for_an_instruction():
    for c in CARDS:
        assert "instruction" in c.input_schema
        assert c.description and c.strengths and c.weaknesses


def test_card_validation():
    with pytest.raises(RegistryError):
        card(cls="helper")
    with pytest.raises(RegistryError):
        card(input_schema={"target": "string"})


def test_duplicate_registration_rejected():
    r = Registry().register(card(), lambda *a: ToolOutcome())
    with pytest.raises(RegistryError, match="duplicate"):
        r.register(card(), lambda *a: ToolOutcome())


def test_room_type_support():
    c = card(supported_room_types=("bedroom", "living room"))
    assert c.supports("Bedroom")
    assert not c.supports("kitchen")
    assert card().supports("anything")


def test_cards_survive_prompt_rendering():
    text = render_cards(default_registry().cards())
    back = parse_cards(text)
    assert back == default_registry().cards()


def test_failed_outcome_cannot_carry_delta():
    with pytest.raises(ValueError):
        ToolOutcome(SceneDelta(removes=("a",)), failed=True)


def test_invoke_turns_tool_errors_into_failures():
    def boom(s, inv, gw, env):
        raise RuntimeError("kaput")
    r = Registry().register(card(), boom)
    out = invoke(r, ToolInvocation("t"), SCENE)
    assert out.failed and "kaput" in out.reason


def test_invoke_rejects_unknown_references():
    r = Registry().register(card(), lambda s, i, g, e: ToolOutcome(SceneDelta(removes=("ghost",))))
    out = invoke(r, ToolInvocation("t"), SCENE)
    assert out.failed and "ghost" in out.reason


def test_llm_tool_without_gateway():
    r = Registry().register(card(requires_llm=True), lambda *a: ToolOutcome())
    with pytest.raises(MissingGateway):
        invoke(r, ToolInvocation("t"), SCENE)


def test_unknown_tool():
    with pytest.raises(RegistryError):
        invoke(Registry(), ToolInvocation("nope"), SCENE)


def test_subset_keeps_order():
    reg = default_registry().subset(["add_crowd", "init_library"])
    assert reg.tool_ids == ["init_library", "add_crowd"]


SCRIPT = """
import json, os, sys
scene = json.load(sys.stdin)
n = len(scene["objects"])
print(json.dumps({"adds": [{"id": "extra_0", "category": os.environ["ROOMWEAVE_INSTRUCTION"],
                            "location": [2, 2, 0.5], "rotation": 0, "size": [0.5, 0.5, 1.0]}]}))
"""


def test_external_tool_round_trip(tmp_path):
    script = tmp_path / "tool.py"
    script.write_text(SCRIPT)
    cardfile = tmp_path / "card.json"
    cardfile.write_text(json.dumps({
        "tool_id": "ext", "class": "implementer", "description": "adds one object",
        "input_schema": {"instruction": "string"},
        "command": [sys.executable, str(script)],
    }))
    c, impl = load_tool_card_file(cardfile)
    reg = default_registry([cardfile])
    assert "ext" in reg and len(reg) == 12
    out = invoke(reg, ToolInvocation("ext", "plant"), SCENE)
    assert not out.failed
    assert out.delta.adds[0].category == "plant"


def test_external_tool_bad_output(tmp_path):
    run = external_tool([sys.executable, "-c", "print('not json')"])
    out = run(SCENE, ToolInvocation("ext"), None, ToolEnv())
    assert out.failed
    run = external_tool([sys.executable, "-c", "import sys; sys.exit(3)"])
    assert "exited 3" in run(SCENE, ToolInvocation("ext"), None, ToolEnv()).reason


def test_card_file_needs_command(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"tool_id": "x", "class": "refiner"}))
    with pytest.raises(RegistryError):
        load_tool_card_file(p)
