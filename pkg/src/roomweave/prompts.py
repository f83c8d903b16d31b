"""Prompt templates sent through the gateway.

Placeholders use ``${name}`` syntax so the JSON examples in the bodies need
no escaping. Allowed names: user_demand, memory, scene_layout,
rendered_image, tool_metadata.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

PLACEHOLDERS = ("user_demand", "memory", "scene_layout", "rendered_image", "tool_metadata")
_FIELD = re.compile(r"\$\{(\w+)\}")

SYSTEM = (
    "You help build indoor room layouts. Coordinates are meters, z is up, the"
    " room spans [0, width] x [0, depth] x [0, height]. An object's location is"
    " the center of its box, rotation is yaw in degrees counter-clockwise, and"
    " at yaw 0 the object's front faces +y. Answer with one fenced ```json block."
)

_DELTA_FORMAT = """\
Reply with a single fenced JSON block of this shape:
```json
{"adds": [{"id": "lamp_0", "category": "table lamp", "location": [x, y, z],
           "rotation": 0.0, "size": [sx, sy, sz], "parent": "nightstand_0",
           "relation": "on_top"}],
 "removes": ["old_id"],
 "updates": [{"id": "bed_0", "field": "rotation", "value": 90.0}]}
```
"size" may be omitted for common furniture. "parent" is "room" unless the
relation ties the object to another object. Relations: against_wall,
side_against_wall, on_floor (room relations); front_against, front_to_front,
leftright_to_leftright, side_by_side, back_to_back, on_top, inside (object
relations). Leave out any key you do not need."""


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str

    @property
    def placeholders(self) -> tuple[str, ...]:
        seen = []
        for name in _FIELD.findall(self.body):
            if name not in seen:
                seen.append(name)
        return tuple(seen)

    def __post_init__(self):
        bad = [p for p in self.placeholders if p not in PLACEHOLDERS]
        if bad:
            raise ValueError(f"{self.template_id}: unknown placeholders {bad}")

    def render(self, bindings: dict[str, str]) -> str:
        missing = [p for p in self.placeholders if p not in bindings]
        if missing:
            raise KeyError(f"{self.template_id}: unbound placeholders {missing}")
        return _FIELD.sub(lambda m: str(bindings[m.group(1)]), self.body)


PLANNER = PromptTemplate("planner", """\
You are planning the next edit of an indoor scene.

Request from the user:
${user_demand}

What happened in the previous steps (tool, scene summary and its review):
${memory}

Current layout:
${scene_layout}

Tools you may call this step, one metadata block each:
${tool_metadata}

Work out the single most important problem in the current scene. If the
scene is empty or there is no previous step, start with a tool of class
"initializer". Otherwise prefer fixing physical problems (collisions, objects
outside the room) before the lowest review score. Rank every useful tool by
how likely it fixes that problem, pick exactly one, and write the instruction
it should follow. If nothing important is left to fix, set "stop" to true.

```json
{"problem": "...", "target": "completion",
 "candidates": [{"tool": "tool_id", "confidence": 0.8}],
 "tool": "tool_id", "instruction": "...", "stop": false}
```""")

VERIFIER = PromptTemplate("verifier", """\
Review a generated room against the user's request.

Request: ${user_demand}

Top-down view (boxes with labels, arrows mark each object's front; axes in
meters): ${rendered_image}

Layout record:
${scene_layout}

Give each criterion an integer grade from 0 to 10 and a short comment:
- realism: does this look like a real room of the requested kind?
- functionality: can the room be used for its purpose; are key items there?
- layout: are objects placed sensibly, without overlaps or odd orientations?
- completion: is the room furnished and detailed, or sparse and empty?

```json
{"realism": {"grade": 7, "comment": "..."},
 "functionality": {"grade": 7, "comment": "..."},
 "layout": {"grade": 7, "comment": "..."},
 "completion": {"grade": 7, "comment": "..."}}
```""")


def _tool_template(template_id: str, task: str) -> PromptTemplate:
    return PromptTemplate(template_id, f"""\
{task}

Instruction: ${{user_demand}}

Current layout:
${{scene_layout}}

{_DELTA_FORMAT}""")


INIT_LLM = _tool_template(
    "init_llm",
    "Lay out a complete room from scratch that fits the instruction. Put large"
    " furniture first, keep everything inside the room and free of overlaps, and"
    " give each object a relation where one applies. Only use \"adds\".",
)
ADD_OBJECTS = _tool_template(
    "add_objects",
    "Add objects that the room is missing: large furniture on the floor, small"
    " items on top of tables or inside shelves, or items hung on walls. Use"
    " fresh ids and only \"adds\".",
)
REMOVE_OBJECT = _tool_template(
    "remove_object",
    "Pick the objects that do not belong in this room or are redundant. Reply"
    " with {\"removes\": [ids]} or a bare JSON list of ids.",
)
ADD_RELATION = _tool_template(
    "add_relation",
    "Attach explicit relations to objects that lack them, for example a bed"
    " against a wall or a chair facing a desk. Only use \"updates\" on the"
    " \"parent\" and \"relation\" fields.",
)
UPDATE_ROTATION = _tool_template(
    "update_rotation",
    "Correct objects that face the wrong way. Only use \"updates\" on the"
    " \"rotation\" field.",
)
UPDATE_SIZE = _tool_template(
    "update_size",
    "Resize objects whose proportions look wrong for their category. Only use"
    " \"updates\" on the \"size\" field.",
)
UPDATE_LAYOUT = _tool_template(
    "update_layout",
    "Move objects to better places: clear walkways, overlaps and objects"
    " pushed into corners. Only use \"updates\" on \"location\" and"
    " \"rotation\".",
)

TEMPLATES: dict[str, PromptTemplate] = {
    t.template_id: t
    for t in (PLANNER, VERIFIER, INIT_LLM, ADD_OBJECTS, REMOVE_OBJECT, ADD_RELATION,
              UPDATE_ROTATION, UPDATE_SIZE, UPDATE_LAYOUT)
}

# templates whose request must carry the rendered view
IMAGE_TEMPLATES = frozenset({"verifier"})


def repair_note(error: str) -> str:
    """Appended to the instruction when the previous reply did not parse."""
    return (
        "\n\nYour previous reply could not be used: "
        + error
        + "\nAnswer again with exactly one fenced ```json block in the format shown."
    )
