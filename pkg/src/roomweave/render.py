"""Annotated top-down view: footprints, labels, front arrows and axes.

The SVG is the primary output; the PNG used in review prompts is drawn from
the same primitives with Pillow so the two never disagree.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

from PIL import Image, ImageDraw, ImageFont

from .geometry import footprint_corners, yaw_axes
from .scene import Scene

MARGIN_PX = 40.0
DEFAULT_SCALE = 100.0
RASTER_EDGE = 1024

_PALETTE = ("#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
            "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac")


@dataclass(frozen=True)
class ObjectGlyph:
    obj_id: str
    polygon: tuple[tuple[float, float], ...]
    arrow: tuple[tuple[float, float], tuple[float, float]]
    label: str
    label_at: tuple[float, float]
    color: str


@dataclass(frozen=True)
class RenderedView:
    content: str
    scale: float
    origin: tuple[float, float]
    width_px: float
    height_px: float
    room_px: tuple[float, float, float, float]
    ticks: tuple[tuple[str, float, float, str], ...]
    glyphs: tuple[ObjectGlyph, ...] = field(default_factory=tuple)

    @property
    def element_ids(self) -> list[str]:
        return [f"obj-{g.obj_id}" for g in self.glyphs]


def _f(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def render_topdown(s: Scene, scale: float = DEFAULT_SCALE) -> RenderedView:
    W, D = s.room.width, s.room.depth
    width_px = 2 * MARGIN_PX + W * scale
    height_px = 2 * MARGIN_PX + D * scale

    def px(x: float, y: float) -> tuple[float, float]:
        return MARGIN_PX + x * scale, MARGIN_PX + (D - y) * scale

    origin = px(0.0, 0.0)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width_px)}" '
        f'height="{_f(height_px)}" viewBox="0 0 {_f(width_px)} {_f(height_px)}">',
        f'<rect class="room" x="{_f(MARGIN_PX)}" y="{_f(MARGIN_PX)}" width="{_f(W * scale)}" '
        f'height="{_f(D * scale)}" fill="#fafafa" stroke="#222" stroke-width="2"/>',
    ]

    ticks = []
    for i in range(int(math.floor(W + 1e-9)) + 1):
        x, y = px(float(i), 0.0)
        ticks.append(("x", x, y + 14, str(i)))
    for j in range(int(math.floor(D + 1e-9)) + 1):
        x, y = px(0.0, float(j))
        ticks.append(("y", x - 14, y, str(j)))
    ox, oy = origin
    axes = ['<g id="axes">',
            f'<line x1="{_f(ox)}" y1="{_f(oy)}" x2="{_f(ox + 0.8 * scale)}" y2="{_f(oy)}" '
            'stroke="#c00" stroke-width="2"/>',
            f'<line x1="{_f(ox)}" y1="{_f(oy)}" x2="{_f(ox)}" y2="{_f(oy - 0.8 * scale)}" '
            'stroke="#080" stroke-width="2"/>',
            f'<text x="{_f(ox + 0.8 * scale + 4)}" y="{_f(oy + 4)}" font-size="12">x</text>',
            f'<text x="{_f(ox - 4)}" y="{_f(oy - 0.8 * scale - 6)}" font-size="12">y</text>']
    for axis, x, y, t in ticks:
        axes.append(f'<text class="tick" x="{_f(x)}" y="{_f(y)}" font-size="10" '
                    f'text-anchor="middle">{t}</text>')
    axes.append("</g>")
    parts += axes

    glyphs = []
    for o in sorted(s.objects, key=lambda o: o.id):
        poly = tuple(px(*c) for c in footprint_corners(o))
        _u, v = yaw_axes(o.rotation)
        cx, cy = o.location[0], o.location[1]
        reach = max(0.15, 0.5 * o.size[1])
        start = px(cx, cy)
        end = px(cx + v[0] * reach, cy + v[1] * reach)
        color = _PALETTE[sum(map(ord, o.category)) % len(_PALETTE)]
        label = f"{o.category} (z={o.location[2]:.2f})"
        glyphs.append(ObjectGlyph(o.id, poly, (start, end), label, start, color))
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in poly)
        parts.append(
            f'<g class="object" id="obj-{escape(o.id)}">'
            f'<polygon class="footprint" points="{pts}" fill="{color}" fill-opacity="0.35" '
            f'stroke="{color}" stroke-width="1.5"/>'
            f'<line class="arrow" x1="{_f(start[0])}" y1="{_f(start[1])}" x2="{_f(end[0])}" '
            f'y2="{_f(end[1])}" stroke="#111" stroke-width="2"/>'
            f'<text class="label" x="{_f(start[0])}" y="{_f(start[1] - 4)}" font-size="10" '
            f'text-anchor="middle">{escape(label)}</text>'
            "</g>"
        )
    parts.append("</svg>")
    return RenderedView(
        content="\n".join(parts) + "\n",
        scale=scale,
        origin=origin,
        width_px=width_px,
        height_px=height_px,
        room_px=(MARGIN_PX, MARGIN_PX, MARGIN_PX + W * scale, MARGIN_PX + D * scale),
        ticks=tuple(ticks),
        glyphs=tuple(glyphs),
    )


def raster_size(view: RenderedView, long_edge: int = RASTER_EDGE) -> tuple[int, int]:
    k = long_edge / max(view.width_px, view.height_px)
    return max(1, round(view.width_px * k)), max(1, round(view.height_px * k))


def rasterize_for_prompt(view: RenderedView, long_edge: int = RASTER_EDGE) -> bytes:
    """PNG of the view with its long edge scaled to ``long_edge`` pixels."""
    w, h = raster_size(view, long_edge)
    k = w / view.width_px
    img = Image.new("RGB", (w, h), "white")
    draw = ImageDraw.Draw(img)
    font = ImageFont.load_default()

    def p(pt):
        return (pt[0] * k, pt[1] * k)

    x0, y0, x1, y1 = view.room_px
    draw.rectangle([x0 * k, y0 * k, x1 * k, y1 * k], fill="#fafafa", outline="#222222", width=2)
    ox, oy = view.origin
    draw.line([p((ox, oy)), p((ox + 0.8 * view.scale, oy))], fill="#cc0000", width=2)
    draw.line([p((ox, oy)), p((ox, oy - 0.8 * view.scale))], fill="#008800", width=2)
    for _axis, x, y, t in view.ticks:
        draw.text(p((x, y)), t, fill="#333333", font=font, anchor="mm")
    for g in view.glyphs:
        draw.polygon([p(c) for c in g.polygon], outline=g.color, width=2)
        draw.line([p(g.arrow[0]), p(g.arrow[1])], fill="#111111", width=2)
        draw.text(p((g.label_at[0], g.label_at[1] - 4)), g.label, fill="#111111", font=font,
                  anchor="ms")
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    return buf.getvalue()
