"""SVG and PNG overlay rendering of aligned skeletons."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw

from .geometry import HEAD_A, HEAD_B, HEAD_C, Skeleton

# Fixed palette so renders are deterministic; colors cycle per skeleton.
PALETTE = (
    "#e6194b",
    "#3cb44b",
    "#4363d8",
    "#f58231",
    "#911eb4",
    "#46b5b5",
    "#f032e6",
    "#808000",
    "#9a6324",
    "#000075",
)

_HEAD_EDGE_SET = {
    frozenset((HEAD_A, HEAD_B)),
    frozenset((HEAD_B, HEAD_C)),
    frozenset((HEAD_C, HEAD_A)),
}


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _non_head_edges(s: Skeleton):
    for si, ki, sj, kj in s.edges:
        if si == sj and frozenset((ki, kj)) in _HEAD_EDGE_SET:
            continue
        yield si, ki, sj, kj


def skeleton_svg_group(
    s: Skeleton, color: str, stroke_width: float = 2.0, label: Optional[str] = None
) -> str:
    """One <g> element: head triangles as closed paths, other edges as lines."""
    parts = [f'<g stroke="{color}" stroke-width="{_fmt(stroke_width)}" fill="none"']
    if label:
        parts.append(f' data-label="{label}"')
    parts.append(">")
    for stroke in s.strokes:
        a, b, c = stroke.head_a, stroke.head_b, stroke.head_c
        parts.append(
            f'<path d="M {_fmt(a.x)} {_fmt(a.y)} L {_fmt(b.x)} {_fmt(b.y)} '
            f'L {_fmt(c.x)} {_fmt(c.y)} Z"/>'
        )
    for si, ki, sj, kj in _non_head_edges(s):
        p, q = s.keypoint(si, ki), s.keypoint(sj, kj)
        parts.append(
            f'<line x1="{_fmt(p.x)}" y1="{_fmt(p.y)}" '
            f'x2="{_fmt(q.x)}" y2="{_fmt(q.y)}"/>'
        )
    parts.append("</g>")
    return "".join(parts)


def svg_document(
    size: tuple[int, int],
    groups: Sequence[str],
    background_href: Optional[str] = None,
) -> str:
    """Standalone SVG with optional referenced background raster."""
    h, w = size
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
    ]
    if background_href:
        lines.append(
            f'<image href="{background_href}" x="0" y="0" '
            f'width="{w}" height="{h}"/>'
        )
    lines.extend(groups)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_overlay_png(
    image: np.ndarray,
    skeletons: Sequence[Skeleton],
    colors: Optional[Sequence[str]] = None,
    line_width: int = 2,
) -> Image.Image:
    """Rasterize skeleton outlines over a grayscale image."""
    base = Image.fromarray(np.asarray(image).astype(np.uint8)).convert("RGB")
    draw = ImageDraw.Draw(base)
    for idx, s in enumerate(skeletons):
        color = (colors or PALETTE)[idx % len(colors or PALETTE)]
        for stroke in s.strokes:
            head = [(p.x, p.y) for p in (stroke.head_a, stroke.head_b, stroke.head_c)]
            draw.polygon(head, outline=color, width=line_width)
        for si, ki, sj, kj in _non_head_edges(s):
            p, q = s.keypoint(si, ki), s.keypoint(sj, kj)
            draw.line([(p.x, p.y), (q.x, q.y)], fill=color, width=line_width)
    return base
