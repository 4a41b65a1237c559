"""Synthetic sign rendering with planted perturbations.

Renders skeletons as dark wedge glyphs on a light noisy ground and plants a
known global affine plus per-stroke keypoint jitter, giving an exact
ground-truth oracle for the alignment pipeline: the rendered image is
produced from the already-perturbed skeleton, so its keypoints are the
analytic ground truth by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from PIL import Image, ImageDraw

from .errors import CannotFitCanvas, OutOfCanvas
from .geometry import AffineTransform, Point, Skeleton, Stroke, transform_skeleton

_GLYPH_INTENSITY = 30
_GROUND_INTENSITY = 230
# Tail quadrilateral width at the tip, as a fraction of the base width.
_TIP_FRACTION = 0.25


@dataclass(frozen=True)
class PerturbSpec:
    """Magnitudes of the planted global and per-stroke perturbations."""

    rotation_max_deg: float = 10.0
    scale_range: tuple[float, float] = (0.9, 1.1)
    translation_max: float = 20.0
    per_stroke_jitter_max: float = 5.0
    rng_seed: int = 0

    def __post_init__(self):
        lo, hi = self.scale_range
        if lo <= 0 or hi <= 0 or lo > hi:
            raise ValueError("scale_range must be positive and ordered")
        for name in ("rotation_max_deg", "translation_max", "per_stroke_jitter_max"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class SynthCase:
    """One generated benchmark case."""

    target_image: np.ndarray
    gt_skeleton: Skeleton
    planted_transform: AffineTransform
    planted_jitter: np.ndarray  # (N, 4, 2) keypoint offsets


def _tail_quad(stroke: Stroke, width: float) -> list[tuple[float, float]]:
    """Quadrilateral tapering from the nearest head edge midpoint to the tail."""
    corners = [stroke.head_a, stroke.head_b, stroke.head_c]
    mids = [
        Point((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)
        for a, b in ((corners[0], corners[1]), (corners[1], corners[2]), (corners[2], corners[0]))
    ]
    tail = stroke.tail
    base = min(mids, key=lambda m: (m.x - tail.x) ** 2 + (m.y - tail.y) ** 2)
    dx, dy = tail.x - base.x, tail.y - base.y
    length = math.hypot(dx, dy)
    if length < 1e-9:
        # Tail collapses onto the head; draw a symmetric sliver instead.
        dx, dy, length = 1.0, 0.0, 1.0
    px, py = -dy / length, dx / length
    half = width / 2.0
    tip = half * _TIP_FRACTION
    return [
        (base.x + px * half, base.y + py * half),
        (tail.x + px * tip, tail.y + py * tip),
        (tail.x - px * tip, tail.y - py * tip),
        (base.x - px * half, base.y - py * half),
    ]


def render_skeleton(
    s: Skeleton,
    canvas: tuple[int, int] = (512, 512),
    stroke_width: float = 12.0,
    noise_sigma: float = 8.0,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Rasterize a skeleton as a grayscale glyph image.

    Each stroke contributes its filled head triangle plus a tail
    quadrilateral tapering from the nearest head edge midpoint to the tail
    point at the given base width. Additive Gaussian pixel noise with the
    given sigma is clamped to [0, 255]; rendering is deterministic for a
    fixed generator (a seed-0 generator is used when rng is omitted).

    Raises:
        OutOfCanvas: any keypoint outside the canvas.
    """
    h, w = canvas
    for p in s.all_keypoints():
        if not (0.0 <= p.x <= w and 0.0 <= p.y <= h):
            raise OutOfCanvas(f"keypoint ({p.x:.1f}, {p.y:.1f}) outside {w}x{h}")

    img = Image.new("L", (w, h), _GROUND_INTENSITY)
    draw = ImageDraw.Draw(img)
    for stroke in s.strokes:
        head = [(p.x, p.y) for p in (stroke.head_a, stroke.head_b, stroke.head_c)]
        draw.polygon(head, fill=_GLYPH_INTENSITY)
        draw.polygon(_tail_quad(stroke, stroke_width), fill=_GLYPH_INTENSITY)

    arr = np.asarray(img, dtype=np.float64)
    if noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng(0)
        arr = arr + rng.normal(0.0, noise_sigma, size=arr.shape)
    return np.clip(np.round(arr), 0, 255).astype(np.uint8)


def _jitter_skeleton(s: Skeleton, offsets: np.ndarray) -> Skeleton:
    strokes = []
    for i, stroke in enumerate(s.strokes):
        pts = [
            Point(p.x + float(offsets[i, k, 0]), p.y + float(offsets[i, k, 1]))
            for k, p in enumerate(stroke.keypoints)
        ]
        strokes.append(Stroke(*pts))
    return Skeleton(sign_name=s.sign_name, strokes=tuple(strokes), edges=s.edges)


def make_case(
    proto_skeleton: Skeleton,
    spec: PerturbSpec,
    canvas: tuple[int, int] = (512, 512),
    stroke_width: float = 12.0,
    noise_sigma: float = 8.0,
    max_attempts: int = 100,
) -> SynthCase:
    """Plant a random global affine plus per-stroke jitter and render it.

    The global transform combines rotation (<= rotation_max_deg), isotropic
    scale and translation about the canvas center; per-stroke jitter offsets
    every keypoint by a clipped Gaussian (sigma = jitter_max / 2, clipped at
    +-jitter_max). Draws that push keypoints off the canvas are retried.

    Raises:
        CannotFitCanvas: no draw fit within max_attempts.
    """
    rng = np.random.default_rng(spec.rng_seed)
    h, w = canvas
    center = Point(w / 2.0, h / 2.0)
    n = proto_skeleton.n_strokes

    for _ in range(max_attempts):
        angle = math.radians(rng.uniform(-spec.rotation_max_deg, spec.rotation_max_deg))
        scale = rng.uniform(*spec.scale_range)
        tx = rng.uniform(-spec.translation_max, spec.translation_max)
        ty = rng.uniform(-spec.translation_max, spec.translation_max)
        g = AffineTransform.translation(tx, ty).compose(
            AffineTransform.rotation_scale_about(center, angle, scale)
        )
        sigma = spec.per_stroke_jitter_max / 2.0
        if sigma > 0:
            jitter = np.clip(
                rng.normal(0.0, sigma, size=(n, 4, 2)),
                -spec.per_stroke_jitter_max,
                spec.per_stroke_jitter_max,
            )
        else:
            jitter = np.zeros((n, 4, 2))

        gt = _jitter_skeleton(transform_skeleton(proto_skeleton, g), jitter)
        if all(0.0 <= p.x <= w and 0.0 <= p.y <= h for p in gt.all_keypoints()):
            image = render_skeleton(gt, canvas, stroke_width, noise_sigma, rng=rng)
            return SynthCase(
                target_image=image,
                gt_skeleton=gt,
                planted_transform=g,
                planted_jitter=jitter,
            )
    raise CannotFitCanvas(f"no perturbation fit the canvas in {max_attempts} draws")


def demo_skeleton(sign_name: str = "demo", canvas: tuple[int, int] = (512, 512)) -> Skeleton:
    """A four-stroke sign spanning the canvas center, used by demos and CLI.

    Strokes differ in size and orientation; repeated identical wedges are
    the known-hard case for appearance matching, so the demo sign avoids
    them on purpose.
    """
    h, w = canvas
    sx, sy = w / 512.0, h / 512.0

    def stroke(head, tail):
        return Stroke(
            Point(head[0][0] * sx, head[0][1] * sy),
            Point(head[1][0] * sx, head[1][1] * sy),
            Point(head[2][0] * sx, head[2][1] * sy),
            Point(tail[0] * sx, tail[1] * sy),
        )

    strokes = (
        stroke([(120, 130), (120, 190), (172, 160)], (360, 160)),
        stroke([(150, 250), (150, 286), (182, 268)], (320, 330)),
        stroke([(250, 110), (298, 110), (274, 154)], (274, 300)),
        stroke([(330, 240), (378, 216), (382, 264)], (430, 330)),
    )
    return Skeleton(sign_name=sign_name, strokes=strokes)
