"""Homogeneous 2-D geometry: points, strokes, skeletons and their transforms.

Coordinates are continuous pixels with the origin at the top-left image
corner, x growing rightward and y downward; an H x W image therefore spans
[0, W] x [0, H]. Transforms act on homogeneous column vectors [x, y, 1]^T.
All types are immutable and all operations are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateProjection, DegenerateTransform, RankDeficient

# Keypoint indices within a stroke. Index 4 addresses the derived head
# centroid so that centroid-to-tail segments are expressible in the
# keypoint-indexed edge format; it is not a stored keypoint.
HEAD_A, HEAD_B, HEAD_C, TAIL = 0, 1, 2, 3
HEAD_CENTROID = 4

_DET_EPS = 1e-9
_PROJ_EPS = 1e-9


def _require_finite(label: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{label} must be finite, got {v!r}")


@dataclass(frozen=True)
class Point:
    """A continuous 2-D pixel location."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        _require_finite("Point coordinate", self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class Stroke:
    """One wedge impression: a triangular head (3 corners) plus a tail end."""

    head_a: Point
    head_b: Point
    head_c: Point
    tail: Point

    @property
    def keypoints(self) -> tuple[Point, Point, Point, Point]:
        return (self.head_a, self.head_b, self.head_c, self.tail)

    @property
    def head_centroid(self) -> Point:
        return Point(
            (self.head_a.x + self.head_b.x + self.head_c.x) / 3.0,
            (self.head_a.y + self.head_b.y + self.head_c.y) / 3.0,
        )

    def head_area(self) -> float:
        """Signed area x2 of the head triangle; 0 means collinear corners."""
        ax, ay = self.head_a.x, self.head_a.y
        return (self.head_b.x - ax) * (self.head_c.y - ay) - (
            self.head_c.x - ax
        ) * (self.head_b.y - ay)


Edge = tuple[int, int, int, int]


def default_edges(n_strokes: int) -> tuple[Edge, ...]:
    """Per-stroke default drawing: the head triangle plus centroid-to-tail."""
    edges: list[Edge] = []
    for i in range(n_strokes):
        edges.extend(
            [
                (i, HEAD_A, i, HEAD_B),
                (i, HEAD_B, i, HEAD_C),
                (i, HEAD_C, i, HEAD_A),
                (i, HEAD_CENTROID, i, TAIL),
            ]
        )
    return tuple(edges)


@dataclass(frozen=True)
class Skeleton:
    """A sign's stroke graph: ordered strokes plus drawn line segments.

    Edges are (stroke_index, keypoint_index, stroke_index, keypoint_index)
    tuples; keypoint indices 0..3 address the stored keypoints and 4 the
    derived head centroid. Every stroke must contribute at least one edge.
    """

    sign_name: str
    strokes: tuple[Stroke, ...]
    edges: tuple[Edge, ...] = field(default=())

    def __post_init__(self):
        if len(self.strokes) < 1:
            raise ValueError("skeleton needs at least one stroke")
        object.__setattr__(self, "strokes", tuple(self.strokes))
        edges = tuple(tuple(int(v) for v in e) for e in self.edges)
        if not edges:
            edges = default_edges(len(self.strokes))
        n = len(self.strokes)
        touched = set()
        for e in edges:
            si, ki, sj, kj = e
            if not (0 <= si < n and 0 <= sj < n):
                raise ValueError(f"edge {e} references a stroke out of range")
            if not (0 <= ki <= HEAD_CENTROID and 0 <= kj <= HEAD_CENTROID):
                raise ValueError(f"edge {e} references a keypoint out of range")
            touched.add(si)
            touched.add(sj)
        if touched != set(range(n)):
            missing = sorted(set(range(n)) - touched)
            raise ValueError(f"strokes {missing} contribute no edge")
        object.__setattr__(self, "edges", edges)

    @property
    def n_strokes(self) -> int:
        return len(self.strokes)

    def keypoint(self, stroke_index: int, keypoint_index: int) -> Point:
        stroke = self.strokes[stroke_index]
        if keypoint_index == HEAD_CENTROID:
            return stroke.head_centroid
        return stroke.keypoints[keypoint_index]

    def all_keypoints(self) -> list[Point]:
        """The 4N stored keypoints, stroke-major, head corners before tail."""
        out: list[Point] = []
        for s in self.strokes:
            out.extend(s.keypoints)
        return out

    def edge_segments(self) -> list[tuple[int, Point, Point]]:
        """Edges resolved to point pairs, tagged with the first stroke index."""
        return [
            (si, self.keypoint(si, ki), self.keypoint(sj, kj))
            for (si, ki, sj, kj) in self.edges
        ]


@dataclass(frozen=True)
class AffineTransform:
    """Invertible 2-D affine map; the homogeneous bottom row is [0, 0, 1]."""

    g11: float = 1.0
    g12: float = 0.0
    g13: float = 0.0
    g21: float = 0.0
    g22: float = 1.0
    g23: float = 0.0

    def __post_init__(self):
        for name in ("g11", "g12", "g13", "g21", "g22", "g23"):
            object.__setattr__(self, name, float(getattr(self, name)))
        _require_finite(
            "Affine entry", self.g11, self.g12, self.g13, self.g21, self.g22, self.g23
        )
        if abs(self.determinant) < _DET_EPS:
            raise DegenerateTransform(
                f"linear part is singular (det={self.determinant:.3e})"
            )

    @property
    def determinant(self) -> float:
        return self.g11 * self.g22 - self.g12 * self.g21

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls()

    @classmethod
    def translation(cls, tx: float, ty: float) -> "AffineTransform":
        return cls(g13=tx, g23=ty)

    @classmethod
    def scaling(cls, sx: float, sy: Optional[float] = None) -> "AffineTransform":
        return cls(g11=sx, g22=sx if sy is None else sy)

    @classmethod
    def rotation_scale_about(
        cls, center: Point, radians: float, scale: float = 1.0
    ) -> "AffineTransform":
        """Rotation by `radians` and isotropic scaling about `center`."""
        c, s = scale * math.cos(radians), scale * math.sin(radians)
        tx = center.x - c * center.x + s * center.y
        ty = center.y - s * center.x - c * center.y
        return cls(g11=c, g12=-s, g13=tx, g21=s, g22=c, g23=ty)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "AffineTransform":
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3) or not np.allclose(m[2], [0.0, 0.0, 1.0], atol=1e-12):
            raise ValueError("expected a 3x3 matrix with bottom row [0, 0, 1]")
        return cls(m[0, 0], m[0, 1], m[0, 2], m[1, 0], m[1, 1], m[1, 2])

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.g11, self.g12, self.g13],
                [self.g21, self.g22, self.g23],
                [0.0, 0.0, 1.0],
            ]
        )

    def compose(self, other: "AffineTransform") -> "AffineTransform":
        """self after other: (self.compose(other))(p) == self(other(p))."""
        return AffineTransform.from_matrix(self.matrix() @ other.matrix())

    def invert(self) -> "AffineTransform":
        return AffineTransform.from_matrix(np.linalg.inv(self.matrix()))


@dataclass(frozen=True)
class StrokeTransform:
    """Per-stroke projective perturbation, identity + delta with p33 = 0."""

    p11: float = 0.0
    p12: float = 0.0
    p13: float = 0.0
    p21: float = 0.0
    p22: float = 0.0
    p23: float = 0.0
    p31: float = 0.0
    p32: float = 0.0

    def __post_init__(self):
        for name in ("p11", "p12", "p13", "p21", "p22", "p23", "p31", "p32"):
            object.__setattr__(self, name, float(getattr(self, name)))
        _require_finite("Stroke-transform entry", *self.params())

    @classmethod
    def zero(cls) -> "StrokeTransform":
        return cls()

    @classmethod
    def from_params(cls, params: Sequence[float]) -> "StrokeTransform":
        p = [float(v) for v in params]
        if len(p) != 8:
            raise ValueError("expected 8 parameters")
        return cls(*p)

    def params(self) -> tuple[float, ...]:
        return (
            self.p11,
            self.p12,
            self.p13,
            self.p21,
            self.p22,
            self.p23,
            self.p31,
            self.p32,
        )

    def matrix(self) -> np.ndarray:
        return np.eye(3) + np.array(
            [
                [self.p11, self.p12, self.p13],
                [self.p21, self.p22, self.p23],
                [self.p31, self.p32, 0.0],
            ]
        )


def apply_affine(t: AffineTransform, p: Point) -> Point:
    """Map a point by the affine transform."""
    return Point(
        t.g11 * p.x + t.g12 * p.y + t.g13,
        t.g21 * p.x + t.g22 * p.y + t.g23,
    )


def apply_affine_batch(t: AffineTransform, pts: np.ndarray) -> np.ndarray:
    """Vectorized apply_affine for an (n, 2) array of points."""
    pts = np.asarray(pts, dtype=float)
    lin = np.array([[t.g11, t.g12], [t.g21, t.g22]])
    return pts @ lin.T + np.array([t.g13, t.g23])


def apply_projective(p_mat: StrokeTransform, g: AffineTransform, pt: Point) -> Point:
    """Map a point by P.G in projective space and dehomogenize.

    Raises:
        DegenerateProjection: if the homogeneous scale z' vanishes.
    """
    m = p_mat.matrix() @ g.matrix()
    v = m @ np.array([pt.x, pt.y, 1.0])
    if abs(v[2]) < _PROJ_EPS:
        raise DegenerateProjection(f"z' = {v[2]:.3e} for point ({pt.x}, {pt.y})")
    return Point(v[0] / v[2], v[1] / v[2])


def _fit_affine_arrays(src: np.ndarray, dst: np.ndarray) -> AffineTransform:
    n = src.shape[0]
    a = np.zeros((2 * n, 6))
    a[0::2, 0] = src[:, 0]
    a[0::2, 1] = src[:, 1]
    a[0::2, 2] = 1.0
    a[1::2, 3] = src[:, 0]
    a[1::2, 4] = src[:, 1]
    a[1::2, 5] = 1.0
    b = dst.reshape(-1)
    sol, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < 6:
        raise RankDeficient(f"design matrix rank {rank} < 6")
    return AffineTransform(sol[0], sol[1], sol[2], sol[3], sol[4], sol[5])


def fit_affine_least_squares(
    src: Sequence[Point], dst: Sequence[Point]
) -> AffineTransform:
    """Least-squares affine minimizing sum ||G.src_i - dst_i||^2.

    Args:
        src: source points (at least 3, not all collinear).
        dst: target points, same length as src.

    Raises:
        RankDeficient: if the design matrix is singular (collinear or
            repeated source points, or fewer than 3 pairs).
        DegenerateTransform: if the fitted linear part is singular.
    """
    if len(src) != len(dst):
        raise ValueError("src and dst must have the same length")
    s = np.array([[p.x, p.y] for p in src], dtype=float)
    d = np.array([[p.x, p.y] for p in dst], dtype=float)
    return _fit_affine_arrays(s, d)


def transform_skeleton(
    s: Skeleton,
    g: AffineTransform,
    locals_: Optional[Sequence[StrokeTransform]] = None,
) -> Skeleton:
    """Map every keypoint of stroke i by P_i.G (or by G alone).

    Stroke count and the edge list are preserved exactly.
    """
    if locals_ is not None and len(locals_) != s.n_strokes:
        raise ValueError(
            f"expected {s.n_strokes} local transforms, got {len(locals_)}"
        )
    strokes = []
    for i, stroke in enumerate(s.strokes):
        if locals_ is None:
            mapped = [apply_affine(g, p) for p in stroke.keypoints]
        else:
            mapped = [apply_projective(locals_[i], g, p) for p in stroke.keypoints]
        strokes.append(Stroke(*mapped))
    return Skeleton(sign_name=s.sign_name, strokes=tuple(strokes), edges=s.edges)


# ---------------------------------------------------------------------------
# Skeleton JSON format:
#   {"sign": str,
#    "strokes": [{"head": [[x,y],[x,y],[x,y]], "tail": [x,y]}, ...],
#    "edges": [[si,ki,sj,kj], ...]}          (optional)
# ---------------------------------------------------------------------------


def skeleton_from_dict(d: dict, check_heads: bool = True) -> Skeleton:
    """Build a skeleton from its JSON dict form.

    check_heads rejects strokes whose head corners are collinear; prototype
    inputs are expected to pass, transformed outputs may legitimately not.
    """
    strokes = []
    for idx, sd in enumerate(d["strokes"]):
        head = sd["head"]
        if len(head) != 3:
            raise ValueError(f"stroke {idx}: expected 3 head corners")
        stroke = Stroke(
            Point(float(head[0][0]), float(head[0][1])),
            Point(float(head[1][0]), float(head[1][1])),
            Point(float(head[2][0]), float(head[2][1])),
            Point(float(sd["tail"][0]), float(sd["tail"][1])),
        )
        if check_heads and abs(stroke.head_area()) < 1e-9:
            raise ValueError(f"stroke {idx}: head corners are collinear")
        strokes.append(stroke)
    edges = tuple(tuple(int(v) for v in e) for e in d.get("edges", []))
    return Skeleton(
        sign_name=str(d.get("sign", "")), strokes=tuple(strokes), edges=edges
    )


def skeleton_to_dict(s: Skeleton) -> dict:
    return {
        "sign": s.sign_name,
        "strokes": [
            {
                "head": [[p.x, p.y] for p in st.keypoints[:3]],
                "tail": [st.tail.x, st.tail.y],
            }
            for st in s.strokes
        ],
        "edges": [list(e) for e in s.edges],
    }


def load_skeleton(path: str | Path, check_heads: bool = True) -> Skeleton:
    with open(path, "r", encoding="utf-8") as fh:
        return skeleton_from_dict(json.load(fh), check_heads=check_heads)


def save_skeleton(s: Skeleton, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(skeleton_to_dict(s), fh, indent=2, sort_keys=True)
        fh.write("\n")
