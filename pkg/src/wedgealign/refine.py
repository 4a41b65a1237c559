"""Per-stroke projective refinement by gradient descent.

Minimizes lambda_sim * L_sim + lambda_sal * L_sal + lambda_reg * L_reg over
the per-stroke perturbation parameters, where L_sim and L_sal are negated
mean field values sampled along the transformed skeleton (so that a single
minimizer maximizes feature similarity and saliency coverage), and
L_reg = L_l1 + L_oob penalizes large perturbations and keypoints leaving
the image.

Optimization runs over a dimensionless reparameterization of the stroke
transforms: each of the 8 raw parameters is divided by a fixed scale chosen
so that one parameter unit moves points by O(1) pixels regardless of which
entry it is (raw translation, linear and perspective entries differ in
pixel sensitivity by orders of magnitude, which no first-order optimizer
step size can serve simultaneously). Gradients, the L1 penalty and Adam all
operate on the scaled parameters; the exported StrokeTransforms are ordinary
pixel-space transforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateProjection
from .features import SimilarityVolume, pixel_to_grid_coords
from .geometry import (
    AffineTransform,
    Point,
    Skeleton,
    StrokeTransform,
    transform_skeleton,
)
from .saliency import SaliencyMap

_PROJ_EPS = 1e-9


@dataclass(frozen=True)
class RefineConfig:
    """Loss weights and optimizer settings for local refinement."""

    lambda_sim: float = 1.0
    lambda_sal: float = 3e-4
    lambda_reg: float = 1e-4
    iterations: int = 100
    learning_rate: float = 0.01
    softmax_temperature: float = 100.0
    points_per_segment: int = 8
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    rng_seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        for name in ("learning_rate", "softmax_temperature"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("lambda_sim", "lambda_sal", "lambda_reg"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.points_per_segment < 0:
            raise ValueError("points_per_segment must be non-negative")


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    sim: float
    sal: float
    l1: float
    oob: float

    @property
    def reg(self) -> float:
        return self.l1 + self.oob


@dataclass(frozen=True)
class RefinementResult:
    locals: tuple[StrokeTransform, ...]
    loss_trace: tuple[LossBreakdown, ...]
    final_skeleton: Skeleton


def param_scales(image_size: tuple[int, int]) -> np.ndarray:
    """Pixel-sensitivity scales mapping dimensionless params to raw ones."""
    h, w = image_size
    side = 0.5 * (h + w)
    lin = 2.0 / side
    proj = 4.0 / side**2
    return np.array([lin, lin, 1.0, lin, lin, 1.0, proj, proj])


def locals_from_params(theta: np.ndarray, image_size: tuple[int, int]):
    """Dimensionless (N, 8) parameters -> pixel-space StrokeTransforms."""
    scales = param_scales(image_size)
    return [StrokeTransform.from_params(row * scales) for row in np.atleast_2d(theta)]


def params_from_locals(
    locals_: Sequence[StrokeTransform], image_size: tuple[int, int]
) -> np.ndarray:
    """Inverse of locals_from_params."""
    scales = param_scales(image_size)
    return np.array([t.params() for t in locals_], dtype=float) / scales


def sample_skeleton_points(
    s: Skeleton, points_per_segment: int, rng: np.random.Generator
) -> list[tuple[int, Point]]:
    """All keypoints plus random interior points on every edge.

    Returns (stroke_index, point) pairs: the 4N keypoints first (stroke
    order), then points_per_segment uniform-random points per edge, tagged
    with the edge's first stroke. A fixed-seed generator reproduces the set.
    """
    out: list[tuple[int, Point]] = []
    for i, stroke in enumerate(s.strokes):
        out.extend((i, p) for p in stroke.keypoints)
    for si, a, b in s.edge_segments():
        ts = rng.random(points_per_segment)
        for t in ts:
            out.append((si, Point(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))))
    return out


def softmax_field(field: np.ndarray, temperature: float) -> np.ndarray:
    """Temperature-weighted softmax over all entries, max-stabilized."""
    z = temperature * np.asarray(field, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _gather_zero(fields: np.ndarray, idx: np.ndarray, r: np.ndarray, c: np.ndarray):
    """fields[idx, r, c] with zero padding outside the grid."""
    _, h, w = fields.shape
    valid = (r >= 0) & (r < h) & (c >= 0) & (c < w)
    vals = fields[idx, np.clip(r, 0, h - 1), np.clip(c, 0, w - 1)]
    return np.where(valid, vals, 0.0)


def _bilinear_with_grad(fields: np.ndarray, rows: np.ndarray, cols: np.ndarray):
    """Bilinear samples of per-sample fields, with d/drow and d/dcol.

    fields is (n, H, W); rows/cols are fractional grid coordinates (n,).
    Out-of-grid corners contribute zeros (zero padding).
    """
    n = fields.shape[0]
    idx = np.arange(n)
    r0 = np.floor(rows).astype(int)
    c0 = np.floor(cols).astype(int)
    dr = rows - r0
    dc = cols - c0
    v00 = _gather_zero(fields, idx, r0, c0)
    v01 = _gather_zero(fields, idx, r0, c0 + 1)
    v10 = _gather_zero(fields, idx, r0 + 1, c0)
    v11 = _gather_zero(fields, idx, r0 + 1, c0 + 1)
    val = (1 - dr) * (1 - dc) * v00 + (1 - dr) * dc * v01 + dr * (1 - dc) * v10 + dr * dc * v11
    d_dr = (1 - dc) * (v10 - v00) + dc * (v11 - v01)
    d_dc = (1 - dr) * (v01 - v00) + dr * (v11 - v10)
    return val, d_dr, d_dc


def _project_scaled(
    pts: np.ndarray,
    stroke_ids: np.ndarray,
    theta: np.ndarray,
    g: AffineTransform,
    scales: np.ndarray,
):
    """Map points by (I + delta_i).G where delta_i = theta_i * scales.

    Returns (qx, qy, aux) with aux carrying the intermediates needed by the
    chain rule: u (affine-mapped inputs), homogeneous x', y', z'.
    """
    u = pts @ np.array([[g.g11, g.g21], [g.g12, g.g22]]) + np.array([g.g13, g.g23])
    ux, uy = u[:, 0], u[:, 1]
    d = theta[stroke_ids] * scales
    xp = ux + d[:, 0] * ux + d[:, 1] * uy + d[:, 2]
    yp = uy + d[:, 3] * ux + d[:, 4] * uy + d[:, 5]
    zp = 1.0 + d[:, 6] * ux + d[:, 7] * uy
    if np.any(np.abs(zp) < _PROJ_EPS):
        raise DegenerateProjection("a sample's homogeneous scale vanished")
    return xp / zp, yp / zp, (ux, uy, xp, yp, zp)


def _accumulate_point_grads(
    grad: np.ndarray,
    stroke_ids: np.ndarray,
    gqx: np.ndarray,
    gqy: np.ndarray,
    aux,
    scales: np.ndarray,
) -> None:
    """Scatter d(loss)/d(theta) contributions given d(loss)/d(q')."""
    ux, uy, xp, yp, zp = aux
    inv_z = 1.0 / zp
    gz = -(gqx * xp + gqy * yp) * inv_z**2
    cols = (
        gqx * ux * inv_z,
        gqx * uy * inv_z,
        gqx * inv_z,
        gqy * ux * inv_z,
        gqy * uy * inv_z,
        gqy * inv_z,
        gz * ux,
        gz * uy,
    )
    for k, col in enumerate(cols):
        np.add.at(grad, (stroke_ids, k), col * scales[k])


def loss_and_gradient(
    volume: SimilarityVolume,
    sal: SaliencyMap,
    skeleton: Skeleton,
    g: AffineTransform,
    locals_: Sequence[StrokeTransform],
    samples: Sequence[tuple[int, Point]],
    cfg: RefineConfig,
    slice_cache: Optional[dict] = None,
    sal_field: Optional[np.ndarray] = None,
) -> tuple[LossBreakdown, np.ndarray]:
    """Total loss and its analytic gradient.

    The gradient is taken with respect to the dimensionless per-stroke
    parameters (see param_scales); shape (N, 8), row i belonging to
    locals_[i]. Sub-gradients: 0 for |.| at 0, and the out-of-bounds term
    differentiates only its arg-max coordinate (ties to the lowest index).

    For each sample the similarity slice is the temperature-softmaxed 2-D
    target slice at the sample's nearest prototype grid cell, sampled at the
    transformed position minus the sample's sub-cell offset (correspondence-
    consistent sampling; see the inline note). Slices are cached in
    slice_cache (they do not depend on the parameters).
    """
    if len(locals_) != skeleton.n_strokes:
        raise ValueError("one local transform per stroke is required")
    n_strokes = skeleton.n_strokes
    tgt_size = volume.target_image_size
    scales = param_scales(tgt_size)
    theta = params_from_locals(locals_, tgt_size)
    if slice_cache is None:
        slice_cache = {}
    if sal_field is None:
        sal_field = softmax_field(sal.values, cfg.softmax_temperature)

    stroke_ids = np.array([s for s, _ in samples], dtype=int)
    pts = np.array([[p.x, p.y] for _, p in samples], dtype=float)
    n = len(samples)

    qx, qy, aux = _project_scaled(pts, stroke_ids, theta, g, scales)

    # Similarity slices, keyed by the nearest prototype cell of each sample.
    # The sample's sub-cell offset within that cell is subtracted from the
    # sampling coordinate below, so a stroke that already sits exactly where
    # its features match is a true optimum; sampling the slice at the raw
    # transformed position instead would drag every sample onto the matched
    # cell's center, biasing even a perfect alignment by up to half a cell.
    ph, pw = volume.proto_grid_shape
    prow, pcol = pixel_to_grid_coords(pts[:, 0], pts[:, 1], (ph, pw), volume.proto_image_size)
    cell_r = np.clip(np.rint(prow).astype(int), 0, ph - 1)
    cell_c = np.clip(np.rint(pcol).astype(int), 0, pw - 1)
    sub_r = prow - cell_r
    sub_c = pcol - cell_c
    fields = np.empty((n,) + volume.target_grid_shape)
    for i, cell in enumerate(zip(cell_r, cell_c)):
        cached = slice_cache.get(cell)
        if cached is None:
            cached = softmax_field(volume.data[cell], cfg.softmax_temperature)
            slice_cache[cell] = cached
        fields[i] = cached

    th, tw = volume.target_grid_shape
    grow, gcol = pixel_to_grid_coords(qx, qy, (th, tw), tgt_size)
    sim_val, sim_dr, sim_dc = _bilinear_with_grad(fields, grow - sub_r, gcol - sub_c)
    sal_fields = np.broadcast_to(sal_field, (n,) + sal_field.shape)
    sal_val, sal_dr, sal_dc = _bilinear_with_grad(sal_fields, grow, gcol)

    loss_sim = -float(sim_val.mean())
    loss_sal = -float(sal_val.mean())

    grad = np.zeros((n_strokes, 8))
    d_dr = -(cfg.lambda_sim * sim_dr + cfg.lambda_sal * sal_dr) / n
    d_dc = -(cfg.lambda_sim * sim_dc + cfg.lambda_sal * sal_dc) / n
    kx = tw / tgt_size[1]
    ky = th / tgt_size[0]
    _accumulate_point_grads(grad, stroke_ids, d_dc * kx, d_dr * ky, aux, scales)

    # L1 on the scaled parameters.
    loss_l1 = float(np.abs(theta).sum()) / n_strokes
    grad += cfg.lambda_reg * np.sign(theta) / n_strokes

    # Out-of-bounds: keypoints only, max violation over coordinates.
    kp_ids = np.repeat(np.arange(n_strokes), 4)
    kp_pts = np.array([[p.x, p.y] for p in skeleton.all_keypoints()], dtype=float)
    kqx, kqy, kaux = _project_scaled(kp_pts, kp_ids, theta, g, scales)
    bounds = np.array([tgt_size[1], tgt_size[0]], dtype=float)  # x then y
    coords = np.column_stack([kqx, kqy])
    violation = np.maximum(np.maximum(-coords, coords - bounds), 0.0)
    loss_oob = float(violation.max()) if violation.size else 0.0
    if loss_oob > 0.0:
        flat = int(np.argmax(violation))
        kp_i, axis = divmod(flat, 2)
        value = coords[kp_i, axis]
        side = 1.0 if value > bounds[axis] else -1.0
        sel = np.array([kp_i])
        gqx = np.array([side if axis == 0 else 0.0]) * cfg.lambda_reg
        gqy = np.array([side if axis == 1 else 0.0]) * cfg.lambda_reg
        kaux_sel = tuple(a[sel] for a in kaux)
        _accumulate_point_grads(grad, kp_ids[sel], gqx, gqy, kaux_sel, scales)

    total = (
        cfg.lambda_sim * loss_sim
        + cfg.lambda_sal * loss_sal
        + cfg.lambda_reg * (loss_l1 + loss_oob)
    )
    return LossBreakdown(total, loss_sim, loss_sal, loss_l1, loss_oob), grad


class _Adam:
    """Plain Adam with bias correction over an (N, 8) parameter array."""

    def __init__(self, shape, cfg: RefineConfig):
        self.cfg = cfg
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        c = self.cfg
        self.t += 1
        self.m = c.adam_beta1 * self.m + (1 - c.adam_beta1) * grad
        self.v = c.adam_beta2 * self.v + (1 - c.adam_beta2) * grad**2
        m_hat = self.m / (1 - c.adam_beta1**self.t)
        v_hat = self.v / (1 - c.adam_beta2**self.t)
        return theta - c.learning_rate * m_hat / (np.sqrt(v_hat) + c.adam_eps)


def refine(
    volume: SimilarityVolume,
    sal: SaliencyMap,
    skeleton: Skeleton,
    g: AffineTransform,
    cfg: RefineConfig,
) -> RefinementResult:
    """Optimize all per-stroke transforms jointly with Adam.

    Local transforms start at the identity. Segment points are resampled
    every iteration (keypoints stay fixed); the loss trace records one entry
    per iteration, evaluated before that iteration's update. The trajectory
    is fully reproducible for a fixed cfg.rng_seed.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    theta = np.zeros((skeleton.n_strokes, 8))
    sal_field = softmax_field(sal.values, cfg.softmax_temperature)
    cache: dict = {}
    adam = _Adam(theta.shape, cfg)
    trace: list[LossBreakdown] = []
    tgt_size = volume.target_image_size
    for _ in range(cfg.iterations):
        samples = sample_skeleton_points(skeleton, cfg.points_per_segment, rng)
        loss, grad = loss_and_gradient(
            volume,
            sal,
            skeleton,
            g,
            locals_from_params(theta, tgt_size),
            samples,
            cfg,
            slice_cache=cache,
            sal_field=sal_field,
        )
        theta = adam.step(theta, grad)
        trace.append(loss)
    locals_ = locals_from_params(theta, tgt_size)
    return RefinementResult(
        locals=tuple(locals_),
        loss_trace=tuple(trace),
        final_skeleton=transform_skeleton(skeleton, g, locals_),
    )


def loss_trace_to_csv(trace: Sequence[LossBreakdown]) -> str:
    """Debug CSV: iteration, total, sim, sal, l1, oob."""
    lines = ["iteration,total,sim,sal,l1,oob"]
    for i, row in enumerate(trace):
        lines.append(
            f"{i},{row.total:.9g},{row.sim:.9g},{row.sal:.9g},"
            f"{row.l1:.9g},{row.oob:.9g}"
        )
    return "\n".join(lines) + "\n"
