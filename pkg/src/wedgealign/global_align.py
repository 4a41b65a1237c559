"""Global affine alignment: RANSAC over best buddies, multi-run selection.

Each run recomputes features, the similarity volume, best-buddy
correspondences and a RANSAC affine fit, then scores the result by how well
the inlier points spread over the glyph and the target image (product of the
two convex-hull coverage fractions). The best-scoring run wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .correspondence import Correspondence, best_buddies, filter_foreground
from .errors import (
    AllRunsFailed,
    DegenerateTransform,
    NoValidModel,
    RankDeficient,
    TooFewCorrespondences,
    WedgeAlignError,
)
from .features import FeatureMap, similarity_volume
from .geometry import AffineTransform, _fit_affine_arrays, apply_affine_batch

# Inlier threshold units are target pixels at this reference size; other
# image sizes scale the threshold proportionally.
_REFERENCE_SIZE = 512.0


@dataclass(frozen=True)
class RansacConfig:
    """Knobs for the robust affine fit."""

    iterations: int = 2000
    sample_size: int = 5
    inlier_threshold: float = 50.0
    runs: int = 8
    rng_seed: int = 0
    refit: bool = True
    foreground_threshold: float = 128.0

    def __post_init__(self):
        if self.sample_size < 3:
            raise ValueError("sample_size must be at least 3")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if self.runs < 1:
            raise ValueError("runs must be positive")


@dataclass(frozen=True)
class RunSummary:
    run_index: int
    n_correspondences: int = 0
    n_inliers: int = 0
    p_proto: float = 0.0
    p_scan: float = 0.0
    score: float = 0.0
    error: Optional[str] = None

    def to_jsonable(self) -> dict:
        return {
            "run": self.run_index,
            "correspondences": self.n_correspondences,
            "inliers": self.n_inliers,
            "p_proto": self.p_proto,
            "p_scan": self.p_scan,
            "score": self.score,
            "error": self.error,
        }


@dataclass(frozen=True)
class GlobalAlignment:
    """Winning run of the global stage."""

    transform: AffineTransform
    inliers: tuple[Correspondence, ...]
    spread_score: float
    p_proto: float
    p_scan: float
    run_summaries: tuple[RunSummary, ...] = field(default=(), repr=False)
    volume: object = field(default=None, repr=False)  # winning SimilarityVolume


def ransac_affine(
    corrs: Sequence[Correspondence],
    cfg: RansacConfig,
    rng: Optional[np.random.Generator] = None,
    target_size: Optional[tuple[int, int]] = None,
) -> tuple[AffineTransform, list[Correspondence]]:
    """Robust affine fit over correspondences.

    Samples cfg.sample_size correspondences per trial, fits by least
    squares, and counts correspondences whose forward-mapped prototype point
    lands within the inlier threshold (measured in the target frame). The
    transform with the most inliers wins; rank-deficient samples are skipped.
    With cfg.refit the winner is re-fit on its full inlier set.

    Raises:
        TooFewCorrespondences: fewer correspondences than the sample size.
        NoValidModel: every sampled subset was degenerate.
    """
    n = len(corrs)
    if n < cfg.sample_size:
        raise TooFewCorrespondences(f"{n} correspondences < {cfg.sample_size}")
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)

    src = np.array([[c.proto.x, c.proto.y] for c in corrs])
    dst = np.array([[c.target.x, c.target.y] for c in corrs])
    threshold = cfg.inlier_threshold
    if target_size is not None:
        threshold *= (target_size[0] + target_size[1]) / (2.0 * _REFERENCE_SIZE)

    best_count = 0
    best_transform: Optional[AffineTransform] = None
    best_mask: Optional[np.ndarray] = None
    for _ in range(cfg.iterations):
        idx = rng.choice(n, size=cfg.sample_size, replace=False)
        try:
            model = _fit_affine_arrays(src[idx], dst[idx])
        except (RankDeficient, DegenerateTransform):
            continue
        residuals = np.linalg.norm(apply_affine_batch(model, src) - dst, axis=1)
        mask = residuals < threshold
        count = int(mask.sum())
        if count > best_count:
            best_count, best_transform, best_mask = count, model, mask

    if best_transform is None:
        raise NoValidModel("all sampled subsets were rank-deficient")

    inlier_idx = np.flatnonzero(best_mask)
    transform = best_transform
    if cfg.refit:
        transform = _polish(best_transform, src, dst, inlier_idx, threshold)
    return transform, [corrs[i] for i in inlier_idx]


def _polish(
    model: AffineTransform,
    src: np.ndarray,
    dst: np.ndarray,
    inlier_idx: np.ndarray,
    threshold: float,
) -> AffineTransform:
    """Least-squares refit with a shrinking inlier threshold.

    A single refit on the full inlier set lets stray matches just inside the
    (generous) threshold drag the fit by several pixels, so the threshold is
    halved for a few rounds, floored at threshold / 5 to keep the genuine
    matches whose residuals reflect feature-grid quantization.
    """
    current = inlier_idx
    for k in (1, 2, 3):
        if current.size < 3:
            break
        try:
            model = _fit_affine_arrays(src[current], dst[current])
        except (RankDeficient, DegenerateTransform):
            break
        shrunk = max(threshold / 2.0**k, threshold / 5.0)
        residuals = np.linalg.norm(
            apply_affine_batch(model, src[current]) - dst[current], axis=1
        )
        current = current[residuals < shrunk]
    return model


def _hull_or_none(points: np.ndarray) -> Optional[ConvexHull]:
    if points.shape[0] < 3:
        return None
    try:
        return ConvexHull(points)
    except QhullError:
        return None  # collinear or otherwise degenerate


def spread_score(
    inliers: Sequence[Correspondence],
    proto_image: np.ndarray,
    target_size: tuple[int, int],
) -> tuple[float, float]:
    """Coverage fractions of the inlier convex hulls.

    p_proto is the fraction of prototype foreground pixels (intensity < 128)
    whose centers lie inside the hull of the inlier prototype points; p_scan
    is the hull area of the inlier target points over the target image area.
    Fewer than 3 non-collinear points make the respective component 0.
    """
    img = np.asarray(proto_image)
    p_proto = 0.0
    p_scan = 0.0

    if inliers:
        proto_pts = np.array([[c.proto.x, c.proto.y] for c in inliers])
        target_pts = np.array([[c.target.x, c.target.y] for c in inliers])

        hull = _hull_or_none(proto_pts)
        if hull is not None:
            rows, cols = np.nonzero(img < 128)
            if rows.size:
                centers = np.column_stack([cols + 0.5, rows + 0.5])
                # Inside test against the hull half-space equations.
                a = hull.equations[:, :2]
                b = hull.equations[:, 2]
                inside = np.all(centers @ a.T + b <= 1e-9, axis=1)
                p_proto = float(inside.mean())

        hull = _hull_or_none(target_pts)
        if hull is not None:
            p_scan = float(hull.volume / (target_size[0] * target_size[1]))

    return p_proto, p_scan


FeatureProvider = Callable[[int], FeatureMap]


def global_align(
    proto_features_provider: FeatureProvider,
    target_features_provider: FeatureProvider,
    proto_image: np.ndarray,
    cfg: RansacConfig,
) -> GlobalAlignment:
    """Run the full global stage cfg.runs times and keep the best spread.

    Providers are called with the run index and may return fresh stochastic
    feature maps per run; returning the same objects lets deterministic
    backbones share one similarity volume across runs. Each run owns the
    derived seed cfg.rng_seed + run_index. Ties on spread score break toward
    the higher inlier count, then the lower run index.

    Raises:
        AllRunsFailed: if every run raised.
    """
    summaries: list[RunSummary] = []
    best: Optional[dict] = None
    cached_key: Optional[tuple[int, int]] = None
    cached = None

    for run in range(cfg.runs):
        try:
            proto_fm = proto_features_provider(run)
            target_fm = target_features_provider(run)
            key = (id(proto_fm), id(target_fm))
            if key == cached_key:
                volume, corrs = cached
            else:
                volume = similarity_volume(proto_fm, target_fm)
                corrs = filter_foreground(
                    best_buddies(volume), proto_image, cfg.foreground_threshold
                )
                cached_key, cached = key, (volume, corrs)
            rng = np.random.default_rng(cfg.rng_seed + run)
            transform, inliers = ransac_affine(
                corrs, cfg, rng=rng, target_size=target_fm.source_image_size
            )
            p_proto, p_scan = spread_score(
                inliers, proto_image, target_fm.source_image_size
            )
            score = p_proto * p_scan
            summaries.append(
                RunSummary(
                    run_index=run,
                    n_correspondences=len(corrs),
                    n_inliers=len(inliers),
                    p_proto=p_proto,
                    p_scan=p_scan,
                    score=score,
                )
            )
            better = best is None or (score, len(inliers)) > (
                best["score"],
                len(best["inliers"]),
            )
            if better:
                best = {
                    "score": score,
                    "transform": transform,
                    "inliers": inliers,
                    "p_proto": p_proto,
                    "p_scan": p_scan,
                    "volume": volume,
                }
        except WedgeAlignError as exc:
            summaries.append(RunSummary(run_index=run, error=str(exc)))

    if best is None:
        details = "; ".join(s.error or "?" for s in summaries)
        raise AllRunsFailed(f"every global-alignment run failed: {details}")

    return GlobalAlignment(
        transform=best["transform"],
        inliers=tuple(best["inliers"]),
        spread_score=best["score"],
        p_proto=best["p_proto"],
        p_scan=best["p_scan"],
        run_summaries=tuple(summaries),
        volume=best["volume"],
    )
