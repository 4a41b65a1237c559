"""Sparse mutual nearest-neighbor (best-buddy) correspondences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import SimilarityVolume, grid_to_pixel_coords
from .geometry import Point


@dataclass(frozen=True)
class Correspondence:
    """A matched (prototype pixel, target pixel) pair with its similarity."""

    proto: Point
    target: Point
    score: float


def best_buddies(volume: SimilarityVolume) -> list[Correspondence]:
    """Extract pairs of grid cells that are mutual nearest neighbors.

    A prototype cell and a target cell form a best-buddy pair when each
    attains the other's row/column maximum in the similarity volume. Ties
    are resolved greedily in row-major order (lowest linear index first),
    each cell appearing in at most one pair; with unique maxima this is
    exactly the double-argmax rule. Grid coordinates are converted to pixel
    cell centers in the respective image frames.
    """
    ph, pw = volume.proto_grid_shape
    th, tw = volume.target_grid_shape
    m = volume.data.reshape(ph * pw, th * tw)
    row_max = m.max(axis=1)
    col_max = m.max(axis=0)

    pairs: list[tuple[int, int, float]] = []
    target_used = np.zeros(th * tw, dtype=bool)
    for p in range(ph * pw):
        candidates = (m[p] == row_max[p]) & (m[p] == col_max) & ~target_used
        ks = np.flatnonzero(candidates)
        if ks.size:
            k = int(ks[0])
            target_used[k] = True
            pairs.append((p, k, float(m[p, k])))

    out = []
    for p, k, score in pairs:
        pr, pc = divmod(p, pw)
        tr, tc = divmod(k, tw)
        px, py = grid_to_pixel_coords(pr, pc, (ph, pw), volume.proto_image_size)
        tx, ty = grid_to_pixel_coords(tr, tc, (th, tw), volume.target_image_size)
        out.append(
            Correspondence(
                proto=Point(float(px), float(py)),
                target=Point(float(tx), float(ty)),
                score=score,
            )
        )
    return out


def filter_foreground(
    corrs: list[Correspondence],
    proto_image: np.ndarray,
    intensity_threshold: float = 128.0,
) -> list[Correspondence]:
    """Keep correspondences whose prototype point lies on a dark pixel.

    Glyphs are dark on light ground, so pixels with intensity below the
    threshold count as foreground. Points are binned to the pixel that
    contains them, clamped to the image bounds.
    """
    img = np.asarray(proto_image)
    h, w = img.shape
    kept = []
    for c in corrs:
        col = min(max(int(np.floor(c.proto.x)), 0), w - 1)
        row = min(max(int(np.floor(c.proto.y)), 0), h - 1)
        if float(img[row, col]) < intensity_threshold:
            kept.append(c)
    return kept


def correspondences_to_jsonable(corrs: list[Correspondence]) -> list[dict]:
    """Debug-dump form: [{proto: [x, y], target: [x, y], score}, ...]."""
    return [
        {
            "proto": [c.proto.x, c.proto.y],
            "target": [c.target.x, c.target.y],
            "score": c.score,
        }
        for c in corrs
    ]
