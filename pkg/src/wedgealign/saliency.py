"""Target-frame saliency from foreground/background similarity contrast.

For every target grid cell the raw signal is the mean similarity to the
prototype's glyph cells minus the mean similarity to its background cells.
The raw field is contrast-equalized (CLAHE, fixed 2x2 tiles), thresholded at
its mean and rescaled to [0, 1], yielding an approximate segmentation of the
sign in the target image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyForeground
from .features import SimilarityVolume

_CLAHE_BINS = 256
_CLAHE_CLIP = 10.0


@dataclass(frozen=True)
class SaliencyMap:
    """Per-target-cell writing-likelihood scores in [0, 1]."""

    values: np.ndarray
    source_image_size: tuple[int, int]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValueError(f"expected a 2-D field, got shape {vals.shape}")
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValueError("saliency values must lie in [0, 1]")
        object.__setattr__(self, "values", vals)


def _block_means(img: np.ndarray, grid: tuple[int, int]) -> np.ndarray:
    """Mean intensity of the image patch covered by each grid cell."""
    h, w = img.shape
    gh, gw = grid
    r_starts = (np.arange(gh) * h) // gh
    c_starts = (np.arange(gw) * w) // gw
    sums = np.add.reduceat(np.add.reduceat(img.astype(float), r_starts, 0), c_starts, 1)
    r_counts = np.diff(np.append(r_starts, h))
    c_counts = np.diff(np.append(c_starts, w))
    return sums / np.outer(r_counts, c_counts)


def _clahe_2x2(
    field: np.ndarray, clip_limit: float = _CLAHE_CLIP, bins: int = _CLAHE_BINS
) -> np.ndarray:
    """Contrast-limited equalization with a fixed 2x2 tile grid.

    Input values must lie in [0, bins-1]. Per tile the histogram is clipped
    at clip_limit times the uniform bin height, the excess redistributed
    uniformly in one pass, and the CDF used as the intensity mapping; pixel
    mappings are blended bilinearly between the four tile centers (clamped
    to the nearest tile beyond the centers).
    """
    h, w = field.shape
    q = np.clip(np.floor(field).astype(int), 0, bins - 1)
    row_ranges = ((0, h // 2), (h // 2, h))
    col_ranges = ((0, w // 2), (w // 2, w))

    maps = np.empty((2, 2, bins))
    for ti, (r0, r1) in enumerate(row_ranges):
        for tj, (c0, c1) in enumerate(col_ranges):
            tile = q[r0:r1, c0:c1]
            hist = np.bincount(tile.ravel(), minlength=bins).astype(float)
            clip = clip_limit * tile.size / bins
            excess = np.maximum(hist - clip, 0.0).sum()
            hist = np.minimum(hist, clip) + excess / bins
            cdf = np.cumsum(hist) / hist.sum()
            maps[ti, tj] = cdf * (bins - 1)

    rc = np.array([(r0 + r1 - 1) / 2.0 for (r0, r1) in row_ranges])
    cc = np.array([(c0 + c1 - 1) / 2.0 for (c0, c1) in col_ranges])
    a = np.clip((np.arange(h) - rc[0]) / (rc[1] - rc[0]), 0.0, 1.0)[:, None]
    b = np.clip((np.arange(w) - cc[0]) / (cc[1] - cc[0]), 0.0, 1.0)[None, :]
    return (
        (1 - a) * (1 - b) * maps[0, 0][q]
        + (1 - a) * b * maps[0, 1][q]
        + a * (1 - b) * maps[1, 0][q]
        + a * b * maps[1, 1][q]
    )


def compute_saliency(
    volume: SimilarityVolume,
    proto_image: np.ndarray,
    fg_threshold: float = 128.0,
) -> SaliencyMap:
    """Saliency over the target grid from the similarity volume.

    A prototype cell counts as foreground when the image patch it covers has
    mean intensity below fg_threshold. The raw contrast field is min-max
    mapped to [0, 255], equalized (_clahe_2x2), values below the equalized
    field's mean are zeroed, and the result is min-max scaled to [0, 1]
    (constant fields map to all zeros).

    Raises:
        EmptyForeground: no prototype cell qualifies as foreground.
    """
    img = np.asarray(proto_image)
    grid = volume.proto_grid_shape
    cell_means = _block_means(img, grid)
    fg = (cell_means < fg_threshold).reshape(-1)
    if not fg.any():
        raise EmptyForeground("no prototype grid cell is darker than the threshold")

    th, tw = volume.target_grid_shape
    flat = volume.data.reshape(-1, th * tw).astype(np.float64)
    raw = flat[fg].mean(axis=0)
    if (~fg).any():
        raw = raw - flat[~fg].mean(axis=0)
    raw = raw.reshape(th, tw)

    span = raw.max() - raw.min()
    if span < 1e-12:
        return SaliencyMap(np.zeros((th, tw)), volume.target_image_size)

    equalized = _clahe_2x2((raw - raw.min()) / span * (_CLAHE_BINS - 1))
    zeroed = np.where(equalized < equalized.mean(), 0.0, equalized)
    span = zeroed.max() - zeroed.min()
    if span < 1e-12:
        return SaliencyMap(np.zeros((th, tw)), volume.target_image_size)
    return SaliencyMap((zeroed - zeroed.min()) / span, volume.target_image_size)


def saliency_to_image(sal: SaliencyMap) -> np.ndarray:
    """Nearest-neighbor upscale of the map to the source image, as uint8."""
    h, w = sal.source_image_size
    gh, gw = sal.values.shape
    rows = np.minimum((np.arange(h) * gh) // h, gh - 1)
    cols = np.minimum((np.arange(w) * gw) // w, gw - 1)
    return np.round(sal.values[np.ix_(rows, cols)] * 255.0).astype(np.uint8)
