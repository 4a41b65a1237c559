"""Exception hierarchy shared across the package."""


class WedgeAlignError(Exception):
    """Base class for all package-specific failures."""


class DegenerateTransform(WedgeAlignError):
    """Affine transform with a (near-)singular linear part."""


class DegenerateProjection(WedgeAlignError):
    """Projective mapping whose homogeneous scale z' vanishes."""


class RankDeficient(WedgeAlignError):
    """Least-squares design matrix is singular (e.g. collinear source points)."""


class BadMagic(WedgeAlignError):
    """Feature file does not start with the expected magic bytes."""


class DimMismatch(WedgeAlignError):
    """Declared tensor dimensions disagree with the actual payload."""


class NotNormalized(WedgeAlignError):
    """Feature vectors are not unit-normalized within tolerance."""


class ChannelMismatch(WedgeAlignError):
    """Feature maps with differing channel counts cannot be compared."""


class TooFewCorrespondences(WedgeAlignError):
    """Fewer correspondences than the RANSAC sample size."""


class NoValidModel(WedgeAlignError):
    """Every RANSAC sample was degenerate; no model could be fit."""


class AllRunsFailed(WedgeAlignError):
    """Every global-alignment run raised an error."""


class EmptyForeground(WedgeAlignError):
    """No prototype grid cell qualifies as glyph foreground."""


class OutOfCanvas(WedgeAlignError):
    """Skeleton keypoints fall outside the rendering canvas."""


class CannotFitCanvas(WedgeAlignError):
    """No perturbation draw kept the skeleton inside the canvas."""


class KeyMismatch(WedgeAlignError):
    """Prediction and ground-truth corpora do not share the same keys."""


class StageError(WedgeAlignError):
    """Pipeline failure annotated with the stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
