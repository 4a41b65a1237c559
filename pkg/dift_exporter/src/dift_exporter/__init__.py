"""dift_exporter: dense denoiser-activation features written as FMAP files.

Noises an image at a fixed diffusion timestep, runs a latent denoiser,
captures two upscaling-block activations, resizes them to a common grid and
concatenates channels; the ensemble average over several noise draws is
unit-normalized per position and written in the FMAP binary format consumed
by the alignment pipeline.
"""

__version__ = "0.1.0"

from .backbones import BuiltinBackbone, resolve_backbone
from .errors import ExporterError, ModelLoadError, ShapeMismatch
from .exporter import ExportConfig, export_features
from .fmap import write_fmap

__all__ = [
    "__version__",
    "BuiltinBackbone",
    "ExportConfig",
    "ExporterError",
    "ModelLoadError",
    "ShapeMismatch",
    "export_features",
    "resolve_backbone",
    "write_fmap",
]
