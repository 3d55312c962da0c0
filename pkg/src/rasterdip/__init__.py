"""Restoration of sparsely sampled raster-scan images.

An untrained convolutional encoder-decoder is optimized directly against the
masked observation (deep image prior); classical interpolation baselines and
an SSIM/PSNR evaluation harness round out the toolkit.
"""

__version__ = "0.1.0"

from .sampling import SamplingPattern, SamplingMask, build_mask, degrade, speedup
from .tensor import Tensor

__all__ = [
    "Tensor",
    "SamplingPattern",
    "SamplingMask",
    "build_mask",
    "degrade",
    "speedup",
    "__version__",
]
