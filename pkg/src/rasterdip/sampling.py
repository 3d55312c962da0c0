"""Raster sampling masks and the masking degradation operator.

A pattern [Sx, Sy] keeps every Sx-th pixel along the fast (column) axis and
every Sy-th line along the slow (row) axis, anchored at the configurable
offset (default pixel (0,0)). The derived binary mask multiplies an image
elementwise to simulate the sparse acquisition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, hadamard


@dataclass(frozen=True)
class SamplingPattern:
    """Step factors (fast axis, slow axis) plus optional grid offsets."""

    sx: int
    sy: int
    offset_x: int = 0
    offset_y: int = 0

    def __post_init__(self):
        if self.sx < 1 or self.sy < 1:
            raise ValueError(f"step factors must be >= 1, got [{self.sx},{self.sy}]")
        if not 0 <= self.offset_x < self.sx:
            raise ValueError(
                f"offset_x must be in [0, {self.sx - 1}], got {self.offset_x}")
        if not 0 <= self.offset_y < self.sy:
            raise ValueError(
                f"offset_y must be in [0, {self.sy - 1}], got {self.offset_y}")

    @classmethod
    def parse(cls, text: str) -> "SamplingPattern":
        """Parse 'Sx,Sy' or 'Sx,Sy,offx,offy'."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) not in (2, 4):
            raise ValueError(f"bad pattern syntax {text!r}, expected 'Sx,Sy'")
        try:
            nums = [int(p) for p in parts]
        except ValueError:
            raise ValueError(f"bad pattern syntax {text!r}, expected integers")
        return cls(*nums)

    def label(self) -> str:
        s = f"{self.sx},{self.sy}"
        if self.offset_x or self.offset_y:
            s += f",{self.offset_x},{self.offset_y}"
        return s


# Raster undersampling factors commonly benchmarked with this pipeline.
PRESET_PATTERNS = (
    SamplingPattern(4, 1),
    SamplingPattern(5, 1),
    SamplingPattern(6, 1),
    SamplingPattern(7, 3),
    SamplingPattern(10, 5),
    SamplingPattern(6, 12),
)


class SamplingMask:
    """Binary H x W sampling grid with its pixel count cached."""

    def __init__(self, grid: np.ndarray, pattern: SamplingPattern = None):
        grid = np.asarray(grid)
        if grid.ndim != 2:
            raise ValueError(f"mask must be 2D, got shape {grid.shape}")
        vals = np.unique(grid)
        if not np.all(np.isin(vals, (0, 1))):
            raise ValueError("mask values must all be 0 or 1")
        self.grid = grid.astype(np.uint8)
        self.pattern = pattern
        self.sampled_count = int(self.grid.sum())

    @property
    def shape(self):
        return self.grid.shape

    @property
    def density(self) -> float:
        return self.sampled_count / self.grid.size

    def as_array(self, dtype=np.float64) -> np.ndarray:
        return self.grid.astype(dtype)

    def as_tensor(self, dtype=np.float32) -> Tensor:
        return Tensor(self.grid.astype(dtype)[None, None], requires_grad=False)


def build_mask(height: int, width: int, pattern: SamplingPattern) -> SamplingMask:
    """Mask with 1 exactly where both axis offsets land on the sampling grid."""
    if height < 1 or width < 1:
        raise ValueError(f"mask extent must be >= 1, got {height}x{width}")
    rows = (np.arange(height) - pattern.offset_y) % pattern.sy == 0
    cols = (np.arange(width) - pattern.offset_x) % pattern.sx == 0
    grid = np.logical_and.outer(rows, cols).astype(np.uint8)
    return SamplingMask(grid, pattern)


def expected_count(height: int, width: int, pattern: SamplingPattern) -> int:
    """Closed-form sampled-pixel count (ceil semantics on partial strides)."""
    nx = -(-(width - pattern.offset_x) // pattern.sx)
    ny = -(-(height - pattern.offset_y) // pattern.sy)
    return nx * ny


def degrade(image, mask: SamplingMask):
    """Zero out every skipped pixel; sampled pixels pass through unchanged.

    Accepts a 2D numpy array (returns the same) or a 4D Tensor (returns a
    differentiable Tensor).
    """
    if isinstance(image, Tensor):
        if image.data.shape[-2:] != mask.shape:
            raise ValueError(
                f"image spatial shape {image.data.shape[-2:]} != mask {mask.shape}")
        return hadamard(image, mask.as_tensor(image.data.dtype))
    image = np.asarray(image)
    if image.shape[-2:] != mask.shape:
        raise ValueError(f"image shape {image.shape} != mask {mask.shape}")
    return image * mask.grid.astype(image.dtype)


def extract_lowres(image: np.ndarray, pattern: SamplingPattern) -> np.ndarray:
    """The sampled pixels only, as a dense grid in raster order."""
    image = np.asarray(image)
    return image[pattern.offset_y::pattern.sy, pattern.offset_x::pattern.sx]


def scatter_lowres(lowres: np.ndarray, pattern: SamplingPattern,
                   height: int, width: int) -> np.ndarray:
    """Place a low-resolution sample grid back at its acquisition positions."""
    lowres = np.asarray(lowres)
    out = np.zeros((height, width), dtype=lowres.dtype)
    out[pattern.offset_y::pattern.sy, pattern.offset_x::pattern.sx] = lowres
    return out


def speedup(pattern: SamplingPattern) -> int:
    """Acquisition-time speedup factor: one pixel kept per Sx*Sy grid cell."""
    return pattern.sx * pattern.sy
