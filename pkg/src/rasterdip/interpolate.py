"""Classical separable interpolation from a low-resolution sample grid.

Samples are resampled back to the full grid at their true acquisition
coordinates (offset + i * step per axis), so every method reproduces the
input values exactly at sampled positions. Edges are handled by clamping
source indices (constant extension).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampling import SamplingPattern, extract_lowres


@dataclass(frozen=True)
class InterpMethod:
    """Interpolation kernel family plus its shape parameter."""

    name: str
    a: float

    @classmethod
    def bilinear(cls) -> "InterpMethod":
        return cls("bilinear", 1.0)

    @classmethod
    def bicubic(cls, a: float = -0.5) -> "InterpMethod":
        return cls("bicubic", a)

    @classmethod
    def lanczos(cls, a: int = 4) -> "InterpMethod":
        return cls("lanczos", int(a))

    @classmethod
    def parse(cls, name: str) -> "InterpMethod":
        try:
            return {"bilinear": cls.bilinear,
                    "bicubic": cls.bicubic,
                    "lanczos": cls.lanczos}[name]()
        except KeyError:
            raise ValueError(f"unknown interpolation method {name!r}")

    @property
    def radius(self) -> int:
        """Tap support: taps at floor(s) + d for d in [1 - radius, radius]."""
        if self.name == "bilinear":
            return 1
        if self.name == "bicubic":
            return 2
        if self.name == "lanczos":
            return int(self.a)
        raise ValueError(f"unknown interpolation method {self.name!r}")


def kernel_value(method: InterpMethod, t):
    """Kernel weight at (array of) signed distance t from a source sample."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    if method.name == "bilinear":
        return np.maximum(0.0, 1.0 - t)
    if method.name == "bicubic":
        a = method.a
        near = (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0
        far = a * t**3 - 5.0 * a * t**2 + 8.0 * a * t - 4.0 * a
        return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))
    if method.name == "lanczos":
        a = float(method.a)
        return np.where(t < a, np.sinc(t) * np.sinc(t / a), 0.0)
    raise ValueError(f"unknown interpolation method {method.name!r}")


def _resample_axis(arr: np.ndarray, n_out: int, step: int, offset: int,
                   method: InterpMethod) -> np.ndarray:
    n_src = arr.shape[0]
    s = (np.arange(n_out, dtype=np.float64) - offset) / step
    base = np.floor(s).astype(np.int64)
    r = method.radius
    extra = (slice(None),) + (None,) * (arr.ndim - 1)
    out = np.zeros((n_out,) + arr.shape[1:], dtype=np.float64)
    wsum = np.zeros(n_out, dtype=np.float64)
    for d in range(1 - r, r + 1):
        j = base + d
        w = kernel_value(method, s - j)
        out += w[extra] * arr[np.clip(j, 0, n_src - 1)]
        wsum += w
    if method.name == "lanczos":
        # renormalize so the taps form a partition of unity (removes ripple)
        out /= wsum[extra]
    return out


def interpolate(lowres: np.ndarray, pattern: SamplingPattern,
                target_h: int, target_w: int, method: InterpMethod) -> np.ndarray:
    """Resample a low-resolution grid onto the full target grid."""
    lowres = np.asarray(lowres, dtype=np.float64)
    if lowres.ndim != 2:
        raise ValueError(f"lowres must be 2D, got shape {lowres.shape}")
    ny = -(-(target_h - pattern.offset_y) // pattern.sy)
    nx = -(-(target_w - pattern.offset_x) // pattern.sx)
    if lowres.shape != (ny, nx):
        raise ValueError(
            f"lowres shape {lowres.shape} inconsistent with pattern "
            f"[{pattern.sx},{pattern.sy}] on {target_h}x{target_w} "
            f"(expected {(ny, nx)})")
    out = _resample_axis(lowres, target_h, pattern.sy, pattern.offset_y, method)
    out = _resample_axis(out.T, target_w, pattern.sx, pattern.offset_x, method)
    return np.ascontiguousarray(out.T)


def restore_sparse(sparse: np.ndarray, pattern: SamplingPattern,
                   method: InterpMethod) -> np.ndarray:
    """Full-grid restoration of a sparsely sampled image (zeros at skipped pixels)."""
    sparse = np.asarray(sparse)
    h, w = sparse.shape
    return interpolate(extract_lowres(sparse, pattern), pattern, h, w, method)
