"""Seeded synthetic curvilinear-structure images.

Each image is a dark field crossed by a handful of smooth, randomly curving
bright filaments of varying thickness and intensity, rendered on a 4x
supersampled grid and box-downsampled for anti-aliasing. They stand in for
vessel-like scans when no acquired data is available.
"""

from __future__ import annotations

from typing import List, Tuple

import numpy as np

_SS = 4  # supersampling factor


def _stamp_disk(canvas: np.ndarray, cy: float, cx: float, radius: float,
                value: float) -> None:
    h, w = canvas.shape
    r_out = radius + 1.0
    y0 = max(0, int(np.floor(cy - r_out)))
    y1 = min(h, int(np.ceil(cy + r_out)) + 1)
    x0 = max(0, int(np.floor(cx - r_out)))
    x1 = min(w, int(np.ceil(cx + r_out)) + 1)
    if y0 >= y1 or x0 >= x1:
        return
    yy = np.arange(y0, y1, dtype=np.float64)[:, None] - cy
    xx = np.arange(x0, x1, dtype=np.float64)[None, :] - cx
    dist = np.sqrt(yy * yy + xx * xx)
    alpha = np.clip(radius + 0.5 - dist, 0.0, 1.0) * value
    region = canvas[y0:y1, x0:x1]
    np.maximum(region, alpha, out=region)


def _draw_filament(canvas: np.ndarray, rng: np.random.Generator,
                   height: int, width: int) -> None:
    y = rng.uniform(0, height)
    x = rng.uniform(0, width)
    heading = rng.uniform(0, 2 * np.pi)
    steps = int(rng.uniform(0.6, 1.4) * (height + width) / 2 / 0.5)
    thickness = rng.uniform(1.2, 3.2)
    taper = rng.uniform(0.3, 1.0)
    value = rng.uniform(0.55, 1.0)
    for k in range(steps):
        frac = k / max(steps - 1, 1)
        radius = 0.5 * thickness * (1.0 - (1.0 - taper) * frac) * _SS
        _stamp_disk(canvas, y * _SS, x * _SS, radius, value)
        heading += rng.normal(0.0, 0.09)
        y += 0.5 * np.sin(heading)
        x += 0.5 * np.cos(heading)
        if not (-4 <= y <= height + 4 and -4 <= x <= width + 4):
            break


def generate_image(height: int, width: int, seed) -> np.ndarray:
    """One synthetic image, deterministic in ``seed``; values in [0, 1]."""
    rng = np.random.default_rng(seed)
    canvas = np.zeros((height * _SS, width * _SS), dtype=np.float64)
    n_filaments = int(rng.integers(4, 8)) + max(0, height * width // 20000)
    for _ in range(n_filaments):
        _draw_filament(canvas, rng, height, width)
    pooled = canvas.reshape(height, _SS, width, _SS).mean(axis=(1, 3))
    return np.clip(pooled, 0.0, 1.0)


def generate_corpus(count: int, height: int, width: int,
                    seed: int) -> List[Tuple[str, np.ndarray]]:
    """Named list of seeded synthetic images, reproducible for a given seed."""
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(count)
    return [(f"synthetic{i:02d}", generate_image(height, width, child))
            for i, child in enumerate(children)]
