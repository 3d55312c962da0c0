"""SSIM/PSNR scoring, report aggregation, and a one-way ANOVA F statistic.

SSIM uses the standard Gaussian-weighted local statistics (11x11 window,
sigma 1.5, K1 = 0.01, K2 = 0.03) over the valid interior, averaged to one
score. Images are expected normalized, so the dynamic range defaults to 1.0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("K1 and K2 must be positive")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("window must be a positive odd size")


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation with a 1D window along both axes."""
    v = np.lib.stride_tricks.sliding_window_view(img, len(g), axis=0) @ g
    v = np.lib.stride_tricks.sliding_window_view(v, len(g), axis=1) @ g
    return v


def psnr(ref: np.ndarray, test: np.ndarray, max_val: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; +inf when the images are identical."""
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {test.shape}")
    if max_val <= 0:
        raise ValueError("max_val must be positive")
    mse = np.mean((ref - test) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_val * max_val / mse)


def ssim(ref: np.ndarray, test: np.ndarray, params: SsimParams = SsimParams()) -> float:
    """Mean structural similarity over the valid window interior."""
    x = np.asarray(ref, dtype=np.float64)
    y = np.asarray(test, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.ndim != 2:
        raise ValueError(f"images must be 2D, got {x.shape}")
    if min(x.shape) < params.window:
        raise ValueError(
            f"image {x.shape} smaller than the {params.window}x{params.window} window")

    g = _gaussian_window(params.window, params.sigma)
    mu_x = _filter_valid(x, g)
    mu_y = _filter_valid(y, g)
    var_x = _filter_valid(x * x, g) - mu_x * mu_x
    var_y = _filter_valid(y * y, g) - mu_y * mu_y
    cov = _filter_valid(x * y, g) - mu_x * mu_y

    c1 = (params.k1 * params.data_range) ** 2
    c2 = (params.k2 * params.data_range) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricRow:
    image: str
    pattern: str
    method: str
    ssim: float
    psnr_db: float


@dataclass(frozen=True)
class GroupStats:
    ssim_mean: float
    ssim_sd: float
    psnr_mean: float
    psnr_sd: float
    n: int


@dataclass
class MetricsReport:
    rows: List[MetricRow] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)
    skipped_tiles: List[str] = field(default_factory=list)

    @property
    def aggregates(self) -> Dict[Tuple[str, str], GroupStats]:
        return aggregate(self.rows)

    def write_rows_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["image", "pattern", "method", "ssim", "psnr_db"])
            for r in self.rows:
                w.writerow([r.image, r.pattern, r.method,
                            _fmt(r.ssim), _fmt(r.psnr_db)])

    def write_aggregate_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["pattern", "method", "ssim_mean", "ssim_sd",
                        "psnr_mean", "psnr_sd", "n"])
            for (pattern, method), s in sorted(self.aggregates.items()):
                w.writerow([pattern, method, _fmt(s.ssim_mean), _fmt(s.ssim_sd),
                            _fmt(s.psnr_mean), _fmt(s.psnr_sd), s.n])


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _mean_sd(values: Sequence[float]) -> Tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def aggregate(rows: Sequence[MetricRow]) -> Dict[Tuple[str, str], GroupStats]:
    """Per-(pattern, method) sample mean and SD (n - 1 denominator)."""
    if not rows:
        raise ValueError("cannot aggregate an empty row set")
    groups: Dict[Tuple[str, str], List[MetricRow]] = {}
    for r in rows:
        groups.setdefault((r.pattern, r.method), []).append(r)
    out = {}
    for key, rs in groups.items():
        sm, ss = _mean_sd([r.ssim for r in rs])
        pm, ps = _mean_sd([r.psnr_db for r in rs])
        out[key] = GroupStats(sm, ss, pm, ps, len(rs))
    return out


def anova_f(groups: Sequence[Sequence[float]]) -> float:
    """One-way ANOVA F statistic: between-group MS over within-group MS."""
    if len(groups) < 2:
        raise ValueError("ANOVA needs at least two groups")
    arrs = [np.asarray(g, dtype=np.float64) for g in groups]
    for g in arrs:
        if g.size < 2:
            raise ValueError("every ANOVA group needs at least two samples")
    n_total = sum(g.size for g in arrs)
    k = len(arrs)
    grand = sum(g.sum() for g in arrs) / n_total
    ss_between = sum(g.size * (g.mean() - grand) ** 2 for g in arrs)
    ss_within = sum(((g - g.mean()) ** 2).sum() for g in arrs)
    ms_between = ss_between / (k - 1)
    ms_within = ss_within / (n_total - k)
    if ms_within == 0.0:
        return 0.0 if ms_between == 0.0 else math.inf
    return ms_between / ms_within
