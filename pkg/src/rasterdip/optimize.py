"""Iterative restoration: fit the network output to the masked observation.

Each iteration perturbs the fixed base noise input, runs the network, scores
the masked output against the sparse observation with MSE, backpropagates,
and applies one AMSGrad step with elementwise gradient clipping. The final
restored image is the network output on the unperturbed base input, so the
result reports the learned prior deterministically rather than one noisy
draw.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .network import NetworkConfig, build_network
from .sampling import SamplingMask
from .tensor import Tensor, hadamard, mse_loss


class DivergenceError(RuntimeError):
    """Raised when the optimization loss stops being finite."""

    def __init__(self, iteration: int, message: str):
        super().__init__(message)
        self.iteration = iteration


class AmsGrad:
    """AMSGrad with elementwise gradient clipping to [-clip_value, clip_value].

    Keeps first/second moment estimates plus the running elementwise maximum
    of the second moment; both moments are bias-corrected (the maximum
    inherits the plain second-moment correction so the first step matches
    the familiar scale).
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-2,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 clip_value: float = 10.0):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_value = clip_value
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.v_max = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            if not np.all(np.isfinite(g)):
                name = p.name or f"parameter {i}"
                raise FloatingPointError(f"non-finite gradient in {name}")
            g = np.clip(g, -self.clip_value, self.clip_value)
            m, v = self.m[i], self.v[i]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            np.maximum(self.v_max[i], v, out=self.v_max[i])
            p.data -= self.lr * (m / c1) / (np.sqrt(self.v_max[i] / c2) + self.eps)


@dataclass(frozen=True)
class DipRunConfig:
    """Settings for one restoration run; all randomness flows from ``seed``."""

    iterations: int = 5000
    sigma_z: float = 0.07
    snapshot_every: int = 1000
    seed: int = 0
    learning_rate: float = 1e-2
    clip_value: float = 10.0
    z0_low: float = 0.0
    z0_high: float = 0.1
    dtype: str = "float32"

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.sigma_z < 0:
            raise ValueError(f"sigma_z must be >= 0, got {self.sigma_z}")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be >= 0 (0 disables snapshots)")


@dataclass
class LossHistory:
    """Per-iteration masked MSE and wall-clock seconds."""

    masked_mse: List[float] = field(default_factory=list)
    seconds: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.masked_mse)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["iteration", "masked_mse", "seconds"])
            for i, (mse, sec) in enumerate(zip(self.masked_mse, self.seconds)):
                w.writerow([i, repr(mse), repr(sec)])


@dataclass
class DipResult:
    restored: np.ndarray
    history: LossHistory
    snapshots: List[Tuple[int, np.ndarray]]


def perturb_input(z0: Tensor, sigma: float, rng: np.random.Generator) -> Tensor:
    """Fresh copy of z0 plus i.i.d. Gaussian noise of the given deviation."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        return Tensor(z0.data.copy())
    noise = rng.normal(0.0, sigma, size=z0.data.shape).astype(z0.data.dtype)
    return Tensor(z0.data + noise)


def _image_to_4d(x0, dtype) -> np.ndarray:
    arr = x0.data if isinstance(x0, Tensor) else np.asarray(x0)
    if arr.ndim == 2:
        arr = arr[None, None]
    if arr.ndim != 4 or arr.shape[0] != 1 or arr.shape[1] != 1:
        raise ValueError(
            f"observation must be 2D or (1,1,H,W), got shape {arr.shape}")
    if arr.min() < -1e-6 or arr.max() > 1.0 + 1e-6:
        raise ValueError("observation values must lie in [0, 1]; normalize first")
    return arr.astype(dtype)


def dip_optimize(x0, mask: SamplingMask, net_config: NetworkConfig,
                 run_config: DipRunConfig,
                 on_iteration: Optional[Callable] = None) -> DipResult:
    """Restore a sparsely sampled image by optimizing an untrained network.

    ``x0`` is the sparse observation (zeros at skipped pixels), as a 2D array
    or (1,1,H,W) Tensor with values in [0, 1]. The network input is seeded
    uniform noise; when ``net_config.init_seed`` is None the weight seed is
    derived from ``run_config.seed`` as well, so one seed fixes the full run.

    Returns the restored image (network output on the unperturbed input),
    the loss history, and any periodic snapshots. ``on_iteration``, when
    given, is called as ``on_iteration(k, loss_value, optimizer)`` after each
    update.
    """
    dtype = np.dtype(run_config.dtype)
    x0_arr = _image_to_4d(x0, dtype)
    h, w = x0_arr.shape[2:]
    if (h, w) != mask.shape:
        raise ValueError(
            f"observation {h}x{w} does not match mask {mask.shape}")

    ss = np.random.SeedSequence(run_config.seed)
    init_ss, noise_ss = ss.spawn(2)
    if net_config.init_seed is None:
        net_config = replace(net_config,
                             init_seed=int(init_ss.generate_state(1)[0]))
    rng = np.random.default_rng(noise_ss)

    net = build_network(net_config, dtype=dtype)
    z0 = Tensor(rng.uniform(run_config.z0_low, run_config.z0_high,
                            (1, net_config.input_channels, h, w)).astype(dtype))
    x0_t = Tensor(x0_arr)
    m_t = mask.as_tensor(dtype)
    opt = AmsGrad(net.params, lr=run_config.learning_rate,
                  clip_value=run_config.clip_value)

    history = LossHistory()
    snapshots: List[Tuple[int, np.ndarray]] = []
    for k in range(run_config.iterations):
        t0 = time.perf_counter()
        z = perturb_input(z0, run_config.sigma_z, rng)
        loss = mse_loss(hadamard(net.forward(z), m_t), x0_t)
        value = loss.item()
        if not math.isfinite(value):
            raise DivergenceError(
                k, f"loss became non-finite at iteration {k}")
        net.zero_grad()
        loss.backward()
        opt.step()
        history.masked_mse.append(value)
        history.seconds.append(time.perf_counter() - t0)
        if on_iteration is not None:
            on_iteration(k, value, opt)
        if run_config.snapshot_every and (k + 1) % run_config.snapshot_every == 0:
            snap = net.forward(z0).data[0, 0].copy()
            snapshots.append((k + 1, snap))

    restored = net.forward(z0).data[0, 0].copy()
    return DipResult(restored=restored, history=history, snapshots=snapshots)
