"""Encoder-decoder network construction for prior-based restoration.

The architecture is a U-Net variant tuned for sparse-sample restoration:
a constant channel count across all levels, a large kernel so the receptive
field spans the gaps between samples, and a decoder built purely from
bilinear upsampling plus standard convolution (no transposed convolutions,
which imprint checkerboard artifacts). Every decoder level concatenates the
same-resolution encoder activation (skip connection) before its convolution.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .tensor import (
    Tensor,
    avg_pool2x,
    bilinear_upsample2x,
    concat_channels,
    conv2d,
    leaky_relu,
    sigmoid,
)

_WEIGHTS_MAGIC = b"DIPW"


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture hyperparameters; defaults suit 300x300 restoration."""

    input_channels: int = 32
    base_filters: int = 64
    kernel_size: int = 11
    levels: int = 4
    leaky_alpha: float = 0.2
    output_channels: int = 1
    output_activation: str = "sigmoid"  # or "none"
    downsample: str = "conv"            # stride-2 conv; or "avgpool"
    pad_mode: str = "reflect"           # or "zero"
    # None lets the optimization run derive the weight seed from its own seed
    init_seed: Optional[int] = None

    def __post_init__(self):
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ValueError(
                f"kernel_size must be odd and >= 3, got {self.kernel_size}")
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if min(self.input_channels, self.base_filters, self.output_channels) < 1:
            raise ValueError("channel counts must be >= 1")
        if not 0.0 <= self.leaky_alpha < 1.0:
            raise ValueError(f"leaky_alpha must be in [0, 1), got {self.leaky_alpha}")
        if self.output_activation not in ("sigmoid", "none"):
            raise ValueError(f"unknown output_activation {self.output_activation!r}")
        if self.downsample not in ("conv", "avgpool"):
            raise ValueError(f"unknown downsample {self.downsample!r}")
        if self.pad_mode not in ("reflect", "zero"):
            raise ValueError(f"unknown pad_mode {self.pad_mode!r}")


def _conv_shapes(cfg: NetworkConfig):
    """(name, out_ch, in_ch, k) for every convolution, in creation order."""
    f, k = cfg.base_filters, cfg.kernel_size
    shapes = []
    for i in range(cfg.levels):
        cin = cfg.input_channels if i == 0 else f
        shapes.append((f"enc{i}.conv", f, cin, k))
        if cfg.downsample == "conv":
            shapes.append((f"enc{i}.down", f, f, k))
    shapes.append(("bottleneck", f, f, k))
    for i in reversed(range(cfg.levels)):
        shapes.append((f"dec{i}.conv", f, 2 * f, k))
    shapes.append(("head", cfg.output_channels, f, 1))
    return shapes


def _build_program(cfg: NetworkConfig):
    prog: List[tuple] = []
    for i in range(cfg.levels):
        prog.append(("conv", f"enc{i}.conv", 1))
        prog.append(("lrelu",))
        prog.append(("save_skip", i))
        if cfg.downsample == "conv":
            prog.append(("conv", f"enc{i}.down", 2))
            prog.append(("lrelu",))
        else:
            prog.append(("avgpool",))
    prog.append(("conv", "bottleneck", 1))
    prog.append(("lrelu",))
    for i in reversed(range(cfg.levels)):
        prog.append(("upsample",))
        prog.append(("concat_skip", i))
        prog.append(("conv", f"dec{i}.conv", 1))
        prog.append(("lrelu",))
    prog.append(("conv", "head", 1))
    if cfg.output_activation == "sigmoid":
        prog.append(("sigmoid",))
    return prog

_OP_TAGS = {"conv": "conv2d", "lrelu": "leaky_relu", "avgpool": "avg_pool2x",
            "upsample": "bilinear_upsample2x", "concat_skip": "concat_channels",
            "sigmoid": "sigmoid", "save_skip": None}


class Network:
    """Instantiated weight set plus the layer program that consumes it."""

    def __init__(self, config: NetworkConfig, dtype=np.float32):
        self.config = config
        self.dtype = np.dtype(dtype)
        self.program = _build_program(config)
        self._params: Dict[str, Tensor] = {}
        rng = np.random.default_rng(0 if config.init_seed is None else config.init_seed)
        for name, cout, cin, k in _conv_shapes(config):
            bound = 1.0 / np.sqrt(cin * k * k)
            w = rng.uniform(-bound, bound, (cout, cin, k, k)).astype(self.dtype)
            b = rng.uniform(-bound, bound, (cout,)).astype(self.dtype)
            self._params[f"{name}.weight"] = Tensor(w, requires_grad=True,
                                                    name=f"{name}.weight")
            self._params[f"{name}.bias"] = Tensor(b, requires_grad=True,
                                                  name=f"{name}.bias")

    @property
    def params(self) -> List[Tensor]:
        return list(self._params.values())

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self._params.values())

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def layer_ops(self) -> List[str]:
        """Static op tags of the forward pass, in execution order."""
        return [_OP_TAGS[e[0]] for e in self.program if _OP_TAGS[e[0]]]

    def forward(self, z: Tensor) -> Tensor:
        cfg = self.config
        if z.data.ndim != 4:
            raise ValueError(f"input must be (B,C,H,W), got shape {z.data.shape}")
        _, c, h, w = z.data.shape
        if c != cfg.input_channels:
            raise ValueError(
                f"input has {c} channels, network expects {cfg.input_channels}")
        div = 2 ** cfg.levels
        if h % div or w % div:
            raise ValueError(
                f"spatial extents {h}x{w} must be divisible by {div} (2^levels)")
        x = z
        skips: Dict[int, Tensor] = {}
        for entry in self.program:
            op = entry[0]
            if op == "conv":
                x = conv2d(x, self._params[entry[1] + ".weight"],
                           self._params[entry[1] + ".bias"],
                           stride=entry[2], padding="same", pad_mode=cfg.pad_mode)
            elif op == "lrelu":
                x = leaky_relu(x, cfg.leaky_alpha)
            elif op == "save_skip":
                skips[entry[1]] = x
            elif op == "avgpool":
                x = avg_pool2x(x)
            elif op == "upsample":
                x = bilinear_upsample2x(x)
            elif op == "concat_skip":
                x = concat_channels([x, skips[entry[1]]])
            elif op == "sigmoid":
                x = sigmoid(x)
        return x

    # -- weight persistence -------------------------------------------------

    def save_weights(self, path) -> None:
        """Write weights: magic, u32 header length, JSON header, raw LE f32."""
        header = json.dumps({
            "params": [{"name": n, "shape": list(t.data.shape)}
                       for n, t in self._params.items()],
        }).encode()
        with open(path, "wb") as f:
            f.write(_WEIGHTS_MAGIC)
            f.write(struct.pack("<I", len(header)))
            f.write(header)
            for t in self._params.values():
                f.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())

    def load_weights(self, path) -> None:
        with open(path, "rb") as f:
            if f.read(4) != _WEIGHTS_MAGIC:
                raise ValueError(f"{path}: not a weights file (bad magic)")
            (hlen,) = struct.unpack("<I", f.read(4))
            header = json.loads(f.read(hlen).decode())
            for rec in header["params"]:
                name, shape = rec["name"], tuple(rec["shape"])
                if name not in self._params:
                    raise ValueError(f"{path}: unexpected parameter {name!r}")
                if self._params[name].data.shape != shape:
                    raise ValueError(
                        f"{path}: {name} has shape {shape}, network expects "
                        f"{self._params[name].data.shape}")
                n = int(np.prod(shape))
                raw = np.frombuffer(f.read(4 * n), dtype="<f4").reshape(shape)
                self._params[name].data = raw.astype(self.dtype)


def build_network(config: NetworkConfig, dtype=np.float32) -> Network:
    """Instantiate the network with seeded fan-in-scaled uniform weights."""
    return Network(config, dtype=dtype)
