"""Minimal dense tensor engine with reverse-mode automatic differentiation.

Arrays are numpy-backed, float32 or float64, with the canonical image layout
(batch, channel, height, width). Every differentiable operation records a
GraphNode so that ``Tensor.backward()`` can propagate gradients to the leaves
in reverse topological order. The op set is deliberately small: exactly what
an encoder-decoder restoration network and its masked MSE objective need.

All reductions use fixed numpy evaluation order, so gradients are
deterministic run-to-run in a single process.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

DEFAULT_DTYPE = np.float32

# im2col buffer cap (bytes); large convolutions fall back to row chunks.
_COL_BUDGET = 128 * 1024 * 1024

_finite_checks = False


def set_finite_checks(enabled: bool) -> None:
    """Enable asserting that every op output is finite (debug mode)."""
    global _finite_checks
    _finite_checks = bool(enabled)


def _check_finite(arr: np.ndarray, op: str) -> None:
    if _finite_checks and not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in output of {op}")


class GraphNode:
    """Record of one differentiable op: tag, input tensors, backward closure.

    The backward closure maps the output gradient to one gradient array (or
    None) per input. Recorded graphs are acyclic by construction; backward
    visits each node exactly once.
    """

    __slots__ = ("op", "inputs", "backward_fn")

    def __init__(self, op: str, inputs: Sequence["Tensor"],
                 backward_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]):
        self.op = op
        self.inputs = tuple(inputs)
        self.backward_fn = backward_fn


class Tensor:
    """Dense real-valued array with an optional gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad", "node", "name")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str = None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.node: Optional[GraphNode] = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def sum(self) -> "Tensor":
        out = _make(np.asarray(self.data.sum()), "sum", [self],
                    lambda g: [np.broadcast_to(g, self.data.shape).astype(self.data.dtype)])
        return out

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``.

        Only defined for scalar tensors. Gradients add onto any existing
        ``grad`` buffers; use ``zero_grad`` between steps.
        """
        if self.data.size != 1:
            raise ValueError(
                f"backward requires a scalar tensor, got shape {self.data.shape}")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for t in reversed(order):
            node = t.node
            if node is None or t.grad is None:
                continue
            if not any(inp.requires_grad for inp in node.inputs):
                continue
            grads = node.backward_fn(t.grad)
            for inp, g in zip(node.inputs, grads):
                if g is None or not inp.requires_grad:
                    continue
                if inp.grad is None:
                    inp.grad = g.astype(inp.data.dtype, copy=True)
                else:
                    inp.grad += g

    def __repr__(self):
        return f"Tensor(shape={tuple(self.data.shape)}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def _toposort(root: Tensor) -> list:
    """Topological (execution) order of the graph reachable from ``root``."""
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            order.append(t)
            continue
        if id(t) in visited:
            continue
        visited.add(id(t))
        stack.append((t, True))
        if t.node is not None:
            for inp in t.node.inputs:
                if id(inp) not in visited:
                    stack.append((inp, False))
    return order


def _make(data: np.ndarray, op: str, inputs: Sequence[Tensor], backward_fn) -> Tensor:
    _check_finite(data, op)
    out = Tensor(data, requires_grad=any(t.requires_grad for t in inputs))
    out.node = GraphNode(op, inputs, backward_fn)
    return out


def graph_ops(output: Tensor) -> list:
    """Op tags of every node reachable from ``output``, in execution order."""
    return [t.node.op for t in _toposort(output) if t.node is not None]


def zero_grads(params: Sequence[Tensor]) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# padding
# ---------------------------------------------------------------------------

def _resolve_padding(padding, kh: int, kw: int):
    if padding == "same":
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError("'same' padding requires odd kernel extents")
        return (kh - 1) // 2, (kw - 1) // 2
    if padding == "valid":
        return 0, 0
    if isinstance(padding, int):
        return padding, padding
    ph, pw = padding
    return int(ph), int(pw)


def _pad2d(x: np.ndarray, ph: int, pw: int, mode: str) -> np.ndarray:
    if ph == 0 and pw == 0:
        return x
    spec = ((0, 0), (0, 0), (ph, ph), (pw, pw))
    if mode == "zero":
        return np.pad(x, spec)
    if mode == "reflect":
        return np.pad(x, spec, mode="reflect")
    raise ValueError(f"unknown pad mode {mode!r}")


def _fold_pad2d(dp: np.ndarray, ph: int, pw: int, mode: str) -> np.ndarray:
    """Adjoint of _pad2d: fold border gradients back onto the interior."""
    if ph == 0 and pw == 0:
        return dp
    H = dp.shape[2] - 2 * ph
    W = dp.shape[3] - 2 * pw
    if mode == "reflect":
        # np.pad reflect maps top pad row o to interior row ph - o, etc.
        if ph:
            dp[:, :, ph + 1:2 * ph + 1, :] += dp[:, :, ph - 1::-1, :]
            dp[:, :, ph + H - 1 - ph:ph + H - 1, :] += dp[:, :, :ph + H - 1:-1, :]
        if pw:
            dp[:, :, :, pw + 1:2 * pw + 1] += dp[:, :, :, pw - 1::-1]
            dp[:, :, :, pw + W - 1 - pw:pw + W - 1] += dp[:, :, :, :pw + W - 1:-1]
    elif mode != "zero":
        raise ValueError(f"unknown pad mode {mode!r}")
    return dp[:, :, ph:ph + H, pw:pw + W]


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int,
            row0: int, row1: int, wout: int) -> np.ndarray:
    """Columns for padded single-image input xp (C,Hp,Wp), output rows [row0,row1)."""
    C = xp.shape[0]
    sC, sH, sW = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp[:, row0 * stride:, :],
        shape=(C, kh, kw, row1 - row0, wout),
        strides=(sC, sH, sW, stride * sH, stride * sW),
        writeable=False,
    )
    return view.reshape(C * kh * kw, (row1 - row0) * wout)


def conv2d(x: Tensor, kernel: Tensor, bias: Optional[Tensor] = None,
           stride: int = 1, padding="valid", pad_mode: str = "zero") -> Tensor:
    """2D cross-correlation of (B,Ci,H,W) input with (Co,Ci,kh,kw) kernel.

    ``padding`` is "same", "valid", an int, or an (ph, pw) pair; ``pad_mode``
    selects zero or reflection borders. Differentiable w.r.t. input, kernel
    and bias. Large inputs are processed in output-row chunks to bound the
    im2col buffer; the chunk size is a fixed function of the shapes, so
    results are reproducible run-to-run.
    """
    if x.data.ndim != 4:
        raise ValueError(f"conv2d input must be 4D (B,C,H,W), got {x.data.shape}")
    if kernel.data.ndim != 4:
        raise ValueError(f"conv2d kernel must be 4D (Co,Ci,kh,kw), got {kernel.data.shape}")
    B, Ci, H, W = x.data.shape
    Co, Ck, kh, kw = kernel.data.shape
    if Ck != Ci:
        raise ValueError(
            f"kernel expects {Ck} input channels but input has {Ci}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if bias is not None and bias.data.shape != (Co,):
        raise ValueError(
            f"bias must have shape ({Co},), got {bias.data.shape}")
    ph, pw = _resolve_padding(padding, kh, kw)
    hout = (H + 2 * ph - kh) // stride + 1
    wout = (W + 2 * pw - kw) // stride + 1
    if hout <= 0 or wout <= 0:
        raise ValueError(
            f"zero-size conv output: input {H}x{W}, kernel {kh}x{kw}, "
            f"padding ({ph},{pw}), stride {stride}")

    wmat = kernel.data.reshape(Co, Ci * kh * kw)
    ckk = Ci * kh * kw
    chunk = max(1, _COL_BUDGET // (ckk * wout * x.data.itemsize))

    out = np.empty((B, Co, hout, wout), dtype=x.data.dtype)
    for b in range(B):
        xp = _pad2d(x.data[b:b + 1], ph, pw, pad_mode)[0]
        for r0 in range(0, hout, chunk):
            r1 = min(r0 + chunk, hout)
            cols = _im2col(xp, kh, kw, stride, r0, r1, wout)
            out[b, :, r0:r1, :] = (wmat @ cols).reshape(Co, r1 - r0, wout)
    if bias is not None:
        out += bias.data.reshape(1, Co, 1, 1)

    inputs = [x, kernel] if bias is None else [x, kernel, bias]

    def backward(g: np.ndarray):
        dx = np.zeros_like(x.data) if x.requires_grad else None
        dw = np.zeros_like(kernel.data) if kernel.requires_grad else None
        dwmat = dw.reshape(Co, ckk) if dw is not None else None
        for b in range(B):
            xp = _pad2d(x.data[b:b + 1], ph, pw, pad_mode)[0]
            dxp = np.zeros_like(xp) if dx is not None else None
            for r0 in range(0, hout, chunk):
                r1 = min(r0 + chunk, hout)
                gmat = g[b, :, r0:r1, :].reshape(Co, (r1 - r0) * wout)
                if dwmat is not None:
                    cols = _im2col(xp, kh, kw, stride, r0, r1, wout)
                    dwmat += gmat @ cols.T
                if dxp is not None:
                    dcols = (wmat.T @ gmat).reshape(Ci, kh, kw, r1 - r0, wout)
                    base = r0 * stride
                    span = (r1 - r0 - 1) * stride + 1
                    for i in range(kh):
                        for j in range(kw):
                            dxp[:, base + i:base + i + span:stride,
                                j:j + (wout - 1) * stride + 1:stride] += dcols[:, i, j]
            if dxp is not None:
                dx[b] = _fold_pad2d(dxp[None], ph, pw, pad_mode)[0]
        db = g.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        grads = [dx, dw]
        if bias is not None:
            grads.append(db)
        return grads

    return _make(out, "conv2d", inputs, backward)


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def _upsample_axis(x: np.ndarray, axis: int) -> np.ndarray:
    x = np.moveaxis(x, axis, -1)
    xm = np.concatenate([x[..., :1], x[..., :-1]], axis=-1)
    xp = np.concatenate([x[..., 1:], x[..., -1:]], axis=-1)
    out = np.empty(x.shape[:-1] + (2 * x.shape[-1],), dtype=x.dtype)
    out[..., 0::2] = 0.75 * x + 0.25 * xm
    out[..., 1::2] = 0.75 * x + 0.25 * xp
    return np.moveaxis(out, -1, axis)


def _upsample_axis_adjoint(g: np.ndarray, axis: int) -> np.ndarray:
    g = np.moveaxis(g, axis, -1)
    ge = g[..., 0::2]
    go = g[..., 1::2]
    dx = 0.75 * (ge + go)
    dx[..., :-1] += 0.25 * ge[..., 1:]
    dx[..., 0] += 0.25 * ge[..., 0]
    dx[..., 1:] += 0.25 * go[..., :-1]
    dx[..., -1] += 0.25 * go[..., -1]
    return np.moveaxis(dx, -1, axis)


def bilinear_upsample2x(x: Tensor) -> Tensor:
    """Double both spatial extents by bilinear interpolation.

    Convention: output pixel centers sit at (i + 0.5) / 2 - 0.5 in input
    coordinates (half-pixel centers), with clamped edges. Each output sample
    is 0.75 of its nearest source pixel plus 0.25 of the adjacent one, which
    preserves constants exactly and the global mean to rounding error.
    """
    if x.data.ndim != 4:
        raise ValueError(f"expected 4D input, got {x.data.shape}")
    out = _upsample_axis(_upsample_axis(x.data, 2), 3)

    def backward(g: np.ndarray):
        return [_upsample_axis_adjoint(_upsample_axis_adjoint(g, 3), 2)]

    return _make(out, "bilinear_upsample2x", [x], backward)


def avg_pool2x(x: Tensor) -> Tensor:
    """Mean over non-overlapping 2x2 blocks; spatial extents must be even."""
    B, C, H, W = x.data.shape
    if H % 2 or W % 2:
        raise ValueError(f"avg_pool2x needs even extents, got {H}x{W}")
    out = x.data.reshape(B, C, H // 2, 2, W // 2, 2).mean(axis=(3, 5))

    def backward(g: np.ndarray):
        dx = np.repeat(np.repeat(g, 2, axis=2), 2, axis=3)
        dx *= np.asarray(0.25, dtype=x.data.dtype)
        return [dx]

    return _make(out, "avg_pool2x", [x], backward)


# ---------------------------------------------------------------------------
# pointwise ops
# ---------------------------------------------------------------------------

def leaky_relu(x: Tensor, alpha: float = 0.2) -> Tensor:
    """x if x > 0 else alpha * x; the subgradient at exactly 0 is alpha."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    a = np.asarray(alpha, dtype=x.data.dtype)
    pos = x.data > 0
    out = np.where(pos, x.data, a * x.data)

    def backward(g: np.ndarray):
        return [np.where(pos, g, a * g)]

    return _make(out, "leaky_relu", [x], backward)


def sigmoid(x: Tensor) -> Tensor:
    """Numerically stable logistic function."""
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    out[~pos] = e / (1.0 + e)

    def backward(g: np.ndarray):
        return [g * out * (1.0 - out)]

    return _make(out, "sigmoid", [x], backward)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient over axes that were broadcast up from ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; ``b`` may broadcast over leading axes of ``a``."""
    try:
        out = a.data * b.data
    except ValueError:
        raise ValueError(
            f"hadamard shapes incompatible: {a.data.shape} vs {b.data.shape}")
    if out.shape != a.data.shape:
        raise ValueError(
            f"hadamard mask {b.data.shape} must broadcast into {a.data.shape}")

    def backward(g: np.ndarray):
        da = g * b.data if a.requires_grad else None
        db = _unbroadcast(g * a.data, b.data.shape) if b.requires_grad else None
        return [da, db]

    return _make(out, "hadamard", [a, b], backward)


def concat_channels(inputs: Sequence[Tensor]) -> Tensor:
    """Concatenate 4D tensors along the channel axis."""
    inputs = list(inputs)
    if not inputs:
        raise ValueError("concat_channels needs at least one input")
    first = inputs[0].data.shape
    for t in inputs[1:]:
        s = t.data.shape
        if s[0] != first[0] or s[2:] != first[2:]:
            raise ValueError(
                f"concat_channels extent mismatch: {first} vs {s}")
    out = np.concatenate([t.data for t in inputs], axis=1)
    sizes = [t.data.shape[1] for t in inputs]
    splits = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray):
        return np.split(g, splits, axis=1)

    return _make(out, "concat_channels", inputs, backward)


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean of squared differences over all elements (scalar output)."""
    if pred.data.shape != target.data.shape:
        raise ValueError(
            f"mse_loss shape mismatch: {pred.data.shape} vs {target.data.shape}")
    diff = pred.data - target.data
    out = np.asarray(np.mean(diff * diff), dtype=pred.data.dtype)
    scale = 2.0 / diff.size

    def backward(g: np.ndarray):
        base = (scale * float(g)) * diff
        dp = base.astype(pred.data.dtype) if pred.requires_grad else None
        dt = (-base).astype(target.data.dtype) if target.requires_grad else None
        return [dp, dt]

    return _make(out, "mse_loss", [pred, target], backward)
