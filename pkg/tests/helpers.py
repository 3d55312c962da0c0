"""Shared test oracles: finite differences and naive direct-loop reference ops.

These deliberately avoid the library's backward machinery (and its im2col
forward path) so they stay independent of the code they check.
"""

import numpy as np

from rasterdip.tensor import Tensor


def finite_diff_grad(f, arrays, which, step=1e-5):
    """Central-difference gradient of scalar f(*arrays) w.r.t. arrays[which]."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    target = arrays[which]
    g = np.zeros_like(target)
    flat = target.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(*arrays)
        flat[i] = orig - step
        fm = f(*arrays)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return g


def rel_error(analytic, numeric):
    """Max abs deviation scaled by the numeric gradient's magnitude."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.max(np.abs(numeric)), 1e-8)
    return np.max(np.abs(analytic - numeric)) / scale


def gradcheck(build_loss, arrays, step=1e-5, tol=1e-4, dtype=np.float64):
    """Compare backward() grads of build_loss(*tensors) against central FD.

    ``build_loss`` must accept Tensors and return a scalar Tensor; it is also
    evaluated on plain perturbed arrays for the numeric side.
    """
    tensors = [Tensor(a, requires_grad=True, dtype=dtype) for a in arrays]
    loss = build_loss(*tensors)
    loss.backward()

    def scalar_f(*arrs):
        ts = [Tensor(a, dtype=np.float64) for a in arrs]
        return build_loss(*ts).item()

    errs = []
    for i, t in enumerate(tensors):
        numeric = finite_diff_grad(scalar_f, arrays, i, step=step)
        analytic = t.grad if t.grad is not None else np.zeros_like(numeric)
        errs.append(rel_error(analytic, numeric))
    return max(errs)


def naive_conv2d(x, w, b=None, stride=1, ph=0, pw=0, pad_mode="zero"):
    """Direct-loop 2D cross-correlation reference."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    B, Ci, H, W = x.shape
    Co, _, kh, kw = w.shape
    if ph or pw:
        mode = "constant" if pad_mode == "zero" else "reflect"
        x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)), mode=mode)
    hout = (H + 2 * ph - kh) // stride + 1
    wout = (W + 2 * pw - kw) // stride + 1
    out = np.zeros((B, Co, hout, wout))
    for n in range(B):
        for o in range(Co):
            for i in range(hout):
                for j in range(wout):
                    acc = 0.0
                    for c in range(Ci):
                        for u in range(kh):
                            for v in range(kw):
                                acc += x[n, c, i * stride + u, j * stride + v] * w[o, c, u, v]
                    out[n, o, i, j] = acc
            if b is not None:
                out[n, o] += b[o]
    return out
