"""Numpy implementations of the hot kernels.

This is the fallback backend used when the compiled extension is not
available. Every function here has a bit-for-bit-stable result for a fixed
input (pure numpy, fixed reduction order); the compiled backend agrees with
these to float rounding, not bitwise.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

_SQRT_2_OVER_PI = 0.7978845608028654
_GELU_C = 0.044715


def causal_softmax(scores: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Row-wise softmax over keys 0..t for query t; strict upper triangle is 0.

    scores: (n, T, T) with n = batch * heads.
    """
    n, T, _ = scores.shape
    mask = np.triu(np.ones((T, T), dtype=bool), k=1)
    s = np.where(mask, -np.inf, scores)
    m = s.max(axis=-1, keepdims=True)
    e = np.exp(s - m)
    e[:, mask] = 0.0
    p = (e / e.sum(axis=-1, keepdims=True)).astype(scores.dtype, copy=False)
    if out is None:
        return p
    np.copyto(out, p)
    return out


def causal_softmax_backward(probs: np.ndarray, dprobs: np.ndarray,
                            out: np.ndarray | None = None) -> np.ndarray:
    """Jacobian-vector product of causal_softmax. probs has zero upper triangle."""
    inner = (dprobs * probs).sum(axis=-1, keepdims=True)
    ds = (probs * (dprobs - inner)).astype(probs.dtype, copy=False)
    if out is None:
        return ds
    np.copyto(out, ds)
    return out


def softmax_xent(logits: np.ndarray, targets: np.ndarray, ignore_id: int,
                 out: np.ndarray | None = None):
    """Summed NLL and unscaled gradient of a row-wise softmax cross-entropy.

    Returns (loss_sum, n_valid, dlogits) where dlogits rows hold
    softmax(logits) - onehot(target) for supervised rows and zeros for rows
    whose target equals ignore_id. The caller divides by n_valid to obtain
    the mean loss and its gradient.
    """
    N, V = logits.shape
    targets = targets.reshape(-1)
    valid = targets != ignore_id
    m = logits.max(axis=-1, keepdims=True)
    e = np.exp(logits - m)
    z = e.sum(axis=-1, keepdims=True)
    p = e / z
    rows = np.arange(N)
    log_probs = (logits[rows, targets.clip(0, V - 1)] - m[:, 0]) - np.log(z[:, 0])
    loss_sum = float(-(log_probs[valid].astype(np.float64)).sum())
    dlogits = p.astype(logits.dtype, copy=False)
    dlogits[rows[valid], targets[valid]] -= 1.0
    dlogits[~valid] = 0.0
    if out is not None:
        np.copyto(out, dlogits)
        dlogits = out
    return loss_sum, int(valid.sum()), dlogits


def gelu(x: np.ndarray) -> np.ndarray:
    """Gaussian error linear unit, tanh approximation."""
    inner = _SQRT_2_OVER_PI * (x + _GELU_C * x ** 3)
    return (0.5 * x * (1.0 + np.tanh(inner))).astype(x.dtype, copy=False)


def gelu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    t = np.tanh(_SQRT_2_OVER_PI * (x + _GELU_C * x ** 3))
    dinner = _SQRT_2_OVER_PI * (1.0 + 3.0 * _GELU_C * x ** 2)
    grad = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * dinner
    return (dy * grad).astype(x.dtype, copy=False)


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float):
    """Per-row normalization. Returns (y, mean, rstd); mean/rstd feed backward."""
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    y = (x - mean) * rstd * gamma + beta
    return (y.astype(x.dtype, copy=False),
            mean[:, 0].astype(x.dtype, copy=False),
            rstd[:, 0].astype(x.dtype, copy=False))


def layer_norm_backward_x(x: np.ndarray, gamma: np.ndarray, mean: np.ndarray,
                          rstd: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. x only; dgamma/dbeta are cheap reductions done by the caller."""
    mean = mean[:, None]
    rstd = rstd[:, None]
    xhat = (x - mean) * rstd
    dxhat = dy * gamma
    d = x.shape[-1]
    dx = rstd * (dxhat
                 - dxhat.mean(axis=-1, keepdims=True)
                 - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True) / d)
    return dx.astype(x.dtype, copy=False)


def index_add(out: np.ndarray, idx: np.ndarray, grads: np.ndarray) -> None:
    """out[idx[i]] += grads[i] with duplicate indices accumulated."""
    np.add.at(out, idx, grads)


def adamw_update(p: np.ndarray, g: np.ndarray, m: np.ndarray, v: np.ndarray,
                 lr: float, beta1: float, beta2: float, eps: float,
                 weight_decay: float, step: int) -> None:
    """In-place AdamW step with decoupled weight decay and bias correction."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    mhat = m / bc1
    vhat = v / bc2
    if weight_decay != 0.0:
        p *= 1.0 - lr * weight_decay
    p -= (lr * mhat / (np.sqrt(vhat) + eps)).astype(p.dtype, copy=False)
