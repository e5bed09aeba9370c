"""Differentiable operations for the fixed decoder architecture.

Each op is a pair of functions: ``<name>`` runs forward and returns
``(output, cache)``; ``<name>_backward`` consumes the cache and the output
gradient. There is no general autograd; the model composes these by hand in
a fixed order. All ops preserve the dtype of their inputs, so the same code
runs in float32 for training and float64 for gradient checking.

The attention and cross-entropy ops accept a ScratchPool: their large
intermediates (attention score/probability matrices, logit gradients) are
reused across micro-batches, which matters more than the arithmetic does.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .kernels import ScratchPool

LN_EPS = 1e-5


class ShapeError(ValueError):
    pass


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ShapeError(msg)


def affine(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """y = x @ w + b over the last axis of x."""
    _check(x.shape[-1] == w.shape[0],
           f"affine: inner dims disagree ({x.shape[-1]} vs {w.shape[0]})")
    _check(w.shape[1] == b.shape[0],
           f"affine: bias length {b.shape[0]} != out dim {w.shape[1]}")
    y = x @ w + b
    return y, (x, w)


def affine_backward(cache, dy: np.ndarray):
    x, w = cache
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    dx = (dy2 @ w.T).reshape(x.shape)
    dw = x2.T @ dy2
    db = dy2.sum(axis=0)
    return dx, dw, db


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = LN_EPS):
    d = x.shape[-1]
    _check(gamma.shape == (d,) and beta.shape == (d,), "layer_norm: param shape mismatch")
    x2 = np.ascontiguousarray(x.reshape(-1, d))
    y, mean, rstd = kernels.layer_norm(x2, gamma, beta, eps)
    return y.reshape(x.shape), (x2, gamma, mean, rstd, x.shape)


def layer_norm_backward(cache, dy: np.ndarray):
    x2, gamma, mean, rstd, shape = cache
    dy2 = np.ascontiguousarray(dy.reshape(x2.shape))
    dx = kernels.layer_norm_backward_x(x2, gamma, mean, rstd, dy2)
    xhat = (x2 - mean[:, None]) * rstd[:, None]
    dgamma = (dy2 * xhat).sum(axis=0)
    dbeta = dy2.sum(axis=0)
    return dx.reshape(shape), dgamma, dbeta


def gelu(x: np.ndarray):
    return kernels.gelu(x), x


def gelu_backward(cache, dy: np.ndarray):
    return kernels.gelu_backward(cache, dy)


def causal_attention(x: np.ndarray, wq, wk, wv, wo, bq, bk, bv, bo,
                     n_heads: int, pool: ScratchPool | None = None,
                     pool_tag: str = ""):
    """Multi-head causal self-attention with per-projection biases.

    x: (B, T, d). Position t attends to positions <= t with softmax over
    scaled dot products (scale 1/sqrt(d_head)). Returns (out, cache); the
    attention weights live in the cache and are exposed to probes via
    ``attention_weights_from_cache``.
    """
    B, T, d = x.shape
    _check(d % n_heads == 0, f"d_model {d} not divisible by n_heads {n_heads}")
    dh = d // n_heads
    x2 = x.reshape(-1, d)
    q = (x2 @ wq + bq).reshape(B, T, n_heads, dh)
    k = (x2 @ wk + bk).reshape(B, T, n_heads, dh)
    v = (x2 @ wv + bv).reshape(B, T, n_heads, dh)
    # (B*H, T, dh), contiguous for the batched GEMMs below
    q = np.ascontiguousarray(q.transpose(0, 2, 1, 3)).reshape(B * n_heads, T, dh)
    k = np.ascontiguousarray(k.transpose(0, 2, 1, 3)).reshape(B * n_heads, T, dh)
    v = np.ascontiguousarray(v.transpose(0, 2, 1, 3)).reshape(B * n_heads, T, dh)
    scale = 1.0 / math.sqrt(dh)
    if pool is not None:
        scores = np.matmul(q, k.transpose(0, 2, 1),
                           out=pool.take("attn.scores", (B * n_heads, T, T), x.dtype))
        scores *= scale
        probs = kernels.causal_softmax(
            scores, out=pool.take(f"{pool_tag}.probs", scores.shape, x.dtype))
    else:
        scores = (q @ k.transpose(0, 2, 1)) * scale
        probs = kernels.causal_softmax(scores)
    ctx = probs @ v  # (B*H, T, dh)
    ctx = np.ascontiguousarray(
        ctx.reshape(B, n_heads, T, dh).transpose(0, 2, 1, 3)).reshape(-1, d)
    out = (ctx @ wo + bo).reshape(B, T, d)
    cache = (x2, q, k, v, probs, ctx, wq, wk, wv, wo, n_heads, (B, T, d))
    return out, cache


def attention_weights_from_cache(cache) -> np.ndarray:
    """(B, H, T, T) attention weights for probes."""
    probs = cache[4]
    n_heads = cache[10]
    B, T, _ = cache[11]
    return probs.reshape(B, n_heads, T, T)


def causal_attention_backward(cache, dout: np.ndarray, pool: ScratchPool | None = None):
    x2, q, k, v, probs, ctx, wq, wk, wv, wo, n_heads, (B, T, d) = cache
    dh = d // n_heads
    scale = 1.0 / math.sqrt(dh)
    dout2 = dout.reshape(-1, d)
    dctx = dout2 @ wo.T
    dwo = ctx.T @ dout2
    dbo = dout2.sum(axis=0)
    dctx = np.ascontiguousarray(
        dctx.reshape(B, T, n_heads, dh).transpose(0, 2, 1, 3)).reshape(B * n_heads, T, dh)
    if pool is not None:
        dprobs = np.matmul(dctx, v.transpose(0, 2, 1),
                           out=pool.take("attn.dprobs", probs.shape, probs.dtype))
        dscores = kernels.causal_softmax_backward(
            probs, dprobs, out=pool.take("attn.dscores", probs.shape, probs.dtype))
    else:
        dprobs = dctx @ v.transpose(0, 2, 1)
        dscores = kernels.causal_softmax_backward(probs, dprobs)
    dv = probs.transpose(0, 2, 1) @ dctx
    dq = (dscores @ k) * scale
    dk = (dscores.transpose(0, 2, 1) @ q) * scale

    def merge(h):  # (B*H, T, dh) -> (B*T, d)
        return np.ascontiguousarray(
            h.reshape(B, n_heads, T, dh).transpose(0, 2, 1, 3)).reshape(-1, d)

    dq, dk, dv = merge(dq), merge(dk), merge(dv)
    dx = dq @ wq.T + dk @ wk.T + dv @ wv.T
    grads = {
        "wq": x2.T @ dq, "bq": dq.sum(axis=0),
        "wk": x2.T @ dk, "bk": dk.sum(axis=0),
        "wv": x2.T @ dv, "bv": dv.sum(axis=0),
        "wo": dwo, "bo": dbo,
    }
    return dx.reshape(B, T, d), grads


def softmax_xent_raw(logits2: np.ndarray, targets: np.ndarray, ignore_id: int,
                     out: np.ndarray | None = None):
    """Fused loss + gradient on flat (N, V) logits.

    Returns (loss_sum, count, dlogits) with dlogits = softmax - onehot on
    supervised rows, zero rows elsewhere — the gradient of the *summed* NLL.
    """
    V = logits2.shape[-1]
    tgt = np.ascontiguousarray(targets.reshape(-1))
    if tgt.size and int(tgt.max(initial=0)) >= V:
        bad = int(np.argmax(tgt >= V))
        raise ValueError(f"target id {tgt[bad]} out of range at position {bad} (V={V})")
    return kernels.softmax_xent(logits2, tgt, ignore_id, out=out)


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray, ignore_id: int):
    """Mean NLL over positions whose target != ignore_id.

    logits: (B, T, V) or (N, V); targets: matching integer array.
    Returns (loss, cache). Raises if every position is ignored.
    """
    V = logits.shape[-1]
    loss_sum, count, dlogits = softmax_xent_raw(
        np.ascontiguousarray(logits.reshape(-1, V)), targets, ignore_id)
    if count == 0:
        raise ValueError("no supervised positions (all targets ignored)")
    return loss_sum / count, (dlogits, count, logits.shape)


def softmax_cross_entropy_backward(cache, dloss: float = 1.0):
    dlogits, count, shape = cache
    return (dlogits * (dloss / count)).reshape(shape)


def embedding(table: np.ndarray, ids: np.ndarray):
    _check(ids.min(initial=0) >= 0 and ids.max(initial=0) < table.shape[0],
           "embedding: id out of range")
    return table[ids], (table.shape, ids)


def embedding_backward(cache, dout: np.ndarray, out: np.ndarray | None = None):
    shape, ids = cache
    dtable = out if out is not None else np.zeros(shape, dtype=dout.dtype)
    kernels.index_add(dtable, ids.reshape(-1),
                      np.ascontiguousarray(dout.reshape(-1, shape[1])))
    return dtable
