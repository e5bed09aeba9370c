"""Kernel backend selection.

The compiled extension (`prelude.kernels._core`) is used when it imported
successfully; otherwise the numpy fallback takes over. Both expose the same
functions with the same canonical shapes; `use_backend()` switches at runtime
(tests and the benchmark compare the two).

Shape conventions: causal_softmax operates on (n, T, T); softmax_xent on
(N, V) logits with int64 targets; layer_norm on (N, d); gelu and adamw_update
on flat arrays (wrappers here ravel and restore shapes).

The big kernels accept an ``out`` array. Allocating tens of megabytes per
micro-batch costs more in page faults than the arithmetic does, so the
training loop reuses buffers through ``ScratchPool``.
"""

from __future__ import annotations

import numpy as np

from . import numpy_backend

try:
    from . import _core as _compiled
except ImportError:  # extension not built
    _compiled = None

_active = _compiled if _compiled is not None else numpy_backend


class ScratchPool:
    """Reusable named buffers. One persistent array per (tag, shape, dtype);
    taking the same tag again hands back the same memory, so a tag must not
    be taken twice while the first result is still live."""

    def __init__(self):
        self._bufs: dict = {}

    def take(self, tag: str, shape, dtype) -> np.ndarray:
        key = (tag, tuple(shape), np.dtype(dtype))
        buf = self._bufs.get(key)
        if buf is None:
            buf = self._bufs[key] = np.empty(shape, dtype)
        return buf


def available_backends() -> list[str]:
    names = ["numpy"]
    if _compiled is not None:
        names.insert(0, "cython")
    return names


def backend_name() -> str:
    return _active.NAME


def use_backend(name: str) -> None:
    """Select 'cython' or 'numpy'. Raises if the compiled backend is absent."""
    global _active
    if name == "numpy":
        _active = numpy_backend
    elif name == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel extension is not available")
        _active = _compiled
    else:
        raise ValueError(f"unknown backend {name!r}")


def _c(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a)


def causal_softmax(scores: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    return _active.causal_softmax(_c(scores), out)


def causal_softmax_backward(probs: np.ndarray, dprobs: np.ndarray,
                            out: np.ndarray | None = None) -> np.ndarray:
    return _active.causal_softmax_backward(_c(probs), _c(dprobs), out)


def softmax_xent(logits: np.ndarray, targets: np.ndarray, ignore_id: int,
                 out: np.ndarray | None = None):
    return _active.softmax_xent(_c(logits), _c(targets).astype(np.int64, copy=False),
                                int(ignore_id), out)


def gelu(x: np.ndarray) -> np.ndarray:
    return _active.gelu(_c(x).reshape(-1)).reshape(x.shape)


def gelu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return _active.gelu_backward(_c(x).reshape(-1), _c(dy).reshape(-1)).reshape(x.shape)


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float):
    return _active.layer_norm(_c(x), _c(gamma), _c(beta), float(eps))


def layer_norm_backward_x(x, gamma, mean, rstd, dy):
    return _active.layer_norm_backward_x(_c(x), _c(gamma), _c(mean), _c(rstd), _c(dy))


def adamw_update(p, g, m, v, lr, beta1, beta2, eps, weight_decay, step) -> None:
    _active.adamw_update(p.reshape(-1), _c(g).reshape(-1), m.reshape(-1),
                         v.reshape(-1), float(lr), float(beta1), float(beta2),
                         float(eps), float(weight_decay), int(step))


def index_add(out: np.ndarray, idx: np.ndarray, grads: np.ndarray) -> None:
    _active.index_add(out, _c(idx).astype(np.int64, copy=False).reshape(-1), _c(grads))
