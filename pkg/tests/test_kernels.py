"""Backend agreement: the compiled kernels and the numpy fallback must match
on every function, in both float32 and float64."""

import numpy as np
import pytest

from prelude import kernels

BACKENDS = kernels.available_backends()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2,
                                reason="compiled backend not built")


@pytest.fixture(autouse=True)
def restore_backend():
    yield
    kernels.use_backend(BACKENDS[0])


def both(fn, *args, **kw):
    outs = []
    for b in ("cython", "numpy"):
        kernels.use_backend(b)
        outs.append(fn(*args, **kw))
    return outs


@needs_both
@pytest.mark.parametrize("dtype,tol", [(np.float32, 1e-5), (np.float64, 1e-10)])
def test_causal_softmax_agree(dtype, tol):
    gen = np.random.default_rng(0)
    s = gen.standard_normal((3, 17, 17)).astype(dtype) * 3
    a, b = both(kernels.causal_softmax, s)
    assert np.abs(a - b).max() < tol
    assert a.dtype == b.dtype == dtype
    # both honor the out= buffer
    buf = np.empty_like(s)
    kernels.use_backend("cython")
    out = kernels.causal_softmax(s, out=buf)
    assert out is buf


@needs_both
@pytest.mark.parametrize("dtype,tol", [(np.float32, 1e-5), (np.float64, 1e-10)])
def test_causal_softmax_backward_agree(dtype, tol):
    gen = np.random.default_rng(1)
    s = gen.standard_normal((2, 9, 9)).astype(dtype)
    kernels.use_backend("numpy")
    p = kernels.causal_softmax(s)
    dp = gen.standard_normal(p.shape).astype(dtype)
    a, b = both(kernels.causal_softmax_backward, p, dp)
    assert np.abs(a - b).max() < tol


@needs_both
@pytest.mark.parametrize("dtype,tol", [(np.float32, 2e-5), (np.float64, 1e-10)])
def test_softmax_xent_agree(dtype, tol):
    gen = np.random.default_rng(2)
    logits = gen.standard_normal((33, 101)).astype(dtype) * 4
    targets = gen.integers(0, 101, 33)
    targets[::7] = 0
    (l1, c1, d1), (l2, c2, d2) = both(kernels.softmax_xent, logits, targets, 0)
    assert c1 == c2
    assert abs(l1 - l2) / abs(l2) < tol
    assert np.abs(d1 - d2).max() < tol


@needs_both
@pytest.mark.parametrize("dtype,tol", [(np.float32, 1e-6), (np.float64, 1e-12)])
def test_gelu_agree(dtype, tol):
    gen = np.random.default_rng(3)
    x = (gen.standard_normal((200,)) * 5).astype(dtype)
    a, b = both(kernels.gelu, x)
    assert np.abs(a - b).max() < tol
    dy = gen.standard_normal(x.shape).astype(dtype)
    a, b = both(kernels.gelu_backward, x, dy)
    assert np.abs(a - b).max() < tol


@needs_both
@pytest.mark.parametrize("dtype,tol", [(np.float32, 1e-5), (np.float64, 1e-11)])
def test_layer_norm_agree(dtype, tol):
    gen = np.random.default_rng(4)
    x = gen.standard_normal((40, 16)).astype(dtype)
    g = (gen.standard_normal(16) + 2).astype(dtype)
    be = gen.standard_normal(16).astype(dtype)
    (y1, m1, r1), (y2, m2, r2) = both(kernels.layer_norm, x, g, be, 1e-5)
    assert np.abs(y1 - y2).max() < tol
    assert np.abs(m1 - m2).max() < tol
    dy = gen.standard_normal(x.shape).astype(dtype)
    a, b = both(kernels.layer_norm_backward_x, x, g, m1, r1, dy)
    assert np.abs(a - b).max() < tol


@needs_both
@pytest.mark.parametrize("dtype,tol", [(np.float32, 1e-6), (np.float64, 1e-12)])
def test_adamw_agree(dtype, tol):
    gen = np.random.default_rng(5)
    outs = []
    for backend in ("cython", "numpy"):
        kernels.use_backend(backend)
        p = gen.standard_normal(64).astype(dtype).copy()
        p0 = p.copy()
        m = np.zeros_like(p)
        v = np.zeros_like(p)
        g = np.full_like(p, 0.5)
        for step in (1, 2, 3):
            kernels.adamw_update(p, g, m, v, 1e-2, 0.9, 0.999, 1e-8, 0.1, step)
        outs.append((p, m, v, p0))
        gen = np.random.default_rng(5)  # same params for the other backend
    (p1, m1, v1, _), (p2, m2, v2, _) = outs
    assert np.abs(p1 - p2).max() < tol
    assert np.abs(m1 - m2).max() < tol
    assert np.abs(v1 - v2).max() < tol


@needs_both
def test_index_add_agree():
    gen = np.random.default_rng(6)
    idx = gen.integers(0, 7, 30)
    grads = gen.standard_normal((30, 4)).astype(np.float32)
    outs = []
    for backend in ("cython", "numpy"):
        kernels.use_backend(backend)
        buf = np.zeros((7, 4), dtype=np.float32)
        kernels.index_add(buf, idx, grads)
        outs.append(buf)
    assert np.allclose(outs[0], outs[1], atol=1e-6)


@needs_both
def test_repeatability_within_backend():
    gen = np.random.default_rng(7)
    logits = gen.standard_normal((64, 333)).astype(np.float32)
    targets = gen.integers(0, 333, 64)
    for backend in BACKENDS:
        kernels.use_backend(backend)
        l1, _, d1 = kernels.softmax_xent(logits, targets, -1)
        l2, _, d2 = kernels.softmax_xent(logits, targets, -1)
        assert l1 == l2
        assert np.array_equal(d1, d2)


def test_use_backend_validation():
    with pytest.raises(ValueError):
        kernels.use_backend("cuda")
