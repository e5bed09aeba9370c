"""Benchmark: compiled kernels vs the numpy fallback, and the end-to-end
training step through both.

Run:  python benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import time

import numpy as np

from prelude import kernels
from prelude import model as M
from prelude.kernels import ScratchPool
from prelude.rng import Rng

B, T, D, DFF = 16, 256, 16, 64


def timeit(fn, repeat):
    fn()
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat * 1e3


def bench_kernels(repeat):
    gen = np.random.default_rng(0)
    scores = gen.standard_normal((B, T, T)).astype(np.float32)
    probs_buf = np.empty_like(scores)
    logits = {V: gen.standard_normal((B * T, V)).astype(np.float32)
              for V in (160, 2048, 8192)}
    targets = {V: gen.integers(0, V, B * T) for V in logits}
    dl_buf = {V: np.empty_like(l) for V, l in logits.items()}
    x = gen.standard_normal((B * T, DFF)).astype(np.float32)
    g1 = np.ones(DFF, dtype=np.float32)
    b1 = np.zeros(DFF, dtype=np.float32)

    cases = [
        ("causal_softmax (16,256,256)",
         lambda: kernels.causal_softmax(scores, out=probs_buf)),
        ("gelu (4096x64)", lambda: kernels.gelu(x)),
        ("layer_norm (4096x64)", lambda: kernels.layer_norm(x, g1, b1, 1e-5)),
    ]
    for V in logits:
        cases.append((f"softmax_xent V={V}",
                      lambda V=V: kernels.softmax_xent(logits[V], targets[V],
                                                       -1, out=dl_buf[V])))

    rows = []
    for name, fn in cases:
        per = {}
        for backend in kernels.available_backends():
            kernels.use_backend(backend)
            per[backend] = timeit(fn, repeat)
        rows.append((name, per))
    return rows


def bench_step(repeat):
    rows = []
    for V in (160, 2048):
        cfg = M.ModelConfig(D, 1, 8, DFF, V, T)
        model = M.init(cfg, Rng(42))
        gen = np.random.default_rng(0)
        tok = gen.integers(0, V, (B, T))
        tgt = gen.integers(0, V, (B, T))
        pool = ScratchPool()
        per = {}
        for backend in kernels.available_backends():
            kernels.use_backend(backend)
            per[backend] = timeit(
                lambda: M.loss_and_grads(model, tok, tgt, -1, pool=pool),
                max(3, repeat // 4))
        rows.append((f"train step d=16 V={V}", per))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = kernels.available_backends()
    print(f"backends: {backends}")
    rows = bench_kernels(args.repeat) + bench_step(args.repeat)
    width = max(len(r[0]) for r in rows)
    header = f"{'kernel'.ljust(width)}  " + "  ".join(f"{b:>10}" for b in backends)
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    for name, per in rows:
        cells = "  ".join(f"{per[b]:9.2f}ms" for b in backends)
        line = f"{name.ljust(width)}  {cells}"
        if len(backends) == 2:
            line += f"  {per['numpy'] / per['cython']:7.1f}x"
        print(line)
    kernels.use_backend(backends[0])


if __name__ == "__main__":
    main()
