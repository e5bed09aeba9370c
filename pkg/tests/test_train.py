import math

import numpy as np
import pytest

from prelude import corpus, model as M, train
from prelude.rng import Rng


def small_chunks(n_rows, vocab=64, seed=0):
    gen = np.random.default_rng(seed)
    rows = gen.integers(0, vocab, (n_rows, 257))
    return corpus.ChunkSet("wordlevel-test", vocab, rows)


def patterned_chunks(n_rows, vocab=64, seed=0):
    """Highly learnable data: ascending mod-vocab runs with noise."""
    gen = np.random.default_rng(seed)
    starts = gen.integers(0, vocab, n_rows)
    base = (starts[:, None] + np.arange(257)) % vocab
    noise = gen.integers(0, vocab, base.shape)
    mask = gen.random(base.shape) < 0.02
    rows = np.where(mask, noise, base)
    return corpus.ChunkSet("wordlevel-test", vocab, rows)


def tiny_model(vocab=64, layers=1, d=8):
    return M.init(M.ModelConfig(d, 1, layers, 4 * d, vocab, 256), Rng(5))


# ------------------------------------------------------------- lr schedule

def test_lr_warmup_and_decay():
    cfg = train.TrainConfig()
    assert train.lr_at(100, cfg, 1000) == pytest.approx(0.5e-3)
    assert train.lr_at(200, cfg, 1000) == pytest.approx(1e-3)
    assert train.lr_at(1000, cfg, 1000) == pytest.approx(1e-4)
    # midpoint of the cosine leg
    mid = train.lr_at(600, cfg, 1000)
    assert mid == pytest.approx(1e-4 + 0.5 * (1e-3 - 1e-4))
    with pytest.raises(train.TrainingError):
        train.lr_at(1, cfg, 100)  # horizon shorter than warmup


def test_lr_monotone_after_warmup():
    cfg = train.TrainConfig()
    vals = [train.lr_at(s, cfg, 2000) for s in range(200, 2001)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


# ------------------------------------------------------------------ adamw

def test_adamw_zero_grad_zero_decay_is_identity():
    cfg = train.TrainConfig(weight_decay=0.0)
    params = {"w": np.ones((3, 3), dtype=np.float32)}
    state = train.AdamState.for_params(params)
    train.adamw_step(params, {"w": np.zeros((3, 3), dtype=np.float32)},
                     state, lr=1e-3, cfg=cfg)
    assert np.array_equal(params["w"], np.ones((3, 3), dtype=np.float32))


def test_adamw_decay_only_scales_matrices():
    cfg = train.TrainConfig(weight_decay=0.1)
    params = {"w": np.full((2, 2), 2.0, dtype=np.float32),
              "b": np.full((2,), 2.0, dtype=np.float32)}
    state = train.AdamState.for_params(params)
    zeros = {k: np.zeros_like(v) for k, v in params.items()}
    train.adamw_step(params, zeros, state, lr=0.5, cfg=cfg)
    assert np.allclose(params["w"], 2.0 * (1 - 0.5 * 0.1))
    assert np.allclose(params["b"], 2.0)  # biases exempt from decay


def test_adamw_converges_on_quadratic():
    # minimize (x - 3)^2 from x = 0; 1-D closed-form oracle
    cfg = train.TrainConfig(weight_decay=0.0)
    params = {"x": np.zeros(1, dtype=np.float64)}
    state = train.AdamState.for_params(params)
    for _ in range(200):
        g = {"x": 2.0 * (params["x"] - 3.0)}
        train.adamw_step(params, g, state, lr=0.1, cfg=cfg)
    assert abs(params["x"][0] - 3.0) < 1e-2


def test_adamw_aborts_on_nan():
    cfg = train.TrainConfig()
    params = {"w": np.ones((2, 2), dtype=np.float32)}
    state = train.AdamState.for_params(params)
    bad = {"w": np.array([[np.nan, 0], [0, 0]], dtype=np.float32)}
    with pytest.raises(train.TrainingDiverged, match="w"):
        train.adamw_step(params, bad, state, lr=1e-3, cfg=cfg)


# ------------------------------------------------------------------- clip

def test_clip_norms():
    g = {"a": np.array([0.3, 0.4], dtype=np.float32)}
    norm = train.clip_gradients(g, 1.0)
    assert norm == pytest.approx(0.5)
    assert np.allclose(g["a"], [0.3, 0.4])  # untouched below the cap

    g = {"a": np.array([4.0], dtype=np.float32)}
    norm = train.clip_gradients(g, 1.0)
    assert norm == pytest.approx(4.0)
    assert np.allclose(g["a"], [1.0])  # scaled by 0.25

    gen = np.random.default_rng(0)
    for _ in range(20):
        g = {"a": gen.normal(size=7).astype(np.float32) * 10,
             "b": gen.normal(size=(2, 3)).astype(np.float32) * 10}
        train.clip_gradients(g, 1.0)
        post = math.sqrt(sum(float((x ** 2).sum()) for x in g.values()))
        assert post <= 1.0 + 1e-6


# ------------------------------------------------------------- stop rules

def test_plateau_rule_spec_series():
    assert train.plateau_stop_epoch([100.0, 90.0, 88.5]) == 2


def test_plateau_respects_min_epochs():
    # a sub-threshold improvement at epoch 1 cannot trigger
    assert train.plateau_stop_epoch([100.0, 99.9, 60.0, 59.99]) == 3
    assert train.plateau_stop_epoch([100.0, 99.9]) is None


def test_plateau_fires_on_worsening():
    assert train.plateau_stop_epoch([100.0, 90.0, 91.0]) == 2


def test_early_stop_patience():
    series = [5.0, 4.0, 3.0] + [3.1] * 25
    halt, best = train.early_stop_epoch(series, patience=20)
    assert (halt, best) == (22, 2)
    halt, best = train.early_stop_epoch([5.0, 4.9, 4.8], patience=20)
    assert halt is None and best == 2


# ------------------------------------------------------------- evaluation

def test_evaluate_uniform_logits_ppl_equals_vocab():
    m = tiny_model(vocab=8192, layers=0, d=4)
    m.params["lm_head.w"][:] = 0
    m.params["lm_head.b"][:] = 0
    val = small_chunks(8, vocab=8192, seed=3)
    loss, ppl = train.evaluate(m, val)
    assert ppl == pytest.approx(8192, rel=0.01)
    assert ppl == pytest.approx(math.exp(loss), rel=1e-6)


def test_evaluate_batch_size_independent():
    m = tiny_model()
    val = small_chunks(10)
    l1, _ = train.evaluate(m, val, micro_batch=16)
    l2, _ = train.evaluate(m, val, micro_batch=3)
    l3, _ = train.evaluate(m, val, micro_batch=10)
    assert l1 == pytest.approx(l2, rel=1e-5)
    assert l1 == pytest.approx(l3, rel=1e-5)


# ------------------------------------------------------------ train_phase

def test_train_phase_bookkeeping_and_loss_drops():
    m = tiny_model()
    tr = patterned_chunks(100, seed=1)
    va = patterned_chunks(20, seed=2)
    cfg = train.TrainConfig(max_epochs=3, warmup_steps=2, micro_batch=16,
                            accum=2, seed=42)
    res = train.train_phase(m, tr, va, cfg, stop="fixed", phase="unit")
    # ceil(100/16) = 7 micro-batches, ceil(7/2) = 4 steps per epoch
    assert [r.micro_batches for r in res.log] == [7, 14, 21]
    assert [r.steps for r in res.log] == [4, 8, 12]
    assert [r.epoch for r in res.log] == [0, 1, 2]
    assert all(r.phase == "unit" for r in res.log)
    assert res.log[-1].val_loss < res.log[0].val_loss
    for r in res.log:
        assert r.val_ppl == pytest.approx(math.exp(r.val_loss), rel=1e-6)


def test_train_phase_deterministic():
    cfg = train.TrainConfig(max_epochs=2, warmup_steps=2, seed=7)
    logs = []
    for _ in range(2):
        m = tiny_model()
        res = train.train_phase(m, patterned_chunks(60, seed=1),
                                patterned_chunks(12, seed=2), cfg, stop="fixed")
        logs.append([(r.train_loss, r.val_loss, r.val_ppl, r.lr) for r in res.log])
    assert logs[0] == logs[1]  # bit-identical metrics


def test_train_phase_early_stop_returns_best():
    m = tiny_model()
    cfg = train.TrainConfig(max_epochs=12, warmup_steps=2, patience=3, seed=3)
    res = train.train_phase(m, patterned_chunks(40, seed=4),
                            patterned_chunks(10, seed=5), cfg, stop="early_stop")
    best_seen = min(r.val_loss for r in res.log)
    returned_loss, _ = train.evaluate(res.model, patterned_chunks(10, seed=5))
    assert returned_loss == pytest.approx(best_seen, rel=1e-6)
    assert res.best_val_loss == pytest.approx(best_seen)


def test_train_phase_vocab_mismatch():
    m = tiny_model(vocab=64)
    bad = corpus.ChunkSet("music160", 160, np.zeros((4, 257), dtype=np.uint16))
    good = small_chunks(4)
    with pytest.raises(train.TrainingError, match="vocab"):
        train.train_phase(m, bad, good, train.TrainConfig(max_epochs=1), stop="fixed")
    with pytest.raises(train.TrainingError, match="vocab"):
        train.train_phase(m, corpus.ChunkSet("wordlevel-test", 32,
                                             np.zeros((4, 257), dtype=np.uint16)),
                          corpus.ChunkSet("wordlevel-test", 32,
                                          np.zeros((4, 257), dtype=np.uint16)),
                          train.TrainConfig(max_epochs=1), stop="fixed")


def test_metrics_jsonl_roundtrip(tmp_path):
    recs = [train.EpochRecord("music", 0, 2.0, 1.9, math.exp(1.9), 10, 20, 1e-3),
            train.EpochRecord("music", 1, 1.8, 1.7, math.exp(1.7), 20, 40, 9e-4)]
    p = tmp_path / "metrics.jsonl"
    train.write_metrics_jsonl(p, recs)
    again = train.read_metrics_jsonl(p)
    assert again == recs
