import numpy as np
import pytest

from prelude import checkpoint as C
from prelude import model as M
from prelude import transfer as T
from prelude.rng import Rng


def cfg(vocab, d=16, layers=3):
    return M.ModelConfig(d_model=d, n_heads=1, n_layers=layers, d_ff=4 * d,
                         vocab_size=vocab, seq_len=256)


def make_src(vocab=160, d=16, layers=3, seed=11):
    m = M.init(cfg(vocab, d, layers), Rng(seed))
    return C.Checkpoint(config=m.config, params=m.params, vocab_id="music160",
                        seed=seed, phase="music", epoch=5, best_val_loss=1.0,
                        lineage=[{"event": "init"}])


def test_transfer_music_to_language():
    src = make_src()
    dst, lineage = T.selective_transfer(src, cfg(50257), rng=Rng(42),
                                        src_hash="abc123")
    assert dst.params["tok_emb"].shape == (50257, 16)
    for name in src.params:
        if name.startswith("blocks.") or name.startswith("final_ln.") or name == "pos_emb":
            assert np.array_equal(dst.params[name], src.params[name]), name
    # reinit set differs in shape or bits
    assert dst.params["lm_head.w"].shape == (16, 50257)
    assert lineage[-1]["event"] == "selective_transfer"
    assert lineage[-1]["source_hash"] == "abc123"
    assert "tok_emb" in lineage[-1]["reinit"]
    assert lineage[0] == {"event": "init"}


def test_transfer_reinit_matches_fresh_init_rules():
    src = make_src()
    rng = Rng(42)
    dst, _ = T.selective_transfer(src, cfg(1000), rng=rng)
    spec = T.TransferSpec()
    fresh = M.init_param("tok_emb", (1000, 16), Rng(42).stream(spec.reinit_stream))
    assert np.array_equal(dst.params["tok_emb"], fresh)


def test_transfer_identity_when_everything_transfers():
    src = make_src()
    spec = T.TransferSpec(transfer=("*",), reinit=())
    dst, _ = T.selective_transfer(src, cfg(160), spec, rng=Rng(1))
    for name, p in src.params.items():
        assert np.array_equal(dst.params[name], p), name


def test_transfer_rejects_internal_mismatch():
    src = make_src(d=16)
    with pytest.raises(T.TransferError, match="d_model"):
        T.selective_transfer(src, cfg(50257, d=32), rng=Rng(0))


def test_transfer_rejects_missing_tensor():
    src = make_src()
    del src.params["blocks.1.attn.wq"]
    with pytest.raises(T.TransferError, match="blocks.1.attn.wq"):
        T.selective_transfer(src, cfg(50257), rng=Rng(0))


def test_spec_coverage_is_exact():
    names = M.param_shapes(cfg(160)).keys()
    kinds = T.classify(T.TransferSpec(), names)
    assert set(kinds.values()) == {"transfer", "reinit"}
    reinit = {n for n, k in kinds.items() if k == "reinit"}
    assert reinit == {"tok_emb", "lm_head.w", "lm_head.b"}
    with pytest.raises(T.TransferError, match="neither"):
        T.classify(T.TransferSpec(transfer=("blocks.*",)), names)
    with pytest.raises(T.TransferError, match="both"):
        T.classify(T.TransferSpec(transfer=("*",)), names)


def test_diff_checkpoints():
    a = make_src().params
    assert set(T.diff_checkpoints(a, a).values()) == {"equal"}
    b = {k: v.copy() for k, v in a.items()}
    b["tok_emb"][0, 0] += 1.0
    del b["final_ln.g"]
    b["extra"] = np.zeros(3, dtype=np.float32)
    rep = T.diff_checkpoints(a, b)
    assert rep["tok_emb"] == "changed"
    assert rep["final_ln.g"] == "missing_b"
    assert rep["extra"] == "missing_a"
    assert rep["blocks.0.attn.wq"] == "equal"


def test_diff_after_transfer_shows_reinit_only():
    src = make_src()
    dst, _ = T.selective_transfer(src, cfg(160), rng=Rng(99))
    rep = T.diff_checkpoints(src.params, dst.params)
    changed = {n for n, s in rep.items() if s != "equal"}
    assert changed == {"tok_emb", "lm_head.w"}  # zero biases stay bit-equal
