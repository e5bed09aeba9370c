"""Fixed 8-layer decoder-only Transformer, instantiable for any vocabulary.

Pre-LN blocks with a final LayerNorm, learned absolute position embeddings,
untied LM head, biases on every linear projection. The forward/backward pass
is hand-rolled over the ops module in a fixed order; there is no autograd.

Parameter names are canonical and stable (they are the checkpoint format's
keys and the unit of selective transfer):

    tok_emb, pos_emb,
    blocks.{i}.ln1.{g,b},
    blocks.{i}.attn.{wq,wk,wv,wo,bq,bk,bv,bo},
    blocks.{i}.ln2.{g,b},
    blocks.{i}.ffn.{w1,b1,w2,b2},
    final_ln.{g,b}, lm_head.{w,b}
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import ops
from .kernels import ScratchPool
from .rng import Rng

INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    d_model: int
    n_heads: int
    n_layers: int
    d_ff: int
    vocab_size: int
    seq_len: int

    def validate(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by "
                             f"n_heads {self.n_heads}")
        for field in ("d_model", "n_heads", "d_ff", "vocab_size", "seq_len"):
            if getattr(self, field) <= 0:
                raise ValueError(f"{field} must be positive")
        if self.n_layers < 0:
            raise ValueError("n_layers must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**{k: int(d[k]) for k in
                      ("d_model", "n_heads", "n_layers", "d_ff", "vocab_size", "seq_len")})


@dataclass
class Model:
    config: ModelConfig
    params: dict[str, np.ndarray]


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Canonical name -> shape map; iteration order is the checkpoint order."""
    d, dff, V, S = config.d_model, config.d_ff, config.vocab_size, config.seq_len
    shapes: dict[str, tuple[int, ...]] = {
        "tok_emb": (V, d),
        "pos_emb": (S, d),
    }
    for i in range(config.n_layers):
        p = f"blocks.{i}"
        shapes[f"{p}.ln1.g"] = (d,)
        shapes[f"{p}.ln1.b"] = (d,)
        for proj in ("wq", "wk", "wv", "wo"):
            shapes[f"{p}.attn.{proj}"] = (d, d)
        for bias in ("bq", "bk", "bv", "bo"):
            shapes[f"{p}.attn.{bias}"] = (d,)
        shapes[f"{p}.ln2.g"] = (d,)
        shapes[f"{p}.ln2.b"] = (d,)
        shapes[f"{p}.ffn.w1"] = (d, dff)
        shapes[f"{p}.ffn.b1"] = (dff,)
        shapes[f"{p}.ffn.w2"] = (dff, d)
        shapes[f"{p}.ffn.b2"] = (d,)
    shapes["final_ln.g"] = (d,)
    shapes["final_ln.b"] = (d,)
    shapes["lm_head.w"] = (d, V)
    shapes["lm_head.b"] = (V,)
    return shapes


def param_count(config: ModelConfig) -> int:
    """Closed-form total parameter count.

    embeddings: V*d + S*d
    per block:  4d (two LayerNorms) + 4d^2 + 4d (attention) + 2*d*dff + dff + d (FFN)
    tail:       2d (final LayerNorm) + d*V + V (untied head)
    """
    d, dff, V, S = config.d_model, config.d_ff, config.vocab_size, config.seq_len
    block = 4 * d + 4 * d * d + 4 * d + 2 * d * dff + dff + d
    return V * d + S * d + config.n_layers * block + 2 * d + d * V + V


def init_param(name: str, shape: tuple[int, ...], rng: Rng) -> np.ndarray:
    """Weights ~ Normal(0, 0.02); biases and LN offsets 0; LN gains 1.

    Each parameter draws from its own stream ``init/<name>``, so
    reinitializing a subset (selective transfer) reproduces exactly what a
    fresh init would have produced for those tensors.
    """
    leaf = name.rsplit(".", 1)[-1]
    if leaf == "g":
        return np.ones(shape, dtype=np.float32)
    if leaf.startswith("b") or leaf == "b":
        return np.zeros(shape, dtype=np.float32)
    return rng.stream(f"init/{name}").normal(shape, std=INIT_STD)


def init(config: ModelConfig, rng: Rng) -> Model:
    config.validate()
    params = {name: init_param(name, shape, rng)
              for name, shape in param_shapes(config).items()}
    return Model(config, params)


def _check_tokens(config: ModelConfig, tokens: np.ndarray) -> None:
    if tokens.ndim != 2:
        raise ValueError(f"tokens must be (B, T), got shape {tokens.shape}")
    B, T = tokens.shape
    if T > config.seq_len:
        raise ValueError(f"sequence length {T} exceeds seq_len {config.seq_len}")
    if tokens.size:
        hi = int(tokens.max())
        if hi >= config.vocab_size or int(tokens.min()) < 0:
            flat = tokens.reshape(-1)
            bad = int(np.argmax((flat >= config.vocab_size) | (flat < 0)))
            raise ValueError(
                f"token id {flat[bad]} out of range at (row {bad // T}, "
                f"pos {bad % T}); vocab_size={config.vocab_size}")


def forward(model: Model, tokens: np.ndarray, pool: ScratchPool | None = None,
            want_caches: bool = False):
    """Logits (B, T, V). With want_caches=True also returns what backward needs."""
    cfg = model.config
    p = model.params
    _check_tokens(cfg, tokens)
    B, T = tokens.shape
    d = cfg.d_model

    emb_x, emb_cache = ops.embedding(p["tok_emb"], tokens)
    h = emb_x + p["pos_emb"][:T]
    blocks = []
    for i in range(cfg.n_layers):
        pre = f"blocks.{i}"
        ln1_out, ln1_c = ops.layer_norm(h, p[f"{pre}.ln1.g"], p[f"{pre}.ln1.b"])
        attn_out, attn_c = ops.causal_attention(
            ln1_out,
            p[f"{pre}.attn.wq"], p[f"{pre}.attn.wk"],
            p[f"{pre}.attn.wv"], p[f"{pre}.attn.wo"],
            p[f"{pre}.attn.bq"], p[f"{pre}.attn.bk"],
            p[f"{pre}.attn.bv"], p[f"{pre}.attn.bo"],
            cfg.n_heads, pool=pool, pool_tag=f"L{i}")
        h = h + attn_out
        ln2_out, ln2_c = ops.layer_norm(h, p[f"{pre}.ln2.g"], p[f"{pre}.ln2.b"])
        f1, f1_c = ops.affine(ln2_out, p[f"{pre}.ffn.w1"], p[f"{pre}.ffn.b1"])
        g, g_c = ops.gelu(f1)
        f2, f2_c = ops.affine(g, p[f"{pre}.ffn.w2"], p[f"{pre}.ffn.b2"])
        h = h + f2
        blocks.append((ln1_c, attn_c, ln2_c, f1_c, g_c, f2_c))
    final_out, final_c = ops.layer_norm(h, p["final_ln.g"], p["final_ln.b"])
    h2 = final_out.reshape(-1, d)
    if pool is not None:
        logits2 = np.matmul(h2, p["lm_head.w"],
                            out=pool.take("logits", (B * T, cfg.vocab_size), h2.dtype))
        logits2 += p["lm_head.b"]
    else:
        logits2 = h2 @ p["lm_head.w"] + p["lm_head.b"]
    logits = logits2.reshape(B, T, cfg.vocab_size)
    if not want_caches:
        return logits
    return logits, (emb_cache, blocks, final_c, h2, tokens.shape)


def loss_and_grads(model: Model, tokens: np.ndarray, targets: np.ndarray,
                   ignore_id: int, pool: ScratchPool | None = None):
    """Mean token NLL plus parameter gradients of the *summed* NLL.

    Returns (loss_sum, count, grads); the training loop divides by its own
    denominator when accumulating micro-batches. grads maps every parameter
    name to an array of the parameter's shape.
    """
    cfg = model.config
    p = model.params
    logits, caches = forward(model, tokens, pool=pool, want_caches=True)
    emb_cache, blocks, final_c, h2, (B, T) = caches
    V = cfg.vocab_size
    d = cfg.d_model

    out_buf = pool.take("dlogits", (B * T, V), logits.dtype) if pool is not None else None
    loss_sum, count, dlogits = ops.softmax_xent_raw(
        logits.reshape(-1, V), targets.reshape(-1), ignore_id, out=out_buf)

    grads: dict[str, np.ndarray] = {}
    # untied head
    if pool is not None:
        grads["lm_head.w"] = np.matmul(h2.T, dlogits,
                                       out=pool.take("d_head_w", (d, V), h2.dtype))
    else:
        grads["lm_head.w"] = h2.T @ dlogits
    grads["lm_head.b"] = dlogits.sum(axis=0)
    dh2 = dlogits @ p["lm_head.w"].T
    dh, grads["final_ln.g"], grads["final_ln.b"] = ops.layer_norm_backward(
        final_c, dh2.reshape(B, T, d))

    for i in reversed(range(cfg.n_layers)):
        pre = f"blocks.{i}"
        ln1_c, attn_c, ln2_c, f1_c, g_c, f2_c = blocks[i]
        dg, grads[f"{pre}.ffn.w2"], grads[f"{pre}.ffn.b2"] = ops.affine_backward(f2_c, dh)
        df1 = ops.gelu_backward(g_c, dg)
        dln2, grads[f"{pre}.ffn.w1"], grads[f"{pre}.ffn.b1"] = ops.affine_backward(f1_c, df1)
        dh_res, grads[f"{pre}.ln2.g"], grads[f"{pre}.ln2.b"] = ops.layer_norm_backward(
            ln2_c, dln2)
        dh = dh + dh_res
        dattn, attn_grads = ops.causal_attention_backward(attn_c, dh, pool=pool)
        for k, v in attn_grads.items():
            grads[f"{pre}.attn.{k}"] = v
        dln1, grads[f"{pre}.ln1.g"], grads[f"{pre}.ln1.b"] = ops.layer_norm_backward(
            ln1_c, dattn)
        dh = dh + dln1

    grads["pos_emb"] = np.zeros_like(p["pos_emb"])
    grads["pos_emb"][:T] = dh.sum(axis=0)
    if pool is not None:
        dtok = pool.take("d_tok_emb", p["tok_emb"].shape, dh.dtype)
        dtok.fill(0.0)
        grads["tok_emb"] = ops.embedding_backward(emb_cache, dh, out=dtok)
    else:
        grads["tok_emb"] = ops.embedding_backward(emb_cache, dh)
    return loss_sum, count, grads


def next_token_distribution(model: Model, prefix: np.ndarray) -> np.ndarray:
    """Softmax over the final position's logits for a 1-D prefix."""
    prefix = np.asarray(prefix)
    if prefix.ndim != 1 or prefix.size < 1:
        raise ValueError("prefix must be a non-empty 1-D token sequence")
    logits = forward(model, prefix[None, :])
    last = logits[0, -1].astype(np.float64)
    last -= last.max()
    e = np.exp(last)
    return e / e.sum()


def attention_maps(model: Model, tokens: np.ndarray) -> np.ndarray:
    """(L, B, H, T, T) attention weights; rows sum to 1, upper triangle 0."""
    cfg = model.config
    p = model.params
    _check_tokens(cfg, tokens)
    B, T = tokens.shape
    emb_x, _ = ops.embedding(p["tok_emb"], tokens)
    h = emb_x + p["pos_emb"][:T]
    maps = np.empty((cfg.n_layers, B, cfg.n_heads, T, T), dtype=np.float32)
    for i in range(cfg.n_layers):
        pre = f"blocks.{i}"
        ln1_out, _ = ops.layer_norm(h, p[f"{pre}.ln1.g"], p[f"{pre}.ln1.b"])
        attn_out, attn_c = ops.causal_attention(
            ln1_out,
            p[f"{pre}.attn.wq"], p[f"{pre}.attn.wk"],
            p[f"{pre}.attn.wv"], p[f"{pre}.attn.wo"],
            p[f"{pre}.attn.bq"], p[f"{pre}.attn.bk"],
            p[f"{pre}.attn.bv"], p[f"{pre}.attn.bo"],
            cfg.n_heads)
        maps[i] = ops.attention_weights_from_cache(attn_c)
        h = h + attn_out
        ln2_out, _ = ops.layer_norm(h, p[f"{pre}.ln2.g"], p[f"{pre}.ln2.b"])
        f1, _ = ops.affine(ln2_out, p[f"{pre}.ffn.w1"], p[f"{pre}.ffn.b1"])
        g, _ = ops.gelu(f1)
        f2, _ = ops.affine(g, p[f"{pre}.ffn.w2"], p[f"{pre}.ffn.b2"])
        h = h + f2
    return maps


def model_astype(model: Model, dtype) -> Model:
    """Copy with all parameters cast; float64 is the gradient-check mode."""
    return Model(model.config,
                 {k: v.astype(dtype) for k, v in model.params.items()})
