"""Selective weight transfer across vocabularies.

A vocabulary change keeps the internal computation and discards the token
interface: attention, FFN and LayerNorm tensors (and the position table,
which is vocabulary-independent) are copied bit-for-bit into the new model,
while the token embedding and LM head are freshly reinitialized. Lineage
metadata records the source checkpoint hash so any checkpoint's phase chain
can be reconstructed.
"""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpoint
from .model import Model, ModelConfig, init_param, param_shapes
from .rng import Rng


class TransferError(ValueError):
    pass


@dataclass(frozen=True)
class TransferSpec:
    transfer: tuple[str, ...] = ("blocks.*", "final_ln.*", "pos_emb")
    reinit: tuple[str, ...] = ("tok_emb", "lm_head.*")
    reinit_stream: str = "transfer-reinit"


def _match(patterns, name: str) -> bool:
    return any(fnmatch.fnmatchcase(name, pat) for pat in patterns)


def classify(spec: TransferSpec, names) -> dict[str, str]:
    """Map each name to 'transfer' or 'reinit'; every name must match
    exactly one side."""
    out = {}
    for name in names:
        t = _match(spec.transfer, name)
        r = _match(spec.reinit, name)
        if t == r:
            kind = "both" if t else "neither"
            raise TransferError(f"parameter {name!r} matched {kind} of the "
                                f"transfer/reinit pattern sets")
        out[name] = "transfer" if t else "reinit"
    return out


def selective_transfer(src: Checkpoint, dst_cfg: ModelConfig,
                       spec: TransferSpec = TransferSpec(),
                       rng: Rng | None = None,
                       src_hash: str | None = None) -> tuple[Model, list]:
    """Build a dst-config model from a source checkpoint.

    Transfer-set tensors are copied bit-exactly (their shapes must agree,
    which pins d_model/n_heads/n_layers/d_ff/seq_len; vocab sizes are free).
    Reinit-set tensors come from the init rules under `rng`. Returns the
    model and its lineage (source lineage + one new record).
    """
    src_cfg = src.config
    for f in ("d_model", "n_heads", "n_layers", "d_ff", "seq_len"):
        a, b = getattr(src_cfg, f), getattr(dst_cfg, f)
        if a != b:
            raise TransferError(f"internal config mismatch: {f} differs "
                                f"(src {a}, dst {b})")
    shapes = param_shapes(dst_cfg)
    kinds = classify(spec, shapes)
    rng = rng or Rng(0, spec.reinit_stream)
    params: dict[str, np.ndarray] = {}
    mismatched = []
    for name, shape in shapes.items():
        if kinds[name] == "transfer":
            srcarr = src.params.get(name)
            if srcarr is None:
                raise TransferError(f"source checkpoint lacks tensor {name!r}")
            if tuple(srcarr.shape) != shape:
                mismatched.append(f"{name}: src{tuple(srcarr.shape)} != dst{shape}")
                continue
            params[name] = srcarr.copy()
        else:
            params[name] = init_param(name, shape, rng.stream(spec.reinit_stream))
    if mismatched:
        raise TransferError("transfer-set shape mismatch: " + "; ".join(mismatched))
    lineage = list(src.lineage) + [{
        "event": "selective_transfer",
        "source_phase": src.phase,
        "source_epoch": src.epoch,
        "source_vocab": src.vocab_id,
        "source_hash": src_hash,
        "reinit": sorted(n for n, k in kinds.items() if k == "reinit"),
        "reinit_seed": rng.seed,
    }]
    return Model(dst_cfg, params), lineage


def diff_checkpoints(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> dict[str, str]:
    """Exact bitwise comparison: name -> equal | changed | missing_a | missing_b."""
    report = {}
    for name in sorted(set(a) | set(b)):
        if name not in a:
            report[name] = "missing_a"
        elif name not in b:
            report[name] = "missing_b"
        elif (a[name].shape == b[name].shape and a[name].dtype == b[name].dtype
              and a[name].tobytes() == b[name].tobytes()):
            report[name] = "equal"
        else:
            report[name] = "changed"
    return report
