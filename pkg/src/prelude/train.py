"""Phase training loop.

One phase = repeated shuffled passes over a ChunkSet with AdamW, linear
warmup followed by cosine decay, global-norm gradient clipping and gradient
accumulation, evaluating on a validation ChunkSet after every epoch. Three
stop rules cover the pipeline's needs:

    fixed      run exactly cfg.max_epochs epochs
    early_stop keep the best-validation model, halt after cfg.patience
               epochs without a new best (at most cfg.max_epochs)
    plateau    halt once the relative per-epoch validation improvement
               drops below cfg.plateau_threshold, never before epoch index
               cfg.plateau_min_epochs

Training is bit-reproducible for a fixed (seed, config, data, thread
setting): shuffles come from the seeded stream "shuffle/epoch<i>", and every
reduction has a fixed order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import kernels
from .corpus import ChunkSet
from .model import Model, forward, loss_and_grads
from .ops import softmax_xent_raw
from .rng import Rng

STOP_RULES = ("fixed", "early_stop", "plateau")


class TrainingError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    peak_lr: float = 1e-3
    final_lr: float = 1e-4
    warmup_steps: int = 200
    weight_decay: float = 0.1
    clip_norm: float = 1.0
    accum: int = 2
    micro_batch: int = 16
    max_epochs: int = 200
    patience: int = 20
    plateau_threshold: float = 0.025
    plateau_min_epochs: int = 2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 42
    ignore_id: int = -1  # chunk streams carry no padding; nothing is ignored

    def __post_init__(self):
        if not self.final_lr < self.peak_lr:
            raise TrainingError("final_lr must be below peak_lr")
        for f in ("peak_lr", "final_lr", "warmup_steps", "clip_norm", "accum",
                  "micro_batch", "max_epochs", "patience"):
            if getattr(self, f) <= 0:
                raise TrainingError(f"{f} must be positive")
        if self.weight_decay < 0:
            raise TrainingError("weight_decay must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class EpochRecord:
    phase: str
    epoch: int          # 0-based; "E0" = after the first epoch
    train_loss: float
    val_loss: float
    val_ppl: float
    steps: int          # cumulative optimizer steps
    micro_batches: int  # cumulative micro-batches
    lr: float           # schedule value at epoch end

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def write_metrics_jsonl(path, log: list[EpochRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for rec in log:
            f.write(rec.to_json() + "\n")


def read_metrics_jsonl(path) -> list[EpochRecord]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                out.append(EpochRecord(**json.loads(line)))
    return out


def lr_at(step: int, cfg: TrainConfig, total_steps: int) -> float:
    """Schedule value for 1-based optimizer step `step`.

    Linear 0 -> peak over the warmup, then cosine peak -> final over the
    rest of the phase's step budget.
    """
    if total_steps <= cfg.warmup_steps:
        raise TrainingError("total_steps must exceed warmup_steps")
    if step <= cfg.warmup_steps:
        return cfg.peak_lr * step / cfg.warmup_steps
    progress = (step - cfg.warmup_steps) / (total_steps - cfg.warmup_steps)
    progress = min(max(progress, 0.0), 1.0)
    return cfg.final_lr + 0.5 * (cfg.peak_lr - cfg.final_lr) * (1.0 + math.cos(math.pi * progress))


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()})


def decayed(name: str, param: np.ndarray) -> bool:
    """Decoupled weight decay applies to matrix-shaped parameters only;
    biases and LayerNorm vectors are exempt."""
    return param.ndim >= 2


def adamw_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
               state: AdamState, lr: float, cfg: TrainConfig) -> None:
    state.step += 1
    for name, p in params.items():
        g = grads[name]
        if not np.isfinite(g).all():
            raise TrainingDiverged(f"non-finite gradient in {name} at "
                                   f"optimizer step {state.step}")
        wd = cfg.weight_decay if decayed(name, p) else 0.0
        kernels.adamw_update(p, g, state.m[name], state.v[name], lr,
                             cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps,
                             wd, state.step)


def plateau_stop_epoch(val_losses, threshold: float = 0.025,
                       min_epochs: int = 2) -> int | None:
    """First 0-based epoch index where the plateau rule fires, else None.

    Fires at epoch e when the relative improvement over the previous epoch,
    (v[e-1] - v[e]) / v[e-1], is below `threshold`; never before epoch index
    `min_epochs` (the first two epochs cannot trigger it).
    """
    for e in range(1, len(val_losses)):
        if e < min_epochs:
            continue
        if (val_losses[e - 1] - val_losses[e]) / val_losses[e - 1] < threshold:
            return e
    return None


def early_stop_epoch(val_losses, patience: int = 20) -> tuple[int | None, int]:
    """(halt epoch or None, best epoch) under the patience rule.

    Halts at the first epoch lying `patience` epochs past the best; a new
    best requires a strictly lower validation loss.
    """
    best = math.inf
    best_e = -1
    for e, v in enumerate(val_losses):
        if v < best:
            best, best_e = v, e
        elif e - best_e >= patience:
            return e, best_e
    return None, best_e


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float = 1.0) -> float:
    """Scale all gradients in place so the global L2 norm is <= max_norm.
    Returns the pre-clip norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.dot(g.reshape(-1), g.reshape(-1)))
    norm = math.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def _batches(n_rows: int, micro_batch: int):
    for lo in range(0, n_rows, micro_batch):
        yield lo, min(lo + micro_batch, n_rows)


def evaluate(model: Model, val: ChunkSet, micro_batch: int = 16,
             ignore_id: int = -1, pool: kernels.ScratchPool | None = None):
    """(mean loss, perplexity) over every target position, fixed reduction
    order, no parameter mutation. PPL = exp(loss)."""
    if len(val) == 0:
        raise TrainingError("empty validation set")
    rows = val.rows
    total, count = 0.0, 0
    for lo, hi in _batches(len(val), micro_batch):
        batch = rows[lo:hi]
        logits = forward(model, batch[:, :-1], pool=pool)
        V = logits.shape[-1]
        out = pool.take("eval.dlogits", (logits.shape[0] * logits.shape[1], V),
                        logits.dtype) if pool is not None else None
        loss_sum, n, _ = softmax_xent_raw(logits.reshape(-1, V),
                                          batch[:, 1:].astype(np.int64),
                                          ignore_id, out=out)
        total += loss_sum
        count += n
    loss = total / count
    return loss, math.exp(loss)


@dataclass
class PhaseResult:
    model: Model              # per the stop rule (best for early_stop)
    final_model: Model        # parameters after the last epoch run
    log: list[EpochRecord]
    best_epoch: int
    best_val_loss: float
    stop_reason: str


def train_phase(model: Model, train: ChunkSet, val: ChunkSet, cfg: TrainConfig,
                stop: str = "early_stop", phase: str = "phase",
                progress=None) -> PhaseResult:
    """Train `model` in place on `train`, evaluating on `val` each epoch."""
    if stop not in STOP_RULES:
        raise TrainingError(f"unknown stop rule {stop!r}")
    if len(train) == 0 or len(val) == 0:
        raise TrainingError("empty data")
    if train.vocab_id != val.vocab_id:
        raise TrainingError(f"train/val vocab mismatch: {train.vocab_id} "
                            f"vs {val.vocab_id}")
    if model.config.vocab_size != train.vocab_size:
        raise TrainingError(f"model vocab {model.config.vocab_size} != data "
                            f"vocab {train.vocab_size} ({train.vocab_id})")

    rng = Rng(cfg.seed)
    pool = kernels.ScratchPool()
    n_rows = len(train)
    micro_per_epoch = math.ceil(n_rows / cfg.micro_batch)
    steps_per_epoch = math.ceil(micro_per_epoch / cfg.accum)
    total_steps = steps_per_epoch * cfg.max_epochs
    state = AdamState.for_params(model.params)
    acc = {k: np.zeros_like(p) for k, p in model.params.items()}

    log: list[EpochRecord] = []
    val_history: list[float] = []
    best_val = math.inf
    best_epoch = -1
    best_params: dict[str, np.ndarray] | None = None
    micro_total = 0
    stop_reason = "max_epochs"

    for epoch in range(cfg.max_epochs):
        order = rng.stream(f"shuffle/epoch{epoch}").permutation(n_rows)
        train_total, train_count = 0.0, 0
        group = 0
        for lo, hi in _batches(n_rows, cfg.micro_batch):
            batch = train.rows[order[lo:hi]]
            loss_sum, count, grads = loss_and_grads(
                model, batch[:, :-1], batch[:, 1:].astype(np.int64),
                ignore_id=cfg.ignore_id, pool=pool)
            if not math.isfinite(loss_sum):
                raise TrainingDiverged(f"non-finite loss in epoch {epoch}, "
                                       f"micro-batch {micro_total}")
            train_total += loss_sum
            train_count += count
            inv = 1.0 / count
            for k, g in grads.items():
                g *= inv
                acc[k] += g
            group += 1
            micro_total += 1
            if group == cfg.accum or hi == n_rows:
                if group > 1:
                    for g in acc.values():
                        g *= 1.0 / group
                clip_gradients(acc, cfg.clip_norm)
                lr = lr_at(state.step + 1, cfg, total_steps)
                adamw_step(model.params, acc, state, lr, cfg)
                for g in acc.values():
                    g.fill(0.0)
                group = 0
        val_loss, val_ppl = evaluate(model, val, cfg.micro_batch,
                                     cfg.ignore_id, pool=pool)
        rec = EpochRecord(phase=phase, epoch=epoch,
                          train_loss=train_total / train_count,
                          val_loss=val_loss, val_ppl=val_ppl,
                          steps=state.step, micro_batches=micro_total,
                          lr=lr_at(state.step, cfg, total_steps))
        log.append(rec)
        if progress is not None:
            progress(rec)

        val_history.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            if stop == "early_stop":
                best_params = {k: p.copy() for k, p in model.params.items()}
        if stop == "early_stop":
            halt, _ = early_stop_epoch(val_history, cfg.patience)
            if halt == epoch:
                stop_reason = "patience"
                break
        if stop == "plateau" and plateau_stop_epoch(
                val_history, cfg.plateau_threshold, cfg.plateau_min_epochs) == epoch:
            stop_reason = "plateau"
            break

    final_model = Model(model.config, {k: p.copy() for k, p in model.params.items()})
    if stop == "early_stop" and best_params is not None:
        model.params = best_params
    return PhaseResult(model=model, final_model=final_model, log=log,
                       best_epoch=best_epoch, best_val_loss=best_val,
                       stop_reason=stop_reason if stop != "fixed" else "fixed")
