"""Condition execution over a registry of datasets and cached checkpoints.

The registry root holds:

    data/<key>.chunks        datasets by manifest key
    cache/<...>.ckpt         music checkpoints shared across seeds/conditions
    runs/<cond>/s<seed>/     one run directory per (condition, seed):
        config.snapshot.json
        phase<i>-<name>/metrics.jsonl + ckpt-best.ckpt + ckpt-final.ckpt + DONE
        results.jsonl        one row per (phase, epoch)
        DONE

Completed phases and runs are detected and skipped, so any interrupted run
resumes from its last finished phase. Tables are built from the raw
results.jsonl rows alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

from . import corpus
from .checkpoint import Checkpoint, checkpoint_hash, load_checkpoint, save_checkpoint
from .manifest import Condition
from .model import Model, ModelConfig, init
from .rng import Rng
from .train import TrainConfig, train_phase, write_metrics_jsonl
from .transfer import TransferSpec, selective_transfer

MUSIC_SEED = 42        # music checkpoints are fixed across seeds
VAL_FRACTION = 0.10
SPLIT_SEED = 42        # dataset splits are fixed per dataset, not per run


class RunnerError(RuntimeError):
    pass


@dataclass
class ResultRow:
    condition: str
    seed: int
    phase: str
    phase_index: int
    epoch: int
    val_loss: float
    val_ppl: float
    d_model: int
    micro_batches: int = 0  # cumulative within the phase
    stop_reason: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


class Registry:
    def __init__(self, root):
        self.root = Path(root)
        (self.root / "data").mkdir(parents=True, exist_ok=True)
        (self.root / "cache").mkdir(exist_ok=True)
        (self.root / "runs").mkdir(exist_ok=True)
        self._data_cache: dict[str, corpus.ChunkSet] = {}
        self._split_cache: dict[str, tuple] = {}

    def data_path(self, key: str) -> Path:
        return self.root / "data" / f"{key}.chunks"

    def add_data(self, key: str, cs: corpus.ChunkSet) -> None:
        corpus.save_chunks(self.data_path(key), cs)
        self._data_cache[key] = cs

    def load_data(self, key: str) -> corpus.ChunkSet:
        if key not in self._data_cache:
            path = self.data_path(key)
            if not path.exists():
                raise RunnerError(f"missing dataset {key!r} (expected {path})")
            self._data_cache[key] = corpus.load_chunks(path)
        return self._data_cache[key]

    def split(self, key: str):
        """Deterministic per-dataset train/val split, shared by every run."""
        if key not in self._split_cache:
            cs = self.load_data(key)
            self._split_cache[key] = corpus.split_train_val(
                cs, VAL_FRACTION, Rng(SPLIT_SEED, f"split/{key}"))
        return self._split_cache[key]

    def run_dir(self, condition: str, seed: int) -> Path:
        return self.root / "runs" / condition / f"s{seed}"


def _model_config(cond: Condition, vocab_size: int) -> ModelConfig:
    return ModelConfig(d_model=cond.d_model, n_heads=cond.n_heads,
                       n_layers=8, d_ff=cond.d_ff, vocab_size=vocab_size,
                       seq_len=256)


def _phase_train_config(spec, seed: int, overrides: dict | None) -> TrainConfig:
    kw = {"seed": seed}
    if spec.stop == "fixed":
        kw["max_epochs"] = spec.epochs
    elif spec.epochs:
        kw["max_epochs"] = spec.epochs
    if overrides:
        kw.update(overrides)
    return TrainConfig(**kw)


def run_condition(cond: Condition, registry: Registry,
                  train_overrides: dict | None = None,
                  progress=None) -> list[ResultRow]:
    """Execute every (phase, seed) of a condition, resuming where possible.
    Returns all result rows for the condition (including resumed ones)."""
    rows: list[ResultRow] = []
    for seed in cond.seeds:
        rows.extend(_run_one_seed(cond, seed, registry, train_overrides, progress))
    return rows


def _say(progress, msg: str) -> None:
    if progress is not None:
        progress(msg)


def _run_one_seed(cond: Condition, seed: int, registry: Registry,
                  train_overrides: dict | None, progress) -> list[ResultRow]:
    run_dir = registry.run_dir(cond.name, seed)
    results_path = run_dir / "results.jsonl"
    if (run_dir / "DONE").exists():
        _say(progress, f"[{cond.name} s{seed}] already complete")
        return read_results(results_path)

    run_dir.mkdir(parents=True, exist_ok=True)
    snapshot = {"condition": asdict(cond), "seed": seed,
                "train_overrides": train_overrides or {},
                "val_fraction": VAL_FRACTION, "music_seed": MUSIC_SEED}
    snapshot["condition"]["phases"] = [asdict(p) for p in cond.phases]
    (run_dir / "config.snapshot.json").write_text(json.dumps(snapshot, indent=2,
                                                             sort_keys=True))
    model: Model | None = None
    model_vocab_id: str | None = None
    lineage: list = []
    last_ckpt_path: Path | None = None

    for i, spec in enumerate(cond.phases):
        phase_dir = run_dir / f"phase{i}-{spec.name}"
        data = registry.load_data(spec.data)

        if spec.name == "music":
            # music checkpoints are fixed across seeds: trained once under
            # MUSIC_SEED, cached, and mirrored into every run directory
            if model is not None:
                raise RunnerError(f"{cond.name}: music phase must come first")
            cached = _ensure_music_cache(cond, spec, registry, train_overrides,
                                         progress)
            ck = load_checkpoint(cached)
            model = ck.model()
            model_vocab_id = ck.vocab_id
            lineage = ck.lineage
            last_ckpt_path = cached
            _mirror_cached_phase(phase_dir, cached)
            continue
        phase_seed = seed

        if (phase_dir / "DONE").exists():
            ck = load_checkpoint(phase_dir / "ckpt-best.ckpt")
            model = ck.model()
            model_vocab_id = ck.vocab_id
            lineage = ck.lineage
            last_ckpt_path = phase_dir / "ckpt-best.ckpt"
            _say(progress, f"[{cond.name} s{seed}] phase{i}-{spec.name} already done")
            continue

        # materialize the model for this phase
        if model is None:
            cfg = _model_config(cond, data.vocab_size)
            model = init(cfg, Rng(phase_seed, "init"))
            model_vocab_id = data.vocab_id
            lineage = [{"event": "init", "seed": phase_seed, "vocab": data.vocab_id}]
        elif model_vocab_id != data.vocab_id:
            src = Checkpoint(config=model.config, params=model.params,
                             vocab_id=model_vocab_id, seed=phase_seed,
                             phase=cond.phases[i - 1].name, epoch=-1,
                             best_val_loss=None, lineage=lineage)
            src_hash = checkpoint_hash(last_ckpt_path) if last_ckpt_path else None
            model, lineage = selective_transfer(
                src, _model_config(cond, data.vocab_size), TransferSpec(),
                rng=Rng(seed), src_hash=src_hash)
            model_vocab_id = data.vocab_id
        # same vocabulary: the model continues unchanged

        train_cs, val_cs = registry.split(spec.data)
        tcfg = _phase_train_config(spec, phase_seed, train_overrides)
        _say(progress, f"[{cond.name} s{seed}] phase{i}-{spec.name} on "
                       f"{spec.data} ({len(train_cs)} train chunks, "
                       f"stop={spec.stop})")
        epoch_cb = (lambda rec: _say(progress,
                    f"[{cond.name} s{seed}] {spec.name} E{rec.epoch}: "
                    f"val_ppl={rec.val_ppl:.1f}")) if progress else None
        result = train_phase(model, train_cs, val_cs, tcfg, stop=spec.stop,
                             phase=spec.name, progress=epoch_cb)
        model = result.model

        phase_dir.mkdir(parents=True, exist_ok=True)
        write_metrics_jsonl(phase_dir / "metrics.jsonl", result.log)
        meta = dict(vocab_id=data.vocab_id, seed=phase_seed, phase=spec.name,
                    best_val_loss=result.best_val_loss, lineage=lineage)
        save_checkpoint(phase_dir / "ckpt-best.ckpt", result.model,
                        epoch=result.best_epoch, **meta)
        save_checkpoint(phase_dir / "ckpt-final.ckpt", result.final_model,
                        epoch=result.log[-1].epoch, **meta)
        last_ckpt_path = phase_dir / "ckpt-best.ckpt"

        new_rows = [ResultRow(condition=cond.name, seed=seed, phase=spec.name,
                              phase_index=i, epoch=r.epoch, val_loss=r.val_loss,
                              val_ppl=r.val_ppl, d_model=cond.d_model,
                              micro_batches=r.micro_batches,
                              stop_reason=result.stop_reason)
                    for r in result.log]
        _write_phase_results(results_path, i, new_rows)
        (phase_dir / "DONE").write_text("ok\n")

    (run_dir / "DONE").write_text("ok\n")
    return read_results(results_path) if results_path.exists() else []


def _ensure_music_cache(cond: Condition, spec, registry: Registry,
                        train_overrides: dict | None, progress) -> Path:
    """Train (or reuse) the shared music checkpoint for this data/scale."""
    cache_key = f"music-{spec.data}-d{cond.d_model}-{spec.stop}"
    cached = registry.root / "cache" / f"{cache_key}.ckpt"
    if cached.exists():
        _say(progress, f"[music] reusing cached {cache_key}")
        return cached
    data = registry.load_data(spec.data)
    cfg = _model_config(cond, data.vocab_size)
    model = init(cfg, Rng(MUSIC_SEED, "init"))
    train_cs, val_cs = registry.split(spec.data)
    tcfg = _phase_train_config(spec, MUSIC_SEED, train_overrides)
    _say(progress, f"[music] training {cache_key} on {len(train_cs)} chunks "
                   f"(stop={spec.stop}, max {tcfg.max_epochs} epochs)")
    epoch_cb = (lambda rec: _say(progress, f"[music {cache_key}] E{rec.epoch}: "
                f"val_loss={rec.val_loss:.4f}")) if progress else None
    result = train_phase(model, train_cs, val_cs, tcfg, stop=spec.stop,
                         phase="music", progress=epoch_cb)
    lineage = [{"event": "init", "seed": MUSIC_SEED, "vocab": data.vocab_id},
               {"event": "music", "data": spec.data,
                "best_epoch": result.best_epoch,
                "stop_reason": result.stop_reason}]
    save_checkpoint(cached, result.model, vocab_id=data.vocab_id,
                    seed=MUSIC_SEED, phase="music", epoch=result.best_epoch,
                    best_val_loss=result.best_val_loss, lineage=lineage)
    write_metrics_jsonl(registry.root / "cache" / f"{cache_key}.metrics.jsonl",
                        result.log)
    music_rows = [ResultRow(condition=f"music:{cache_key}", seed=MUSIC_SEED,
                            phase="music", phase_index=0, epoch=r.epoch,
                            val_loss=r.val_loss, val_ppl=r.val_ppl,
                            d_model=cond.d_model, micro_batches=r.micro_batches,
                            stop_reason=result.stop_reason)
                  for r in result.log]
    _write_phase_results(registry.root / "cache" / f"{cache_key}.results.jsonl",
                         0, music_rows)
    return cached


def _mirror_cached_phase(phase_dir: Path, cached: Path) -> None:
    """Mark a music phase satisfied by the shared cache."""
    phase_dir.mkdir(parents=True, exist_ok=True)
    (phase_dir / "CACHED").write_text(str(cached) + "\n")
    (phase_dir / "DONE").write_text("ok\n")


def _write_phase_results(path: Path, phase_index: int, rows: list[ResultRow]) -> None:
    """Replace any rows of this phase (a crashed attempt may have left some)
    and append the fresh ones."""
    kept = [r for r in read_results(path) if r.phase_index != phase_index] \
        if path.exists() else []
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        for r in kept + rows:
            f.write(r.to_json() + "\n")
    tmp.replace(path)


def read_results(path) -> list[ResultRow]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                out.append(ResultRow(**json.loads(line)))
    return out


def collect_results(registry: Registry) -> list[ResultRow]:
    """All result rows under the registry, from the raw files (per-run rows
    plus the shared music runs under cache/)."""
    rows: list[ResultRow] = []
    for p in sorted(registry.root.glob("runs/*/s*/results.jsonl")):
        rows.extend(read_results(p))
    for p in sorted(registry.root.glob("cache/*.results.jsonl")):
        rows.extend(read_results(p))
    return rows
