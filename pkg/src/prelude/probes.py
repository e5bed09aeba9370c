"""Behavioral probes for music-trained models.

Three read-only measurements: how sharply the model has learned the token
grammar's type transitions, whether it continues a repeated motif with a BAR
(pattern completion), and how much attention mass each head devotes to
long-range positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import miditok as mt
from .corpus import ChunkSet
from .model import Model, attention_maps, forward, next_token_distribution

GRAMMAR_TRANSITIONS = ("BAR->POS", "POS->PITCH", "PITCH->DUR", "DUR->VEL")

# (source-id predicate bounds, successor-id range) per transition
_TRANSITION_RANGES = {
    "BAR->POS": ((mt.BAR, mt.BAR + 1), (mt.POS_BASE, mt.POS_BASE + mt.N_POS)),
    "POS->PITCH": ((mt.POS_BASE, mt.POS_BASE + mt.N_POS),
                   (mt.PITCH_BASE, mt.PITCH_BASE + mt.N_PITCH)),
    "PITCH->DUR": ((mt.PITCH_BASE, mt.PITCH_BASE + mt.N_PITCH),
                   (mt.DUR_BASE, mt.DUR_BASE + mt.N_DUR)),
    "DUR->VEL": ((mt.DUR_BASE, mt.DUR_BASE + mt.N_DUR),
                 (mt.VEL_BASE, mt.VEL_BASE + mt.N_VEL)),
}


def _softmax(logits: np.ndarray) -> np.ndarray:
    x = logits.astype(np.float64)
    x -= x.max(axis=-1, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=-1, keepdims=True)


def probe_grammar(model: Model, val: ChunkSet, micro_batch: int = 16) -> dict[str, float]:
    """Mean predicted probability mass on the grammar-correct successor type,
    per transition, over every occurrence of the source type in val."""
    if val.vocab_id != mt.MUSIC_VOCAB_ID:
        raise ValueError(f"grammar probe needs music chunks, got {val.vocab_id}")
    sums = {k: 0.0 for k in GRAMMAR_TRANSITIONS}
    counts = {k: 0 for k in GRAMMAR_TRANSITIONS}
    rows = val.rows
    for lo in range(0, len(val), micro_batch):
        batch = rows[lo:lo + micro_batch]
        inputs = batch[:, :-1]
        probs = _softmax(forward(model, inputs))
        for key in GRAMMAR_TRANSITIONS:
            (src_lo, src_hi), (dst_lo, dst_hi) = _TRANSITION_RANGES[key]
            mask = (inputs >= src_lo) & (inputs < src_hi)
            if mask.any():
                mass = probs[..., dst_lo:dst_hi].sum(axis=-1)
                sums[key] += float(mass[mask].sum())
                counts[key] += int(mask.sum())
    return {k: (sums[k] / counts[k]) if counts[k] else float("nan")
            for k in GRAMMAR_TRANSITIONS}


# the pattern-completion prompt: a C major triad arpeggio, one bar,
# quarter-note spacing, forte
MOTIF_PITCHES = (60, 64, 67)
MOTIF_POSITIONS = (0, 4, 8)
MOTIF_DUR = 2
MOTIF_VEL_BIN = 2


def motif_prompt(repeats: int = 3) -> list[int]:
    bar = [mt.BAR]
    for pos, pitch in zip(MOTIF_POSITIONS, MOTIF_PITCHES):
        bar += [mt.POS_BASE + pos, mt.PITCH_BASE + pitch,
                mt.DUR_BASE + MOTIF_DUR - 1, mt.VEL_BASE + MOTIF_VEL_BIN]
    return [mt.BOS] + bar * repeats


@dataclass(frozen=True)
class MotifProbe:
    p_bar: float         # P(BAR | motif repeated three times)
    p_correct_pos: float  # P(POS_0 | ... BAR), the motif's starting position


def probe_motif(model: Model, repeats: int = 3) -> MotifProbe:
    if model.config.vocab_size != mt.VOCAB_SIZE:
        raise ValueError("motif probe needs a music-vocabulary model")
    prompt = motif_prompt(repeats)
    dist = next_token_distribution(model, np.asarray(prompt))
    p_bar = float(dist[mt.BAR])
    dist2 = next_token_distribution(model, np.asarray(prompt + [mt.BAR]))
    p_pos = float(dist2[mt.POS_BASE + MOTIF_POSITIONS[0]])
    return MotifProbe(p_bar=p_bar, p_correct_pos=p_pos)


def long_range_fraction_per_position(maps: np.ndarray, threshold: int = 8) -> np.ndarray:
    """Per query position t, the attention mass at distance > threshold
    (keys j with t - j > threshold). maps: (..., T, T) -> (..., T)."""
    T = maps.shape[-1]
    t_idx = np.arange(T)[:, None]
    j_idx = np.arange(T)[None, :]
    far = (t_idx - j_idx) > threshold
    return (maps * far).sum(axis=-1)


def probe_attention_distance(model: Model, val: ChunkSet, threshold: int = 8,
                             micro_batch: int = 4, max_rows: int | None = None
                             ) -> np.ndarray:
    """(L, H) mean long-range attention fraction over val positions
    t >= threshold. micro_batch stays small; maps are L*B*H*T*T floats."""
    cfg = model.config
    sums = np.zeros((cfg.n_layers, cfg.n_heads), dtype=np.float64)
    count = 0
    rows = val.rows if max_rows is None else val.rows[:max_rows]
    for lo in range(0, len(rows), micro_batch):
        batch = rows[lo:lo + micro_batch]
        maps = attention_maps(model, batch[:, :-1])  # (L, B, H, T, T)
        frac = long_range_fraction_per_position(maps, threshold)  # (L, B, H, T)
        frac = frac[..., threshold:]
        sums += frac.sum(axis=(1, 3))
        count += frac.shape[1] * frac.shape[3]
    return sums / count
