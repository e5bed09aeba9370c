"""Rule-based synthetic music generator.

Each piece starts from a short motif (1-2 bars, 2-6 notes on the 16th-note
grid, pitches drawn from one scale) and grows to a 4-16 bar target by
repeatedly applying one of four operations to the most recent phrase:

    repeat      exact repetition                 p = 0.40
    transpose   diatonic transposition           p = 0.20
    vary        30% of notes replaced in-scale   p = 0.25
    contrast    a fresh motif in the same scale  p = 0.15

Output is always grammar-valid token streams in the 160-token vocabulary.
The result has surface structure (repetition, scale-constrained pitch,
variation) and deliberately nothing deeper.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import corpus, miditok
from .rng import Rng

MODES = {
    "major": (0, 2, 4, 5, 7, 9, 11),
    "minor": (0, 2, 3, 5, 7, 8, 10),
    "pentatonic": (0, 2, 4, 7, 9),
}

ROOT_LO, ROOT_HI = 48, 72  # C3..C5 inclusive

OPS = ("repeat", "transpose", "vary", "contrast")


@dataclass(frozen=True)
class Scale:
    root: int
    mode: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 <= self.root <= 127:
            raise ValueError(f"root {self.root} outside MIDI range")

    @property
    def pitch_classes(self) -> frozenset[int]:
        return frozenset((self.root + iv) % 12 for iv in MODES[self.mode])

    @property
    def members(self) -> tuple[int, ...]:
        """Every in-scale pitch across the full MIDI range, ascending."""
        pcs = self.pitch_classes
        return tuple(p for p in range(128) if p % 12 in pcs)

    @property
    def window(self) -> tuple[int, ...]:
        """The octave above the root; where motif pitches are drawn from."""
        return tuple(p for p in self.members if self.root <= p <= self.root + 12)

    def degrees_per_octave(self) -> int:
        return len(MODES[self.mode])


@dataclass(frozen=True)
class MotifNote:
    slot: int   # 16th-note slot within the motif (0 .. 16*bars-1)
    pitch: int
    dur: int    # 1..8
    vel: int    # 0..3


@dataclass(frozen=True)
class Motif:
    bars: int
    notes: tuple[MotifNote, ...]


@dataclass(frozen=True)
class GenConfig:
    p_repeat: float = 0.40
    p_transpose: float = 0.20
    p_vary: float = 0.25
    p_contrast: float = 0.15
    vary_rate: float = 0.30
    min_bars: int = 4
    max_bars: int = 16
    motif_min_notes: int = 2
    motif_max_notes: int = 6
    max_transpose_steps: int = 3

    def __post_init__(self):
        total = self.p_repeat + self.p_transpose + self.p_vary + self.p_contrast
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"operation probabilities sum to {total}, not 1")

    @property
    def probs(self) -> tuple[float, ...]:
        return (self.p_repeat, self.p_transpose, self.p_vary, self.p_contrast)


def sample_scale(rng: Rng) -> Scale:
    root = int(rng.integers(ROOT_LO, ROOT_HI + 1))
    mode = sorted(MODES)[int(rng.integers(0, len(MODES)))]
    return Scale(root, mode)


def sample_motif(rng: Rng, scale: Scale, cfg: GenConfig = GenConfig()) -> Motif:
    bars = int(rng.integers(1, 3))
    n = int(rng.integers(cfg.motif_min_notes, cfg.motif_max_notes + 1))
    slots = sorted(int(s) for s in
                   rng.choice(bars * miditok.N_POS, size=n, replace=False))
    window = scale.window
    notes = tuple(
        MotifNote(
            slot=s,
            pitch=int(window[int(rng.integers(0, len(window)))]),
            dur=int(rng.integers(1, miditok.N_DUR + 1)),
            vel=int(rng.integers(0, miditok.N_VEL)),
        )
        for s in slots
    )
    return Motif(bars, notes)


def sample_operation(rng: Rng, cfg: GenConfig = GenConfig()) -> str:
    """Categorical draw by cumulative thresholds. A draw exactly equal to a
    boundary falls to the next operation (strict <), which happens with
    probability zero up to float rounding."""
    u = float(rng.random())
    acc = 0.0
    for op, p in zip(OPS, cfg.probs):
        acc += p
        if u < acc:
            return op
    return OPS[-1]


def transpose_diatonic(motif: Motif, scale: Scale, steps: int) -> Motif:
    """Move every pitch `steps` positions along the scale member list,
    folding by whole octaves where the list would run out."""
    members = scale.members
    index = {p: i for i, p in enumerate(members)}
    dpo = scale.degrees_per_octave()
    out = []
    for n in motif.notes:
        if n.pitch not in index:
            raise ValueError(f"pitch {n.pitch} not in {scale.mode} scale on {scale.root}")
        i = index[n.pitch] + steps
        while i < 0:
            i += dpo
        while i >= len(members):
            i -= dpo
        out.append(replace(n, pitch=members[i]))
    return Motif(motif.bars, tuple(out))


def vary_pitches(motif: Motif, scale: Scale, rng: Rng,
                 cfg: GenConfig = GenConfig()) -> Motif:
    """Independently replace each note's pitch with probability cfg.vary_rate
    by a uniform in-scale alternative (never the original pitch); positions,
    durations and velocities are untouched."""
    window = scale.window
    out = []
    for n in motif.notes:
        if float(rng.random()) < cfg.vary_rate:
            choices = [p for p in window if p != n.pitch]
            out.append(replace(n, pitch=int(choices[int(rng.integers(0, len(choices)))])))
        else:
            out.append(n)
    return Motif(motif.bars, tuple(out))


def gen_piece(rng: Rng, cfg: GenConfig = GenConfig()) -> list[int]:
    """One grammar-valid piece of exactly `target` bars, target ~ U{4..16}.

    The extension loop applies one sampled operation per iteration to the
    most recent phrase; overshoot past the bar budget is truncated at the
    bar boundary.
    """
    scale = sample_scale(rng)
    target = int(rng.integers(cfg.min_bars, cfg.max_bars + 1))
    motif = sample_motif(rng, scale, cfg)
    phrases = [motif]
    total = motif.bars
    current = motif
    while total < target:
        op = sample_operation(rng, cfg)
        if op == "repeat":
            frag = current
        elif op == "transpose":
            steps = int(rng.integers(1, cfg.max_transpose_steps + 1))
            if int(rng.integers(0, 2)):
                steps = -steps
            frag = transpose_diatonic(current, scale, steps)
        elif op == "vary":
            frag = vary_pitches(current, scale, rng, cfg)
        else:
            frag = sample_motif(rng, scale, cfg)
        phrases.append(frag)
        total += frag.bars
        current = frag
    qnotes = []
    bar_off = 0
    for ph in phrases:
        for n in ph.notes:
            bar = bar_off + n.slot // miditok.N_POS
            if bar < target:
                qnotes.append(miditok.QuantizedNote(
                    bar, n.slot % miditok.N_POS, n.pitch, n.dur, n.vel))
        bar_off += ph.bars
    return miditok.encode_quantized(qnotes, n_bars=target)


def gen_corpus(rng: Rng, cfg: GenConfig, n_chunks: int) -> corpus.ChunkSet:
    """Generate pieces (one derived stream per piece, so generation is
    order-independent), concatenate, and cut n_chunks 257-token rows."""
    if n_chunks <= 0:
        raise ValueError("n_chunks must be positive")
    need = n_chunks * corpus.CHUNK_WIDTH
    toks: list[int] = []
    i = 0
    while len(toks) < need:
        piece_rng = rng.substream(f"piece{i}")
        toks.extend(gen_piece(piece_rng, cfg))
        i += 1
    return corpus.chunk(np.asarray(toks[:need], dtype=np.uint16),
                        corpus.MUSIC_VOCAB_ID, miditok.VOCAB_SIZE,
                        {"source": "synth", "seed": rng.seed,
                         "stream": rng.stream_label, "pieces": i})
