"""Music tokenizer: note events <-> the 160-token music vocabulary.

A piece is a flat token stream organized bar by bar. Each note is exactly
four tokens (position, pitch, duration, velocity) behind its bar marker, in
a fixed order, giving the stream a deterministic type grammar:

    BOS ( BAR ( POS PITCH DUR VEL )* )* EOS PAD*

Vocabulary layout (160 ids total):

    0..3     PAD, BOS, EOS, BAR
    4..19    POS_0..POS_15     position on a 16th-note grid within the bar
    20..147  PITCH_0..127      MIDI pitch
    148..155 DUR_1..8          length in 16th-note units
    156..159 VEL pp/p/f/ff     velocity quartiles
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

PAD, BOS, EOS, BAR = 0, 1, 2, 3
POS_BASE, N_POS = 4, 16
PITCH_BASE, N_PITCH = 20, 128
DUR_BASE, N_DUR = 148, 8
VEL_BASE, N_VEL = 156, 4
VOCAB_SIZE = 160
MUSIC_VOCAB_ID = "music160"

VEL_NAMES = ("pp", "p", "f", "ff")


class TokenType(enum.Enum):
    SPECIAL = "special"
    POS = "pos"
    PITCH = "pitch"
    DUR = "dur"
    VEL = "vel"


class OutOfVocabError(ValueError):
    pass


class GrammarError(ValueError):
    def __init__(self, index: int, msg: str):
        super().__init__(f"grammar violation at index {index}: {msg}")
        self.index = index


def token_type(tok: int) -> TokenType:
    if not 0 <= tok < VOCAB_SIZE:
        raise OutOfVocabError(f"token id {tok} outside the 160-token vocabulary")
    if tok < POS_BASE:
        return TokenType.SPECIAL
    if tok < PITCH_BASE:
        return TokenType.POS
    if tok < DUR_BASE:
        return TokenType.PITCH
    if tok < VEL_BASE:
        return TokenType.DUR
    return TokenType.VEL


@dataclass(frozen=True)
class GridSpec:
    """Fixed-tempo quantization grid: 4/4 at `bpm`, 16 slots per bar."""
    bpm: float = 120.0
    slots_per_bar: int = 16
    max_empty_bars: int = 8  # longer rests split the piece

    @property
    def slot_seconds(self) -> float:
        # one 16th note: a beat is 60/bpm, four slots per beat
        return 60.0 / self.bpm / 4.0

    @property
    def bar_seconds(self) -> float:
        return self.slot_seconds * self.slots_per_bar


@dataclass(frozen=True)
class NoteEvent:
    onset: float
    offset: float
    pitch: int
    velocity: int

    def __post_init__(self):
        if not self.onset >= 0:
            raise ValueError(f"onset must be >= 0, got {self.onset}")
        if not self.offset > self.onset:
            raise ValueError(f"offset {self.offset} must exceed onset {self.onset}")
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside MIDI range")
        if not 0 <= self.velocity <= 127:
            raise ValueError(f"velocity {self.velocity} outside MIDI range")


@dataclass(frozen=True)
class QuantizedNote:
    bar: int
    pos: int
    pitch: int
    dur_units: int
    vel_bin: int

    def __post_init__(self):
        if self.bar < 0 or not 0 <= self.pos < N_POS:
            raise ValueError(f"bad bar/pos ({self.bar}, {self.pos})")
        if not 0 <= self.pitch < N_PITCH:
            raise ValueError(f"bad pitch {self.pitch}")
        if not 1 <= self.dur_units <= N_DUR:
            raise ValueError(f"bad duration {self.dur_units}")
        if not 0 <= self.vel_bin < N_VEL:
            raise ValueError(f"bad velocity bin {self.vel_bin}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def quantize(note: NoteEvent, grid: GridSpec = GridSpec()) -> QuantizedNote:
    """Snap onset to the nearest grid slot; clamp duration to 1..8 units;
    bin velocity into equal-width quartiles (0-31 pp, ..., 96-127 ff)."""
    slot = _round_half_up(note.onset / grid.slot_seconds)
    dur = _round_half_up((note.offset - note.onset) / grid.slot_seconds)
    return QuantizedNote(
        bar=slot // grid.slots_per_bar,
        pos=slot % grid.slots_per_bar,
        pitch=note.pitch,
        dur_units=min(max(dur, 1), N_DUR),
        vel_bin=note.velocity // 32,
    )


def note_from_quantized(q: QuantizedNote, grid: GridSpec = GridSpec()) -> NoteEvent:
    """Grid-aligned NoteEvent for a quantized note (bin midpoint velocity)."""
    onset = (q.bar * grid.slots_per_bar + q.pos) * grid.slot_seconds
    return NoteEvent(onset=onset, offset=onset + q.dur_units * grid.slot_seconds,
                     pitch=q.pitch, velocity=q.vel_bin * 32 + 16)


def encode_quantized(qnotes: list[QuantizedNote], n_bars: int | None = None) -> list[int]:
    """BOS, then per bar a BAR marker plus that bar's notes sorted by
    (pos, pitch); empty bars contribute a lone BAR; ends with EOS."""
    if n_bars is None:
        n_bars = max((q.bar for q in qnotes), default=-1) + 1
    by_bar: dict[int, list[QuantizedNote]] = {}
    for q in qnotes:
        if q.bar < n_bars:
            by_bar.setdefault(q.bar, []).append(q)
    out = [BOS]
    for bar in range(n_bars):
        out.append(BAR)
        for q in sorted(by_bar.get(bar, ()), key=lambda q: (q.pos, q.pitch)):
            out.append(POS_BASE + q.pos)
            out.append(PITCH_BASE + q.pitch)
            out.append(DUR_BASE + q.dur_units - 1)
            out.append(VEL_BASE + q.vel_bin)
    out.append(EOS)
    return out


def encode_piece(notes: list[NoteEvent], grid: GridSpec = GridSpec()) -> list[int]:
    """Quantize and encode one piece as a single grammar-valid sequence.

    Empty-bar runs are emitted faithfully however long; callers that ingest
    real performances cut long rests first with split_on_rests."""
    return encode_quantized([quantize(n, grid) for n in notes])


def split_on_rests(notes: list[NoteEvent], grid: GridSpec = GridSpec()) -> list[list[NoteEvent]]:
    """Cut a piece wherever more than grid.max_empty_bars consecutive bars
    contain no note onset, rebasing each segment to start near bar 0."""
    if not notes:
        return []
    notes = sorted(notes, key=lambda n: n.onset)
    bars = [quantize(n, grid).bar for n in notes]
    segments: list[list[NoteEvent]] = []
    seg_start = 0
    last_bar = bars[0]
    for i in range(1, len(notes)):
        if bars[i] - last_bar - 1 > grid.max_empty_bars:
            segments.append(_rebase(notes[seg_start:i], bars[seg_start], grid))
            seg_start = i
        last_bar = max(last_bar, bars[i])
    segments.append(_rebase(notes[seg_start:], bars[seg_start], grid))
    return segments


def _rebase(notes: list[NoteEvent], base_bar: int, grid: GridSpec) -> list[NoteEvent]:
    shift = base_bar * grid.bar_seconds
    out = []
    for n in notes:
        onset = max(n.onset - shift, 0.0)
        offset = max(n.offset - shift, onset + 1e-9)
        out.append(NoteEvent(onset, offset, n.pitch, n.velocity))
    return out


_EXPECT_BOS, _NO_BAR, _IN_BAR, _AFTER_POS, _AFTER_PITCH, _AFTER_DUR, _DONE = range(7)


def validate_grammar(tokens) -> int | None:
    """None if the sequence is in the piece language, else the index of the
    first offending token (== len(tokens) if it ends prematurely).

    Accepted language: BOS (BAR (POS PITCH DUR VEL)*)* EOS PAD*. A note group
    may only appear inside an open bar, so a POS directly after BOS is a
    violation.
    """
    state = _EXPECT_BOS
    i = -1
    for i, tok in enumerate(tokens):
        tok = int(tok)
        if not 0 <= tok < VOCAB_SIZE:
            return i
        t = token_type(tok)
        if state == _EXPECT_BOS:
            if tok != BOS:
                return i
            state = _NO_BAR
        elif state in (_NO_BAR, _IN_BAR):
            if tok == BAR:
                state = _IN_BAR
            elif tok == EOS:
                state = _DONE
            elif t == TokenType.POS and state == _IN_BAR:
                state = _AFTER_POS
            else:
                return i
        elif state == _AFTER_POS:
            if t != TokenType.PITCH:
                return i
            state = _AFTER_PITCH
        elif state == _AFTER_PITCH:
            if t != TokenType.DUR:
                return i
            state = _AFTER_DUR
        elif state == _AFTER_DUR:
            if t != TokenType.VEL:
                return i
            state = _IN_BAR
        else:  # _DONE: only padding may follow
            if tok != PAD:
                return i
    if state != _DONE:
        return i + 1
    return None


def decode(tokens, grid: GridSpec = GridSpec()) -> list[QuantizedNote]:
    """Inverse of encode_quantized. Raises GrammarError on invalid input."""
    bad = validate_grammar(tokens)
    if bad is not None:
        what = f"token {int(tokens[bad])}" if bad < len(tokens) else "truncated piece"
        raise GrammarError(bad, what)
    notes: list[QuantizedNote] = []
    bar = -1
    i = 0
    toks = [int(t) for t in tokens]
    while i < len(toks):
        tok = toks[i]
        if tok == BAR:
            bar += 1
            i += 1
        elif token_type(tok) == TokenType.POS:
            pos = tok - POS_BASE
            pitch = toks[i + 1] - PITCH_BASE
            dur = toks[i + 2] - DUR_BASE + 1
            vel = toks[i + 3] - VEL_BASE
            notes.append(QuantizedNote(bar, pos, pitch, dur, vel))
            i += 4
        else:  # BOS / EOS / PAD
            i += 1
    return notes


def tokens_to_bytes(tokens) -> bytes:
    """Music token streams serialize as little-endian uint16."""
    return np.asarray(tokens, dtype="<u2").tobytes()


def tokens_from_bytes(raw: bytes) -> np.ndarray:
    return np.frombuffer(raw, dtype="<u2").astype(np.int64)
