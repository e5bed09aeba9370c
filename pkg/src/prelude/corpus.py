"""Data ingestion and uniform chunking.

Every training set, whatever its source, becomes a ChunkSet: an N x 257
matrix of token ids. The first 256 tokens of a row are the input and the
last 256 the shifted prediction target. Chunks are cut from one long stream
(all source material concatenated); the remainder short of a full window is
dropped.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import miditok
from .rng import Rng

CHUNK_WIDTH = 257

MUSIC_VOCAB_ID = "music160"
SUBWORD_VOCAB_ID = "subword50257"
WORDLEVEL_VOCAB_ID = "wordlevel-test"

_FILE_MAGIC = b"PRCH"
_FILE_VERSION = 1


class CorpusError(ValueError):
    pass


@dataclass
class ChunkSet:
    vocab_id: str
    vocab_size: int
    rows: np.ndarray  # (N, 257), uint16 or uint32
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.asarray(self.rows)
        if self.rows.ndim != 2 or self.rows.shape[1] != CHUNK_WIDTH:
            raise CorpusError(f"chunk rows must be (N, {CHUNK_WIDTH}), "
                              f"got {self.rows.shape}")
        if self.rows.size and int(self.rows.max()) >= self.vocab_size:
            raise CorpusError(f"token id {int(self.rows.max())} >= vocab size "
                              f"{self.vocab_size}")
        # music and word-level ids serialize as uint16, subword ids as uint32
        want = np.uint32 if self.vocab_id == SUBWORD_VOCAB_ID else np.uint16
        if want == np.uint16 and self.vocab_size > 0x10000:
            raise CorpusError(f"vocab {self.vocab_id} too large for uint16 rows")
        self.rows = self.rows.astype(want, copy=False)

    def __len__(self) -> int:
        return self.rows.shape[0]


def chunk(stream, vocab_id: str, vocab_size: int, provenance: dict | None = None) -> ChunkSet:
    """Cut a token stream into floor(len/257) non-overlapping rows."""
    stream = np.asarray(stream)
    n = stream.shape[0] // CHUNK_WIDTH
    if n == 0:
        raise CorpusError(f"insufficient tokens: {stream.shape[0]} < {CHUNK_WIDTH}")
    rows = stream[:n * CHUNK_WIDTH].reshape(n, CHUNK_WIDTH)
    return ChunkSet(vocab_id, vocab_size, rows, provenance or {})


def subsample_chunks(cs: ChunkSet, target: int, rng: Rng) -> ChunkSet:
    """Uniform without replacement, order-preserving, deterministic by rng."""
    n = len(cs)
    if not 0 < target <= n:
        raise CorpusError(f"subsample target {target} outside 1..{n}")
    if target == n:
        idx = np.arange(n)
    else:
        idx = np.sort(rng.choice(n, size=target, replace=False))
    prov = dict(cs.provenance)
    prov["subsample"] = {"target": int(target), "of": n, "stream": rng.stream_label}
    return ChunkSet(cs.vocab_id, cs.vocab_size, cs.rows[idx], prov)


def split_train_val(cs: ChunkSet, val_fraction: float, rng: Rng):
    """Disjoint, exhaustive, order-preserving split."""
    if not 0.0 < val_fraction < 1.0:
        raise CorpusError(f"val_fraction must be in (0, 1), got {val_fraction}")
    n = len(cs)
    n_val = int(round(n * val_fraction))
    n_val = min(max(n_val, 1), n - 1)
    val_idx = np.sort(rng.choice(n, size=n_val, replace=False))
    mask = np.zeros(n, dtype=bool)
    mask[val_idx] = True
    train = ChunkSet(cs.vocab_id, cs.vocab_size, cs.rows[~mask],
                     {**cs.provenance, "split": "train"})
    val = ChunkSet(cs.vocab_id, cs.vocab_size, cs.rows[mask],
                   {**cs.provenance, "split": "val"})
    return train, val


def save_chunks(path, cs: ChunkSet) -> None:
    """magic, version, vocab_id, vocab_size, N header + row payload
    (uint16 little-endian for music/word-level ids, uint32 for subword)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    vid = cs.vocab_id.encode("utf-8")
    dtype_code = 2 if cs.rows.dtype == np.uint16 else 4
    with open(path, "wb") as f:
        f.write(_FILE_MAGIC)
        f.write(struct.pack("<IHB", _FILE_VERSION, len(vid), dtype_code))
        f.write(vid)
        f.write(struct.pack("<IQ", cs.vocab_size, len(cs)))
        f.write(np.ascontiguousarray(cs.rows, dtype=f"<u{dtype_code}").tobytes())


def load_chunks(path) -> ChunkSet:
    path = Path(path)
    with open(path, "rb") as f:
        if f.read(4) != _FILE_MAGIC:
            raise CorpusError(f"{path}: not a chunk file")
        version, vid_len, dtype_code = struct.unpack("<IHB", f.read(7))
        if version != _FILE_VERSION:
            raise CorpusError(f"{path}: unsupported version {version}")
        vocab_id = f.read(vid_len).decode("utf-8")
        vocab_size, n = struct.unpack("<IQ", f.read(12))
        raw = f.read(n * CHUNK_WIDTH * dtype_code)
    rows = np.frombuffer(raw, dtype=f"<u{dtype_code}").reshape(n, CHUNK_WIDTH)
    return ChunkSet(vocab_id, vocab_size, rows.copy(), {"file": str(path)})


# ------------------------------------------------------------------ MAESTRO

MAESTRO_COLUMNS = ("piece_id", "split", "onset_sec", "offset_sec", "pitch", "velocity")


@dataclass
class Piece:
    piece_id: str
    split: str
    notes: list[miditok.NoteEvent]


def load_maestro(path) -> list[Piece]:
    """Parse the per-note table (header: piece_id, split, onset_sec,
    offset_sec, pitch, velocity; comma- or tab-separated). Notes are grouped
    by piece in file order and sorted by onset."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as f:
        first = f.readline()
        if not first:
            raise CorpusError(f"{path}: empty file")
        delim = "\t" if "\t" in first else ","
        header = [h.strip() for h in first.strip().split(delim)]
        missing = [c for c in MAESTRO_COLUMNS if c not in header]
        if missing:
            raise CorpusError(f"{path}: missing columns {missing}")
        col = {name: header.index(name) for name in MAESTRO_COLUMNS}
        pieces: dict[str, Piece] = {}
        reader = csv.reader(f, delimiter=delim)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                pid = row[col["piece_id"]].strip()
                split = row[col["split"]].strip()
                note = miditok.NoteEvent(
                    onset=float(row[col["onset_sec"]]),
                    offset=float(row[col["offset_sec"]]),
                    pitch=int(row[col["pitch"]]),
                    velocity=int(row[col["velocity"]]),
                )
            except (IndexError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: bad note row ({exc})") from exc
            if pid not in pieces:
                pieces[pid] = Piece(pid, split, [])
            pieces[pid].notes.append(note)
    out = list(pieces.values())
    for p in out:
        p.notes.sort(key=lambda n: n.onset)
    return out


def pieces_to_stream(pieces: list[Piece], grid: miditok.GridSpec) -> np.ndarray:
    """Tokenize every piece (cutting long rests) and concatenate."""
    toks: list[int] = []
    for p in pieces:
        for seg in miditok.split_on_rests(p.notes, grid):
            toks.extend(miditok.encode_piece(seg, grid))
    return np.asarray(toks, dtype=np.uint16)


def maestro_chunks(path, grid: miditok.GridSpec = miditok.GridSpec(),
                   volume: int | None = None, rng: Rng | None = None) -> ChunkSet:
    pieces = load_maestro(path)
    stream = pieces_to_stream(pieces, grid)
    cs = chunk(stream, MUSIC_VOCAB_ID, miditok.VOCAB_SIZE,
               {"source": f"maestro:{Path(path).name}", "pieces": len(pieces)})
    if volume is not None and volume < len(cs):
        cs = subsample_chunks(cs, volume, rng or Rng(42, "maestro/subsample"))
    return cs
