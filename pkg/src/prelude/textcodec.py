"""Subword and word-level text codecs.

ByteBPECodec implements byte-level BPE with greedy rank-ordered merges and
loads the standard two-file distribution format (vocab.json mapping token
string to id, merges.txt with one space-separated pair per line, optional
``#version`` header). Raw bytes are first mapped to printable unicode
proxies, so every byte string round-trips exactly whatever the merge list.

WordCodec is the small deterministic whitespace codec used for desk-scale
experiments where the 50,257-entry files would be overkill: vocabulary built
from a corpus by frequency, one OOV token, no detokenization guarantees.
"""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

import regex

# GPT-2-style pre-tokenization: contractions, letter runs, digit runs,
# punctuation runs, then whitespace handling.
_PRETOKEN = regex.compile(
    r"""'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"""
)

SUBWORD_VOCAB_ID = "subword50257"
WORDLEVEL_VOCAB_ID = "wordlevel-test"


@lru_cache(maxsize=1)
def bytes_to_unicode() -> dict[int, str]:
    """Map every byte to a printable unicode char (identity where possible)."""
    bs = (list(range(ord("!"), ord("~") + 1))
          + list(range(ord("\xa1"), ord("\xac") + 1))
          + list(range(ord("\xae"), ord("\xff") + 1)))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, map(chr, cs)))


class CodecError(ValueError):
    pass


class ByteBPECodec:
    vocab_id = SUBWORD_VOCAB_ID

    def __init__(self, vocab: dict[str, int], merges: list[tuple[str, str]]):
        self.encoder = dict(vocab)
        self.decoder = {v: k for k, v in vocab.items()}
        self.ranks = {pair: i for i, pair in enumerate(merges)}
        self.byte_enc = bytes_to_unicode()
        self.byte_dec = {c: b for b, c in self.byte_enc.items()}
        missing = [self.byte_enc[b] for b in range(256)
                   if self.byte_enc[b] not in self.encoder]
        if missing:
            raise CodecError(f"vocabulary lacks {len(missing)} byte units "
                             f"(e.g. {missing[0]!r}); byte-level closure broken")
        self._bpe_cache: dict[str, tuple[str, ...]] = {}

    @property
    def vocab_size(self) -> int:
        return len(self.encoder)

    @classmethod
    def from_files(cls, vocab_path, merges_path) -> "ByteBPECodec":
        with open(vocab_path, encoding="utf-8") as f:
            vocab = json.load(f)
        merges = []
        with open(merges_path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line or line.startswith("#version"):
                    continue
                a, b = line.split(" ")
                merges.append((a, b))
        return cls(vocab, merges)

    def _bpe(self, word: str) -> tuple[str, ...]:
        cached = self._bpe_cache.get(word)
        if cached is not None:
            return cached
        parts = list(word)
        while len(parts) > 1:
            best = None
            best_rank = None
            for pair in zip(parts, parts[1:]):
                r = self.ranks.get(pair)
                if r is not None and (best_rank is None or r < best_rank):
                    best, best_rank = pair, r
            if best is None:
                break
            a, b = best
            merged = []
            i = 0
            while i < len(parts):
                if i < len(parts) - 1 and parts[i] == a and parts[i + 1] == b:
                    merged.append(a + b)
                    i += 2
                else:
                    merged.append(parts[i])
                    i += 1
            parts = merged
        result = tuple(parts)
        if len(self._bpe_cache) < 65536:
            self._bpe_cache[word] = result
        return result

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for m in _PRETOKEN.findall(text):
            proxy = "".join(self.byte_enc[b] for b in m.encode("utf-8"))
            ids.extend(self.encoder[p] for p in self._bpe(proxy))
        return ids

    def decode(self, ids) -> str:
        return self.decode_bytes(ids).decode("utf-8", errors="replace")

    def encode_bytes(self, raw: bytes) -> list[int]:
        """Encode raw bytes as one unit (no pre-tokenization)."""
        proxy = "".join(self.byte_enc[b] for b in raw)
        return [self.encoder[p] for p in self._bpe(proxy)]

    def decode_bytes(self, ids) -> bytes:
        text = "".join(self.decoder[int(i)] for i in ids)
        return bytes(self.byte_dec[c] for c in text)


def byte_unit_vocab(extra_merges: list[tuple[str, str]] | None = None):
    """Minimal byte-closed vocabulary: the 256 byte units in proxy-alphabet
    order plus one entry per merge product. Enough to exercise the codec and
    the file format without the full-size distribution files."""
    units = sorted(bytes_to_unicode().values())
    vocab = {u: i for i, u in enumerate(units)}
    merges = list(extra_merges or [])
    for a, b in merges:
        if a + b not in vocab:
            vocab[a + b] = len(vocab)
    return vocab, merges


class WordCodec:
    vocab_id = WORDLEVEL_VOCAB_ID

    PAD, UNK = 0, 1
    _SPECIALS = ("<pad>", "<unk>")

    def __init__(self, words: list[str]):
        self.id_to_word = list(self._SPECIALS) + list(words)
        self.word_to_id = {w: i for i, w in enumerate(self.id_to_word)}
        if len(self.word_to_id) != len(self.id_to_word):
            raise CodecError("duplicate words in vocabulary")

    @property
    def vocab_size(self) -> int:
        return len(self.id_to_word)

    @classmethod
    def build(cls, text: str, max_vocab: int = 8192) -> "WordCodec":
        counts: dict[str, int] = {}
        for w in text.split():
            counts[w] = counts.get(w, 0) + 1
        ranked = sorted(counts, key=lambda w: (-counts[w], w))
        return cls(ranked[:max_vocab - len(cls._SPECIALS)])

    def encode(self, text: str) -> list[int]:
        return [self.word_to_id.get(w, self.UNK) for w in text.split()]

    def decode(self, ids) -> str:
        return " ".join(self.id_to_word[int(i)] for i in ids)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps({"words": self.id_to_word[len(self._SPECIALS):]},
                                         ensure_ascii=False))

    @classmethod
    def load(cls, path) -> "WordCodec":
        data = json.loads(Path(path).read_text())
        return cls(data["words"])
