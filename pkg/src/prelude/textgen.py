"""Deterministic synthetic text for desk-scale experiments.

Generates English-like word streams from a fixed pseudo-lexicon and a small
phrase grammar with number agreement (plural subjects take bare verbs,
singular subjects take -s forms, with relative clauses putting distance
between the two). Two registers share one vocabulary:

    prose  -- full grammar, varied sentence shapes, paragraph flow
    verse  -- short fixed-length lines with refrains and line-final
              repetition, stanzas separated by <nl> markers

The point is not realism; it is cheap, reproducible text with learnable
short- and long-range structure, so staged-training effects are measurable
in minutes instead of days. Words and punctuation are space-separated so the
word-level codec tokenizes them directly.
"""

from __future__ import annotations

import itertools

from .rng import Rng

_ONSETS = ("b", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t",
           "v", "w", "z", "br", "cl", "dr", "fl", "gr", "pl", "st", "tr")
_VOWELS = ("a", "e", "i", "o", "u", "ai", "ea", "ou")
_CODAS = ("", "n", "r", "l", "m", "t", "ck")

_DETS_SING = ("the", "a", "every", "this")
_DETS_PLUR = ("the", "some", "many", "these")
_PREPS = ("in", "on", "under", "near", "beyond", "with")
_CONJ = ("and", "but", "so")


def _syllables():
    for onset, vowel, coda in itertools.product(_ONSETS, _VOWELS, _CODAS):
        yield onset + vowel + coda


def _lexicon(n_nouns=400, n_verbs=260, n_adjs=200, n_advs=60):
    """Disjoint word classes from the deterministic syllable enumeration."""
    one = list(_syllables())
    two = (a + b for a, b in itertools.product(one, repeat=2))
    words = itertools.chain(one, two)
    # skip the shortest fragments; they read like function words
    pool = (w for w in words if len(w) >= 4)
    nouns = list(itertools.islice(pool, n_nouns))
    verbs = list(itertools.islice(pool, n_verbs))
    adjs = list(itertools.islice(pool, n_adjs))
    advs = [w + "ly" for w in itertools.islice(pool, n_advs)]
    return nouns, verbs, adjs, advs


NOUNS, VERBS, ADJS, ADVS = _lexicon()


def _zipf_weights(n: int, a: float = 1.05):
    w = [(i + 2.0) ** -a for i in range(n)]
    s = sum(w)
    return [x / s for x in w]


class _Sampler:
    def __init__(self, rng: Rng):
        self.gen = rng.gen
        self._w = {}

    def pick(self, words: list[str]) -> str:
        key = len(words)
        if key not in self._w:
            self._w[key] = _zipf_weights(key)
        i = self.gen.choice(key, p=self._w[key])
        return words[int(i)]

    def uniform(self, seq):
        return seq[int(self.gen.integers(0, len(seq)))]

    def coin(self, p: float) -> bool:
        return float(self.gen.random()) < p


def _noun_phrase(s: _Sampler, plural: bool, depth: int = 0) -> list[str]:
    det = s.uniform(_DETS_PLUR if plural else _DETS_SING)
    out = [det]
    if s.coin(0.45):
        out.append(s.pick(ADJS))
    noun = s.pick(NOUNS)
    out.append(noun + "s" if plural else noun)
    if depth == 0 and s.coin(0.18):
        # relative clause: distance between subject and its verb
        out.append("that")
        out.extend(_verb_phrase(s, plural, depth + 1))
    return out


def _verb_phrase(s: _Sampler, plural: bool, depth: int = 0) -> list[str]:
    verb = s.pick(VERBS)
    out = [verb if plural else verb + "s"]
    if s.coin(0.55):
        out.extend(_noun_phrase(s, s.coin(0.4), depth + 1))
    if s.coin(0.25):
        out.append(s.pick(ADVS))
    return out


def _sentence(s: _Sampler) -> list[str]:
    plural = s.coin(0.4)
    words = _noun_phrase(s, plural) + _verb_phrase(s, plural)
    if s.coin(0.3):
        words += [s.uniform(_PREPS)] + _noun_phrase(s, s.coin(0.4), depth=1)
    if s.coin(0.15):
        words += [s.uniform(_CONJ)] + _sentence(s)[:-1]
    words.append(".")
    return words


def _verse_line(s: _Sampler, end_word: str | None = None) -> list[str]:
    plural = s.coin(0.5)
    noun = s.pick(NOUNS[:120])
    verb = s.pick(VERBS[:80])
    line = ["the", s.pick(ADJS[:80]), noun + ("s" if plural else ""),
            verb if plural else verb + "s"]
    line.append(end_word if end_word else s.pick(NOUNS[:120]))
    line.append("<nl>")
    return line


def gen_text(rng: Rng, n_tokens: int, style: str = "prose") -> str:
    """At least n_tokens whitespace-separated tokens, deterministic in rng."""
    s = _Sampler(rng)
    out: list[str] = []
    if style == "prose":
        while len(out) < n_tokens:
            out.extend(_sentence(s))
    elif style == "verse":
        while len(out) < n_tokens:
            # a stanza: couplet rhyme (shared line-final word), then a
            # refrain pair, closed by a blank line marker
            rhyme = s.pick(NOUNS[:120])
            out.extend(_verse_line(s, rhyme))
            out.extend(_verse_line(s, rhyme))
            refrain = _verse_line(s)
            out.extend(refrain)
            out.extend(refrain)
            out.append("<nl>")
    else:
        raise ValueError(f"unknown style {style!r}")
    return " ".join(out[:n_tokens])
