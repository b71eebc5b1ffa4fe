"""Normalization and mora-level parsing of romanized sound-symbolic words.

Input orthography is romanized text (Hepburn variants are folded to a
kunrei-style canonical form). Words from other languages are made parseable
by folding foreign letters onto the nearest native consonant class and, for
consonant clusters, inserting an epenthetic ``u``. A trailing ``q`` marks
word-final gemination; ``q`` before a consonant is canonicalized to a
doubled consonant during normalization.
"""
from __future__ import annotations

import functools
import re
import unicodedata
from dataclasses import dataclass

from .datafiles import read_tsv
from .errors import EmptyWord, UnparsableSequence, UnsupportedCharacter

VOWELS = ("a", "i", "u", "e", "o")
# Consonant classes a mora may carry. Q is the gemination marker, N the
# moraic nasal; both carry no vowel.
CONSONANT_CLASSES = (
    "none", "k", "g", "s", "z", "t", "d", "n", "h", "b", "p", "m",
    "y", "r", "w", "Q", "N",
)
# Voicing here means obstruent voicing (the k/g, s/z, t/d, h/b oppositions);
# sonorants do not carry the flag.
VOICED_OBSTRUENTS = frozenset("gzdb")

_PLAIN_CONSONANTS = frozenset("kgsztdnhbpmyrw")
_NON_PALATALIZABLE = frozenset("yw")

_COMBINING_MACRON = "̄"
_COMBINING_CIRCUMFLEX = "̂"
_STRIP_CHARS = frozenset("-'’‐‑")


@dataclass(frozen=True)
class Mora:
    consonant: str
    vowel: str
    voiced: bool = False
    palatalized: bool = False
    long_vowel: bool = False

    def __post_init__(self):
        if self.consonant not in CONSONANT_CLASSES:
            raise ValueError(f"unknown consonant class {self.consonant!r}")
        if self.vowel not in VOWELS and self.vowel != "none":
            raise ValueError(f"unknown vowel {self.vowel!r}")
        if self.consonant in ("Q", "N"):
            if self.vowel != "none" or self.palatalized or self.long_vowel:
                raise ValueError(f"{self.consonant} mora carries no vowel features")
        elif self.vowel == "none":
            raise ValueError("only Q and N morae may lack a vowel")
        if self.consonant == "none" and self.palatalized:
            raise ValueError("a vowel-only mora cannot be palatalized")


def _mora(consonant: str, vowel: str, palatalized: bool = False,
          long_vowel: bool = False) -> Mora:
    return Mora(
        consonant=consonant,
        vowel=vowel,
        voiced=consonant in VOICED_OBSTRUENTS,
        palatalized=palatalized,
        long_vowel=long_vowel,
    )


_Q = Mora(consonant="Q", vowel="none")
_N = Mora(consonant="N", vowel="none")
_FINAL_RI = _mora("r", "i")


@dataclass(frozen=True)
class PhonWord:
    morae: tuple[Mora, ...]
    reduplicated: bool
    final_gemination: bool
    final_nasal: bool
    final_ri: bool
    surface: str


@functools.lru_cache(maxsize=1)
def _digraph_rules() -> list[tuple[str, str]]:
    _, rows = read_tsv("digraphs.tsv")
    return [(src, dst) for src, dst in rows]


@functools.lru_cache(maxsize=1)
def _folding_rules() -> dict[str, str]:
    _, rows = read_tsv("folding.tsv")
    return {src: dst for src, dst in rows}


def folding_table_version() -> str:
    version, _ = read_tsv("folding.tsv")
    return version


_Q_CLUSTER = re.compile(r"q(?=[b-df-hj-np-tv-z])")


def normalize(raw: str) -> str:
    """Canonicalize a romanized word to lowercase kunrei-style [a-z] text."""
    s = raw.strip()
    if not s:
        raise EmptyWord("input is empty after trimming")

    # Macron / circumflex long-vowel notation becomes an explicit double vowel.
    decomposed = unicodedata.normalize("NFD", s)
    chars: list[str] = []
    for ch in decomposed:
        if ch in (_COMBINING_MACRON, _COMBINING_CIRCUMFLEX) and chars \
                and chars[-1].lower() in VOWELS:
            chars.append(chars[-1])
        else:
            chars.append(ch)
    s = "".join(chars).lower()
    s = "".join(ch for ch in s if ch not in _STRIP_CHARS and not ch.isspace())
    if not s:
        raise EmptyWord("input is empty after trimming")

    for src, dst in _digraph_rules():
        s = s.replace(src, dst)
    # q before a consonant is gemination notation: double the consonant.
    while True:
        replaced = _Q_CLUSTER.sub(lambda m: s[m.end()], s)
        if replaced == s:
            break
        s = replaced

    for pos, ch in enumerate(s):
        if not ("a" <= ch <= "z"):
            raise UnsupportedCharacter(ch, pos)
    return s


def _fold(s: str) -> str:
    """Apply the foreign-letter folding table (q only when prevocalic)."""
    table = _folding_rules()
    out = []
    for i, ch in enumerate(s):
        if ch == "q":
            nxt = s[i + 1] if i + 1 < len(s) else ""
            out.append(table["q"] if nxt in VOWELS else "q")
        else:
            out.append(table.get(ch, ch))
    return "".join(out)


def parse_word(normalized: str) -> PhonWord:
    """Segment a normalized word into morae (greedy longest match)."""
    if not normalized:
        raise EmptyWord("cannot parse an empty word")
    for pos, ch in enumerate(normalized):
        if not ("a" <= ch <= "z"):
            raise UnparsableSequence(normalized, pos)

    s = _fold(normalized)
    morae: list[Mora] = []
    i = 0
    n = len(s)
    while i < n:
        ch = s[i]
        nxt = s[i + 1] if i + 1 < n else ""
        if ch in VOWELS:
            long_v = nxt == ch
            morae.append(_mora("none", ch, long_vowel=long_v))
            i += 2 if long_v else 1
        elif ch == "q":
            morae.append(_Q)
            i += 1
        elif ch == "n" and not (
            nxt in VOWELS
            or (nxt == "y" and i + 2 < n and s[i + 2] in VOWELS)
        ):
            # Moraic nasal: n before a consonant or at word end.
            morae.append(_N)
            i += 1
        elif ch in _PLAIN_CONSONANTS:
            if nxt == ch:
                # Doubled consonant: gemination, second copy starts next mora.
                morae.append(_Q)
                i += 1
            elif (nxt == "y" and ch not in _NON_PALATALIZABLE
                    and i + 2 < n and s[i + 2] in VOWELS):
                v = s[i + 2]
                long_v = i + 3 < n and s[i + 3] == v
                morae.append(_mora(ch, v, palatalized=True, long_vowel=long_v))
                i += 4 if long_v else 3
            elif nxt in VOWELS:
                long_v = i + 2 < n and s[i + 2] == nxt
                morae.append(_mora(ch, nxt, long_vowel=long_v))
                i += 3 if long_v else 2
            else:
                # Cluster or word-final consonant: epenthetic u.
                morae.append(_mora(ch, "u"))
                i += 1
        else:
            raise UnparsableSequence(s, i)

    return _word_from_morae(morae)


def _word_from_morae(morae: list[Mora]) -> PhonWord:
    count = len(morae)
    half = count // 2
    reduplicated = count >= 2 and count % 2 == 0 \
        and morae[:half] == morae[half:]
    last = morae[-1]
    return PhonWord(
        morae=tuple(morae),
        reduplicated=reduplicated,
        final_gemination=last.consonant == "Q",
        final_nasal=last.consonant == "N",
        final_ri=count >= 2 and last == _FINAL_RI,
        surface=render(morae),
    )


def parse(raw: str) -> PhonWord:
    """Normalize then parse; the usual entry point."""
    return parse_word(normalize(raw))


def render(morae) -> str:
    """Surface realization of a mora sequence (inverse of parse_word on
    canonical text)."""
    parts = []
    seq = list(morae)
    for idx, m in enumerate(seq):
        if m.consonant == "Q":
            nxt = seq[idx + 1] if idx + 1 < len(seq) else None
            if nxt is not None and nxt.consonant not in ("none", "Q", "N"):
                parts.append(nxt.consonant)
            else:
                parts.append("q")
        elif m.consonant == "N":
            parts.append("n")
        else:
            if m.consonant != "none":
                parts.append(m.consonant)
            if m.palatalized:
                parts.append("y")
            parts.append(m.vowel)
            if m.long_vowel:
                parts.append(m.vowel)
    return "".join(parts)
