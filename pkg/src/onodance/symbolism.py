"""Quantification of parsed words onto 43 adjective-pair scales.

The model is additive: a per-scale base, per-mora contributions looked up by
phoneme features and scaled by a position-bucket multiplier, plus word-form
contributions, clamped to the scale bounds. Weights live in a versioned JSON
data file so the whole table can be swapped out.
"""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .datafiles import data_path, read_tsv
from .errors import OnodanceError, VersionMismatch
from .phonology import CONSONANT_CLASSES, VOWELS, PhonWord, normalize, parse

N_SCALES = 43

POSITION_BUCKETS = ("initial", "medial", "final")
WORD_FORM_KEYS = (
    "reduplicated", "final_gemination", "final_nasal", "final_ri", "long_vowel",
)


@dataclass(frozen=True)
class ScalePair:
    index: int
    negative: str
    positive: str

    @property
    def label(self) -> str:
        return f"{self.negative}-{self.positive}"


class ScaleRegistry:
    """The ordered list of the 43 adjective pairs."""

    def __init__(self, version: str, pairs: list[ScalePair]):
        if len(pairs) != N_SCALES:
            raise ValueError(f"registry must hold {N_SCALES} pairs, got {len(pairs)}")
        for i, p in enumerate(pairs):
            if p.index != i:
                raise ValueError(f"pair indices must be contiguous, got {p.index} at {i}")
        labels = [p.label for p in pairs]
        if len(set(labels)) != N_SCALES:
            raise ValueError("pair labels must be unique")
        self.version = version
        self.pairs = tuple(pairs)
        self._by_label = {p.label: p.index for p in pairs}

    def __len__(self) -> int:
        return N_SCALES

    def label(self, index: int) -> str:
        return self.pairs[index].label

    def index_of(self, label: str) -> int:
        return self._by_label[label]


@functools.lru_cache(maxsize=1)
def load_scale_registry() -> ScaleRegistry:
    version, rows = read_tsv("adjective_scales.tsv")
    pairs = [ScalePair(int(idx), neg, pos) for idx, neg, pos in rows]
    return ScaleRegistry(version, pairs)


@dataclass(frozen=True)
class RuleTable:
    version: str
    clamp_lo: float
    clamp_hi: float
    base: np.ndarray                    # (43,)
    consonant: dict                     # class -> (43,)
    voiced: np.ndarray                  # (43,)
    palatalized: np.ndarray             # (43,)
    vowel: dict                         # vowel -> (43,)
    position: dict                      # bucket -> float multiplier
    word_form: dict                     # flag -> (43,)

    def with_word_form_disabled(self) -> "RuleTable":
        """Copy with word-form weights zeroed and position buckets uniform
        (used by the reduplication-consistency property)."""
        zeros = {k: np.zeros(N_SCALES) for k in WORD_FORM_KEYS}
        ones = {k: 1.0 for k in POSITION_BUCKETS}
        return replace(self, word_form=zeros, position=ones,
                       version=self.version + "+flat")

    @staticmethod
    def all_zero(version: str = "zero") -> "RuleTable":
        z = lambda: np.zeros(N_SCALES)
        return RuleTable(
            version=version, clamp_lo=-2.0, clamp_hi=2.0, base=z(),
            consonant={c: z() for c in CONSONANT_CLASSES},
            voiced=z(), palatalized=z(),
            vowel={v: z() for v in (*VOWELS, "none")},
            position={k: 1.0 for k in POSITION_BUCKETS},
            word_form={k: z() for k in WORD_FORM_KEYS},
        )


def _expand_sparse(entry: dict, registry: ScaleRegistry, where: str) -> np.ndarray:
    vec = np.zeros(N_SCALES)
    for label, weight in entry.items():
        if label not in registry._by_label:
            raise ValueError(f"{where}: unknown scale label {label!r}")
        w = float(weight)
        if not np.isfinite(w):
            raise ValueError(f"{where}: weight for {label!r} is not finite")
        vec[registry.index_of(label)] = w
    return vec


def load_rule_table(path: Path | None = None) -> RuleTable:
    """Load and validate a rule-table JSON file (packaged default if None)."""
    registry = load_scale_registry()
    p = Path(path) if path is not None else data_path("rule_table.json")
    raw = json.loads(p.read_text(encoding="utf-8"))

    def section(name):
        if name not in raw:
            raise ValueError(f"rule table missing section {name!r}")
        return raw[name]

    consonant = {}
    cons_raw = section("consonant")
    for cls in CONSONANT_CLASSES:
        if cls not in cons_raw:
            raise ValueError(f"rule table missing consonant class {cls!r}")
        consonant[cls] = _expand_sparse(cons_raw[cls], registry, f"consonant[{cls}]")
    vowel = {}
    vowel_raw = section("vowel")
    for v in (*VOWELS, "none"):
        if v not in vowel_raw:
            raise ValueError(f"rule table missing vowel {v!r}")
        vowel[v] = _expand_sparse(vowel_raw[v], registry, f"vowel[{v}]")
    position = {}
    pos_raw = section("position")
    for bucket in POSITION_BUCKETS:
        if bucket not in pos_raw:
            raise ValueError(f"rule table missing position bucket {bucket!r}")
        position[bucket] = float(pos_raw[bucket])
    word_form = {}
    wf_raw = section("word_form")
    for key in WORD_FORM_KEYS:
        if key not in wf_raw:
            raise ValueError(f"rule table missing word-form key {key!r}")
        word_form[key] = _expand_sparse(wf_raw[key], registry, f"word_form[{key}]")

    lo, hi = (float(x) for x in section("clamp"))
    return RuleTable(
        version=str(section("version")),
        clamp_lo=lo, clamp_hi=hi,
        base=_expand_sparse(section("base"), registry, "base"),
        consonant=consonant,
        voiced=_expand_sparse(section("voiced"), registry, "voiced"),
        palatalized=_expand_sparse(section("palatalized"), registry, "palatalized"),
        vowel=vowel, position=position, word_form=word_form,
    )


@functools.lru_cache(maxsize=1)
def default_rule_table() -> RuleTable:
    return load_rule_table()


def position_bucket(index: int, count: int) -> str:
    if index == 0:
        return "initial"
    if index == count - 1:
        return "final"
    return "medial"


def quantify(word: PhonWord, table: RuleTable) -> np.ndarray:
    """Map a parsed word to its 43-dim scale vector (values in clamp bounds)."""
    total = table.base.copy()
    count = len(word.morae)
    for i, m in enumerate(word.morae):
        contrib = table.consonant[m.consonant] + table.vowel[m.vowel]
        if m.voiced:
            contrib = contrib + table.voiced
        if m.palatalized:
            contrib = contrib + table.palatalized
        total += table.position[position_bucket(i, count)] * contrib
        if m.long_vowel:
            total += table.word_form["long_vowel"]
    if word.reduplicated:
        total += table.word_form["reduplicated"]
    if word.final_gemination:
        total += table.word_form["final_gemination"]
    if word.final_nasal:
        total += table.word_form["final_nasal"]
    if word.final_ri:
        total += table.word_form["final_ri"]
    return np.clip(total, table.clamp_lo, table.clamp_hi)


def check_scale_vector(values: np.ndarray, lo: float = -2.0, hi: float = 2.0) -> np.ndarray:
    """Validate the AdjectiveScaleVector invariants; returns the array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (N_SCALES,):
        raise ValueError(f"scale vector must have shape ({N_SCALES},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("scale vector contains non-finite values")
    if arr.min() < lo or arr.max() > hi:
        raise ValueError(f"scale vector leaves [{lo}, {hi}]")
    return arr


@dataclass
class QuantificationDictionary:
    table_version: str
    entries: dict  # normalized word -> (43,) float64


def build_dictionary(words, table: RuleTable) -> QuantificationDictionary:
    """Quantify a word list into a dictionary keyed by normalized form."""
    entries = {}
    for word in words:
        try:
            key = normalize(word)
            if key in entries:
                continue
            entries[key] = quantify(parse(word), table)
        except OnodanceError as e:
            e.args = (f"word {word!r}: {e}",)
            raise
    return QuantificationDictionary(table_version=table.version, entries=entries)


def lookup_or_quantify(word: str, dictionary: QuantificationDictionary,
                       table: RuleTable) -> np.ndarray:
    """Dictionary hit if present, otherwise quantify on the fly."""
    if dictionary.table_version != table.version:
        raise VersionMismatch(
            f"dictionary built with table {dictionary.table_version!r}, "
            f"got table {table.version!r}")
    key = normalize(word)
    if key in dictionary.entries:
        return dictionary.entries[key].copy()
    return quantify(parse_word_cached(key), table)


@functools.lru_cache(maxsize=4096)
def parse_word_cached(normalized: str):
    from .phonology import parse_word
    return parse_word(normalized)


def save_dictionary(dictionary: QuantificationDictionary, path: Path) -> None:
    """Canonical JSON serialization (byte-reproducible for equal inputs)."""
    payload = {
        "table_version": dictionary.table_version,
        "entries": {w: [float(x) for x in v] for w, v in dictionary.entries.items()},
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_dictionary(path: Path) -> QuantificationDictionary:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = {}
    for word, values in raw["entries"].items():
        entries[word] = check_scale_vector(np.asarray(values, dtype=np.float64))
    return QuantificationDictionary(table_version=str(raw["table_version"]),
                                    entries=entries)
