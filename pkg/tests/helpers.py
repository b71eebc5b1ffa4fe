"""Shared test utilities: legal-mora generation and small model configs."""
from __future__ import annotations

import numpy as np

from onodance.motion import Joint, Skeleton
from onodance.phonology import VOWELS, Mora, _mora

PLAIN_CONSONANTS = tuple("kgsztdnhbpmyrw")
PALATALIZABLE = tuple(c for c in PLAIN_CONSONANTS if c not in ("y", "w"))

Q = Mora(consonant="Q", vowel="none")
N = Mora(consonant="N", vowel="none")


def random_mora(rng: np.random.Generator) -> Mora:
    kind = rng.random()
    if kind < 0.06:
        return Q
    if kind < 0.14:
        return N
    if kind < 0.26:
        return _mora("none", VOWELS[rng.integers(len(VOWELS))],
                     long_vowel=bool(rng.random() < 0.3))
    consonant = PLAIN_CONSONANTS[rng.integers(len(PLAIN_CONSONANTS))]
    palatalized = consonant in PALATALIZABLE and rng.random() < 0.15
    return _mora(consonant, VOWELS[rng.integers(len(VOWELS))],
                 palatalized=palatalized,
                 long_vowel=bool(rng.random() < 0.2))


def _may_follow(prev: Mora | None, mora: Mora) -> bool:
    """Adjacency constraints under which render() is invertible.

    Q must precede a plain non-n consonant onset (doubling notation); N must
    not precede a vowel or y onset (would re-parse as a plain n-row mora); a
    vowel-only mora after a short mora with the same vowel merges into a long
    vowel.
    """
    if prev is None:
        return True
    if prev.consonant == "Q":
        return mora.consonant not in ("none", "Q", "N", "n")
    if prev.consonant == "N":
        return mora.consonant not in ("none", "y")
    if mora.consonant == "none" and prev.vowel == mora.vowel \
            and not prev.long_vowel:
        return False
    return True


def random_legal_morae(rng: np.random.Generator, max_len: int = 6):
    """A mora sequence guaranteed to round-trip through render/parse."""
    n = int(rng.integers(1, max_len + 1))
    morae: list[Mora] = []
    while len(morae) < n:
        m = random_mora(rng)
        prev = morae[-1] if morae else None
        if not _may_follow(prev, m):
            continue
        morae.append(m)
    return morae


def chain_skeleton(n_joints: int = 2, offset=(1.0, 0.0, 0.0)) -> Skeleton:
    """Root plus a chain of joints, each offset from its parent."""
    joints = [Joint("j0", None, (0.0, 0.0, 0.0))]
    for i in range(1, n_joints):
        joints.append(Joint(f"j{i}", i - 1, tuple(offset)))
    return Skeleton(joints)


def random_clip(rng: np.random.Generator, skeleton: Skeleton, n_frames: int,
                fps: float = 60.0):
    from onodance.motion import MotionClip
    return MotionClip(
        fps=fps, skeleton=skeleton,
        root_translation=rng.standard_normal((n_frames, 3)).astype(np.float32),
        joint_rotations=rng.standard_normal(
            (n_frames, skeleton.n_joints, 6)).astype(np.float32))
