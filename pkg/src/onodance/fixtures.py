"""Deterministic synthetic dataset: words with strongly separated values on a
designated scale, paired with oscillating motions whose amplitude follows
that value.

Each word gets three clips: steady swing, ramp-in from rest, and a delayed
start that stays at rest for the first two seconds (exactly one seed window)
before swinging, so training covers the rest-pose-seed situation inference
starts from. One extra baseline example has no annotations and near-still
motion. The meta file records the expected speed ordering, which downstream
tests treat as the oracle.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .motion import IDENTITY_6D, MotionClip, default_skeleton, save_clip
from .phonology import parse
from .symbolism import default_rule_table, load_scale_registry, quantify

DESIGNATED_SCALE = "slow-fast"
FIXTURE_WORDS = ("pikipiki", "sutasuta", "yurayura", "noonoo")
MIN_SPREAD = 1.5          # required value range across the fixture words
FPS = 60.0
OSC_HZ = 1.5
AMP_RANGE = (0.06, 0.50)  # meters of root sway at scale value -2 .. +2
ARM_RANGE = (0.10, 0.90)  # radians of shoulder swing
IDLE_AMP = 0.01


def scale_values(words=FIXTURE_WORDS) -> dict:
    table = default_rule_table()
    idx = load_scale_registry().index_of(DESIGNATED_SCALE)
    return {w: float(quantify(parse(w), table)[idx]) for w in words}


def _z_rotation_6d(theta: np.ndarray) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    zero = np.zeros_like(theta)
    return np.stack([c, s, zero, -s, c, zero], axis=-1)


def _envelope(t: np.ndarray, variant: str) -> np.ndarray:
    if variant == "steady":
        return np.ones_like(t)
    if variant == "ramp":
        return np.minimum(t / 2.0, 1.0)
    if variant == "delayed":
        # Rest for the first 2 s (one full seed window), then a fast ramp.
        return np.clip((t - 2.0) / 0.5, 0.0, 1.0)
    raise ValueError(f"unknown variant {variant!r}")


def _oscillating_clip(amp: float, arm: float, n_frames: int,
                      phase: float, variant: str) -> MotionClip:
    skeleton = default_skeleton()
    t = np.arange(n_frames) / FPS
    env = _envelope(t, variant)
    sway = amp * env * np.sin(2 * np.pi * OSC_HZ * t + phase)
    root = np.zeros((n_frames, 3), dtype=np.float32)
    root[:, 0] = sway

    rot = np.tile(IDENTITY_6D, (n_frames, skeleton.n_joints, 1))
    theta = arm * env * np.sin(2 * np.pi * OSC_HZ * t + phase + 0.5)
    li = skeleton.index_of("left_shoulder")
    ri = skeleton.index_of("right_shoulder")
    rot[:, li, :] = _z_rotation_6d(theta)
    rot[:, ri, :] = _z_rotation_6d(-theta)
    return MotionClip(fps=FPS, skeleton=skeleton,
                      root_translation=root,
                      joint_rotations=rot.astype(np.float32))


def _srt(word: str, start: float, end: float) -> str:
    def stamp(sec):
        ms = int(round(sec * 1000))
        h, rem = divmod(ms, 3600_000)
        m, rem = divmod(rem, 60_000)
        s, ms = divmod(rem, 1000)
        return f"{h:02d}:{m:02d}:{s:02d},{ms:03d}"
    return f"1\n{stamp(start)} --> {stamp(end)}\n{word}\n"


def _sbv(word: str, start: float, end: float) -> str:
    def stamp(sec):
        ms = int(round(sec * 1000))
        h, rem = divmod(ms, 3600_000)
        m, rem = divmod(rem, 60_000)
        s, ms = divmod(rem, 1000)
        return f"{h}:{m:02d}:{s:02d}.{ms:03d}"
    return f"{stamp(start)},{stamp(end)}\n{word}\n"


def _csv(word: str, start: float, end: float) -> str:
    return f"word,start_s,end_s\n{word},{start},{end}\n"

_CAPTION_WRITERS = (("srt", _srt), ("sbv", _sbv), ("csv", _csv))


def write_fixtures(out_dir: Path, seed: int = 7, n_frames: int = 600) -> dict:
    """Write clips, caption files, manifest.json and fixture_meta.json."""
    out = Path(out_dir)
    (out / "clips").mkdir(parents=True, exist_ok=True)
    (out / "captions").mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(seed))

    values = scale_values()
    spread = max(values.values()) - min(values.values())
    if spread < MIN_SPREAD:
        raise ValueError(
            f"fixture words span only {spread:.2f} on {DESIGNATED_SCALE!r}; "
            f"need >= {MIN_SPREAD} (rule table changed?)")

    duration = n_frames / FPS
    manifest = []
    amplitudes = {}
    ordering = sorted(values, key=values.__getitem__, reverse=True)

    for wi, word in enumerate(FIXTURE_WORDS):
        norm = (values[word] + 2.0) / 4.0   # scale value mapped to [0, 1]
        amp = AMP_RANGE[0] + norm * (AMP_RANGE[1] - AMP_RANGE[0])
        arm = ARM_RANGE[0] + norm * (ARM_RANGE[1] - ARM_RANGE[0])
        amplitudes[word] = amp
        for vi, variant in enumerate(("steady", "ramp", "delayed")):
            clip_id = f"{word}_{variant}"
            phase = float(rng.uniform(0, 2 * np.pi))
            clip = _oscillating_clip(amp, arm, n_frames, phase, variant)
            clip_rel = f"clips/{clip_id}.json"
            save_clip(clip, out / clip_rel)
            fmt, writer = _CAPTION_WRITERS[(wi * 3 + vi) % len(_CAPTION_WRITERS)]
            cap_rel = f"captions/{clip_id}.{fmt}"
            (out / cap_rel).write_text(writer(word, 0.0, duration),
                                       encoding="utf-8")
            manifest.append({"id": clip_id, "clip": clip_rel,
                             "captions": cap_rel, "format": fmt})

    # Unannotated near-still baseline.
    baseline = _oscillating_clip(IDLE_AMP, 0.02, n_frames,
                                 float(rng.uniform(0, 2 * np.pi)), "steady")
    save_clip(baseline, out / "clips/baseline.json")
    (out / "captions/baseline.srt").write_text("", encoding="utf-8")
    manifest.append({"id": "baseline", "clip": "clips/baseline.json",
                     "captions": "captions/baseline.srt", "format": "srt"})

    meta = {
        "seed": seed,
        "n_frames": n_frames,
        "fps": FPS,
        "designated_scale": {
            "label": DESIGNATED_SCALE,
            "index": load_scale_registry().index_of(DESIGNATED_SCALE),
        },
        "scale_values": values,
        "amplitudes": amplitudes,
        "expected_speed_order": ordering,
        "high_word": ordering[0],
        "low_word": ordering[-1],
    }
    _dump_json(manifest, out / "manifest.json")
    _dump_json(meta, out / "fixture_meta.json")
    return meta


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
