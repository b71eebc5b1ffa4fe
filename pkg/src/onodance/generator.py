"""Autoregressive inference: extend a seed motion frame by frame.

Every step runs the model on the trailing seed-length window of the history
and the conditioning window starting at the same timeline frame, keeps only
the first predicted frame, and slides one frame forward. The output clip
holds exactly the requested number of generated frames (the seed is not
included).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch
from .factmodel import FactModel, forward, load_checkpoint
from .motion import (
    IDENTITY_6D,
    MotionClip,
    Skeleton,
    feature_dim,
    from_features,
)
from .timeline import ConditioningSequence, window

GENERATE_FPS = 60.0


@dataclass
class GenerationRequest:
    condition: ConditioningSequence
    n_frames: int                       # T, generated frame count
    checkpoint: Path | None = None      # alternative: pass model= to generate()
    seed_motion: np.ndarray | None = None  # (seed_len, D); None = rest pose
    rng_seed: int = 0                   # reserved; inference is deterministic

    def __post_init__(self):
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")


def rest_pose_seed(skeleton: Skeleton, d: int, seed_len: int = 120) -> np.ndarray:
    """seed_len identical frames: identity rotations, zero root translation."""
    expected = feature_dim(skeleton)
    if d != expected:
        raise DimensionMismatch(
            f"feature dim {d} does not match skeleton ({expected})")
    frame = np.concatenate([
        np.zeros(3, dtype=np.float32),
        np.tile(IDENTITY_6D.astype(np.float32), skeleton.n_joints),
    ])
    return np.tile(frame, (seed_len, 1))


def generate(request: GenerationRequest, model: FactModel | None = None,
             skeleton: Skeleton | None = None) -> MotionClip:
    """Run keep-first autoregressive generation; returns a T-frame clip."""
    if model is None:
        if request.checkpoint is None:
            raise ValueError("need either a model or a checkpoint path")
        model = load_checkpoint(request.checkpoint)
    cfg = model.config
    if skeleton is None:
        from .motion import default_skeleton
        skeleton = default_skeleton()
    if feature_dim(skeleton) != cfg.motion_dim:
        raise DimensionMismatch(
            f"model motion dim {cfg.motion_dim} does not match skeleton "
            f"feature dim {feature_dim(skeleton)}")

    if request.seed_motion is None:
        seed = rest_pose_seed(skeleton, cfg.motion_dim, cfg.seed_len)
    else:
        seed = np.ascontiguousarray(request.seed_motion, dtype=np.float32)
        if seed.shape != (cfg.seed_len, cfg.motion_dim):
            raise DimensionMismatch(
                f"seed motion must be ({cfg.seed_len}, {cfg.motion_dim}), "
                f"got {seed.shape}")

    t_total = request.n_frames
    history = np.empty((cfg.seed_len + t_total, cfg.motion_dim), dtype=np.float32)
    history[:cfg.seed_len] = seed
    for t in range(t_total):
        seed_win = history[t:t + cfg.seed_len]
        cond_win = window(request.condition, t, cfg.cond_len)
        pred = forward(model, seed_win, cond_win, train_flag=False)
        history[cfg.seed_len + t] = pred[0]
    return from_features(history[cfg.seed_len:], skeleton, fps=GENERATE_FPS)
