"""Quantitative evaluation: kinetic and geometric motion features, Fréchet
distance between feature distributions, and pairwise diversity.

Kinetic features are per-joint, per-axis mean squared velocities from forward
kinematics (m^2/s^2, so they are invariant to the sampling rate of the same
trajectory). Geometric features average boolean pose predicates (shipped in a
versioned data file) over frames.
"""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field

import numpy as np

from .datafiles import data_path
from .errors import KindMismatch, TooFewSamples, TooShort
from .motion import MotionClip, fk_positions

_FID_JITTER = 1e-6


@dataclass
class FeatureSet:
    kind: str                 # "kinetic" | "geometric"
    matrix: np.ndarray        # (m, F) float64

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("feature matrix contains non-finite values")


def kinetic_features(clip: MotionClip) -> np.ndarray:
    """(3J,) mean squared per-axis joint velocity over the clip."""
    if clip.n_frames < 2:
        raise TooShort("kinetic features need at least 2 frames")
    pos = fk_positions(clip)                       # (n, J, 3)
    vel = np.diff(pos, axis=0) * clip.fps          # m/s
    return np.mean(vel * vel, axis=0).reshape(-1)


@dataclass(frozen=True)
class PosePredicate:
    name: str
    kind: str
    a: str
    b: str | None
    axis: int
    threshold: float


@functools.lru_cache(maxsize=1)
def load_predicates() -> tuple:
    doc = json.loads(data_path("pose_predicates.json").read_text(encoding="utf-8"))
    preds = []
    for entry in doc["predicates"]:
        preds.append(PosePredicate(
            name=entry["name"], kind=entry["kind"], a=entry["a"],
            b=entry.get("b"), axis=int(entry.get("axis", 0)),
            threshold=float(entry["threshold"])))
    return str(doc["version"]), tuple(preds)


def _eval_predicate(pred: PosePredicate, pos: np.ndarray, index_of) -> np.ndarray:
    pa = pos[:, index_of(pred.a)]
    pb = pos[:, index_of(pred.b)] if pred.b is not None else None
    if pred.kind == "diff":
        return pa[:, pred.axis] - pb[:, pred.axis] > pred.threshold
    if pred.kind == "coord":
        return pa[:, pred.axis] > pred.threshold
    if pred.kind == "coord_lt":
        return pa[:, pred.axis] < pred.threshold
    if pred.kind == "dist_lt":
        return np.linalg.norm(pa - pb, axis=1) < pred.threshold
    if pred.kind == "dist_gt":
        return np.linalg.norm(pa - pb, axis=1) > pred.threshold
    if pred.kind == "absdiff_gt":
        return np.abs(pa[:, pred.axis] - pb[:, pred.axis]) > pred.threshold
    if pred.kind == "abscoord_gt":
        return np.abs(pa[:, pred.axis]) > pred.threshold
    raise ValueError(f"unknown predicate kind {pred.kind!r}")


def geometric_features(clip: MotionClip) -> np.ndarray:
    """(P,) per-predicate truth frequency over frames, each in [0, 1]."""
    _, preds = load_predicates()
    pos = fk_positions(clip)
    out = np.empty(len(preds), dtype=np.float64)
    for i, pred in enumerate(preds):
        out[i] = float(np.mean(_eval_predicate(pred, pos, clip.skeleton.index_of)))
    return out


def feature_set(clips, kind: str) -> FeatureSet:
    extract = {"kinetic": kinetic_features, "geometric": geometric_features}[kind]
    rows = [extract(c) for c in clips]   # input order preserved
    return FeatureSet(kind=kind, matrix=np.stack(rows))


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh(mat)
    w = np.clip(w, 0.0, None)
    return (q * np.sqrt(w)) @ q.T


def fid(a: FeatureSet, b: FeatureSet) -> float:
    """||mu_a - mu_b||^2 + Tr(Ca + Cb - 2 (Ca Cb)^(1/2)), clamped at 0.

    Covariances use 1/(m-1); a 1e-6 diagonal jitter is added before the
    matrix square root, which is computed by symmetric eigendecomposition of
    Ca^(1/2) Cb Ca^(1/2).
    """
    if a.kind != b.kind:
        raise KindMismatch(f"cannot mix {a.kind!r} and {b.kind!r} features")
    if a.matrix.shape[1] != b.matrix.shape[1]:
        raise KindMismatch(
            f"feature dims differ: {a.matrix.shape[1]} vs {b.matrix.shape[1]}")
    if a.matrix.shape[0] < 2 or b.matrix.shape[0] < 2:
        raise TooFewSamples("fid needs at least 2 rows per set")
    f = a.matrix.shape[1]
    mu_a = a.matrix.mean(axis=0)
    mu_b = b.matrix.mean(axis=0)
    jitter = _FID_JITTER * np.eye(f)
    cov_a = np.atleast_2d(np.cov(a.matrix, rowvar=False, ddof=1)) + jitter
    cov_b = np.atleast_2d(np.cov(b.matrix, rowvar=False, ddof=1)) + jitter

    root_a = _sqrtm_psd(cov_a)
    inner = root_a @ cov_b @ root_a
    inner = (inner + inner.T) / 2.0
    eigs = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    trace_sqrt = float(np.sum(np.sqrt(eigs)))

    diff = mu_a - mu_b
    value = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b)
                  - 2.0 * trace_sqrt)
    return max(value, 0.0)


def diversity(a: FeatureSet) -> float:
    """Mean Euclidean distance over all unordered row pairs."""
    m = a.matrix.shape[0]
    if m < 2:
        raise TooFewSamples("diversity needs at least 2 rows")
    total = 0.0
    for i in range(m - 1):
        total += float(np.sum(np.linalg.norm(a.matrix[i + 1:] - a.matrix[i],
                                             axis=1)))
    return total / (m * (m - 1) / 2)


@dataclass
class EvalReport:
    fid_k: float
    fid_g: float
    dist_k: float
    dist_g: float
    m_generated: int
    m_reference: int
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "fid_k": self.fid_k, "fid_g": self.fid_g,
            "dist_k": self.dist_k, "dist_g": self.dist_g,
            "m_generated": self.m_generated, "m_reference": self.m_reference,
            "config": self.config,
        }


def evaluate(generated, reference) -> EvalReport:
    """All four scores; diversity uses the generated set only."""
    if len(generated) < 2 or len(reference) < 2:
        raise TooFewSamples("evaluate needs at least 2 clips per set")
    gen_k = feature_set(generated, "kinetic")
    ref_k = feature_set(reference, "kinetic")
    gen_g = feature_set(generated, "geometric")
    ref_g = feature_set(reference, "geometric")
    pred_version, preds = load_predicates()
    return EvalReport(
        fid_k=fid(gen_k, ref_k),
        fid_g=fid(gen_g, ref_g),
        dist_k=diversity(gen_k),
        dist_g=diversity(gen_g),
        m_generated=len(generated),
        m_reference=len(reference),
        config={
            "kinetic_dim": gen_k.matrix.shape[1],
            "geometric_predicates": len(preds),
            "predicate_version": pred_version,
            "covariance_jitter": _FID_JITTER,
        },
    )
