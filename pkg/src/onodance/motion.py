"""Motion clips: 6D joint rotations + root translation over a skeleton.

Includes feature (de)vectorization for the model (D = 3 + 6*J per frame),
forward kinematics, lossless JSON clip I/O, BVH export and SVG stick-figure
rendering. Positions are meters, y up, front view along +z.
"""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datafiles import data_path
from .errors import DimensionMismatch, SchemaError


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int | None
    offset: tuple


class Skeleton:
    def __init__(self, joints):
        joints = tuple(joints)
        if not joints:
            raise ValueError("skeleton needs at least one joint")
        if joints[0].parent is not None:
            raise ValueError("joint 0 must be the root (parent null)")
        names = set()
        for i, j in enumerate(joints):
            if j.name in names:
                raise ValueError(f"duplicate joint name {j.name!r}")
            names.add(j.name)
            if i > 0 and (j.parent is None or not 0 <= j.parent < i):
                raise ValueError(
                    f"joint {i} ({j.name}) must have a parent index < {i}")
            if len(j.offset) != 3:
                raise ValueError(f"joint {j.name} offset must have 3 components")
        self.joints = joints
        self.offsets = np.array([j.offset for j in joints], dtype=np.float64)
        self.parents = [j.parent for j in joints]
        self._index = {j.name: i for i, j in enumerate(joints)}

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    def index_of(self, name: str) -> int:
        return self._index[name]

    def children_of(self, index: int):
        return [i for i, p in enumerate(self.parents) if p == index]

    def __eq__(self, other):
        return isinstance(other, Skeleton) and self.joints == other.joints

    def to_json(self) -> dict:
        return {"joints": [
            {"name": j.name, "parent": j.parent, "offset": [float(x) for x in j.offset]}
            for j in self.joints]}

    @staticmethod
    def from_json(doc: dict, pointer: str = "/skeleton") -> "Skeleton":
        if "joints" not in doc:
            raise SchemaError(pointer + "/joints", "missing")
        joints = []
        for i, entry in enumerate(doc["joints"]):
            jp = f"{pointer}/joints/{i}"
            for key in ("name", "parent", "offset"):
                if key not in entry:
                    raise SchemaError(f"{jp}/{key}", "missing")
            joints.append(Joint(name=str(entry["name"]),
                                parent=entry["parent"],
                                offset=tuple(float(x) for x in entry["offset"])))
        try:
            return Skeleton(joints)
        except ValueError as e:
            raise SchemaError(pointer + "/joints", str(e)) from e


@functools.lru_cache(maxsize=1)
def default_skeleton() -> Skeleton:
    doc = json.loads(data_path("skeleton24.json").read_text(encoding="utf-8"))
    return Skeleton.from_json(doc, pointer="")


def feature_dim(skeleton: Skeleton) -> int:
    return 3 + 6 * skeleton.n_joints


IDENTITY_6D = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


def rotation_6d_to_matrix(r6: np.ndarray) -> np.ndarray:
    """Gram-Schmidt decode of (..., 6) into rotation matrices (..., 3, 3).

    The two 3-vectors are the first two matrix columns; the third column is
    their cross product.
    """
    r6 = np.asarray(r6, dtype=np.float64)
    a1, a2 = r6[..., 0:3], r6[..., 3:6]
    b1 = a1 / (np.linalg.norm(a1, axis=-1, keepdims=True) + 1e-12)
    a2p = a2 - np.sum(b1 * a2, axis=-1, keepdims=True) * b1
    b2 = a2p / (np.linalg.norm(a2p, axis=-1, keepdims=True) + 1e-12)
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def matrix_to_rotation_6d(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    return np.concatenate([m[..., :, 0], m[..., :, 1]], axis=-1)


@dataclass
class MotionClip:
    fps: float
    skeleton: Skeleton
    root_translation: np.ndarray  # (n, 3) float32
    joint_rotations: np.ndarray   # (n, J, 6) float32

    def __post_init__(self):
        self.root_translation = np.ascontiguousarray(self.root_translation,
                                                     dtype=np.float32)
        self.joint_rotations = np.ascontiguousarray(self.joint_rotations,
                                                    dtype=np.float32)
        n, j = self.root_translation.shape[0], self.skeleton.n_joints
        if self.root_translation.shape != (n, 3):
            raise DimensionMismatch(
                f"root_translation must be (n, 3), got {self.root_translation.shape}")
        if self.joint_rotations.shape != (n, j, 6):
            raise DimensionMismatch(
                f"joint_rotations must be ({n}, {j}, 6), "
                f"got {self.joint_rotations.shape}")
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if not (np.all(np.isfinite(self.root_translation))
                and np.all(np.isfinite(self.joint_rotations))):
            raise ValueError("clip contains non-finite values")

    @property
    def n_frames(self) -> int:
        return self.root_translation.shape[0]


def rest_clip(skeleton: Skeleton, n_frames: int, fps: float = 60.0) -> MotionClip:
    """Identity rotations, zero root translation."""
    rot = np.tile(IDENTITY_6D.astype(np.float32), (n_frames, skeleton.n_joints, 1))
    return MotionClip(fps=fps, skeleton=skeleton,
                      root_translation=np.zeros((n_frames, 3), dtype=np.float32),
                      joint_rotations=rot)


def to_features(clip: MotionClip) -> np.ndarray:
    """(n, 3 + 6J) feature matrix: root translation then per-joint 6D."""
    n = clip.n_frames
    flat = clip.joint_rotations.reshape(n, -1)
    return np.concatenate([clip.root_translation, flat], axis=1)


def from_features(mat: np.ndarray, skeleton: Skeleton, fps: float) -> MotionClip:
    mat = np.asarray(mat, dtype=np.float32)
    d = feature_dim(skeleton)
    if mat.ndim != 2 or mat.shape[1] != d:
        raise DimensionMismatch(
            f"features must be (n, {d}) for a {skeleton.n_joints}-joint "
            f"skeleton, got {mat.shape}")
    n = mat.shape[0]
    return MotionClip(
        fps=fps, skeleton=skeleton,
        root_translation=mat[:, :3],
        joint_rotations=mat[:, 3:].reshape(n, skeleton.n_joints, 6))


def fk_positions(clip: MotionClip) -> np.ndarray:
    """World joint positions (n, J, 3): child = parent + parent_rot @ offset."""
    n, j = clip.n_frames, clip.skeleton.n_joints
    rot_local = rotation_6d_to_matrix(clip.joint_rotations)  # (n, J, 3, 3)
    pos = np.empty((n, j, 3), dtype=np.float64)
    rot_world = np.empty((n, j, 3, 3), dtype=np.float64)
    pos[:, 0] = clip.root_translation.astype(np.float64)
    rot_world[:, 0] = rot_local[:, 0]
    offsets = clip.skeleton.offsets
    for child in range(1, j):
        parent = clip.skeleton.parents[child]
        pos[:, child] = pos[:, parent] + np.einsum(
            "nab,b->na", rot_world[:, parent], offsets[child])
        rot_world[:, child] = rot_world[:, parent] @ rot_local[:, child]
    return pos


# --- clip JSON I/O ---------------------------------------------------------

def _require(doc: dict, key: str, pointer: str):
    if key not in doc:
        raise SchemaError(f"{pointer}/{key}", "missing")
    return doc[key]


def clip_to_json(clip: MotionClip) -> dict:
    return {
        "fps": float(clip.fps),
        "skeleton": clip.skeleton.to_json(),
        "root_translation": [[float(x) for x in row]
                             for row in clip.root_translation],
        "joint_rotations": [[[float(x) for x in rot] for rot in frame]
                            for frame in clip.joint_rotations],
    }


def clip_from_json(doc: dict) -> MotionClip:
    fps = _require(doc, "fps", "")
    if not isinstance(fps, (int, float)) or fps <= 0:
        raise SchemaError("/fps", f"must be a positive number, got {fps!r}")
    skeleton = Skeleton.from_json(_require(doc, "skeleton", ""))
    try:
        trans = np.asarray(_require(doc, "root_translation", ""), dtype=np.float32)
        rots = np.asarray(_require(doc, "joint_rotations", ""), dtype=np.float32)
    except (TypeError, ValueError) as e:
        raise SchemaError("/root_translation", f"not numeric arrays: {e}") from e
    if trans.ndim != 2 or trans.shape[1] != 3:
        raise SchemaError("/root_translation", f"must be n x 3, got {trans.shape}")
    if rots.ndim != 3 or rots.shape[2] != 6 or rots.shape[1] != skeleton.n_joints:
        raise SchemaError("/joint_rotations",
                          f"must be n x {skeleton.n_joints} x 6, got {rots.shape}")
    if rots.shape[0] != trans.shape[0]:
        raise SchemaError("/joint_rotations",
                          "frame count differs from root_translation")
    try:
        return MotionClip(fps=float(fps), skeleton=skeleton,
                          root_translation=trans, joint_rotations=rots)
    except (DimensionMismatch, ValueError) as e:
        raise SchemaError("", str(e)) from e


def save_clip(clip: MotionClip, path: Path) -> None:
    text = json.dumps(clip_to_json(clip), sort_keys=True,
                      separators=(",", ":")) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_clip(path: Path) -> MotionClip:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError("", f"invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise SchemaError("", "clip document must be a JSON object")
    return clip_from_json(doc)


# --- BVH export ------------------------------------------------------------

_BVH_CHANNEL_ORDER = "ZXY"


def _euler_deg(rot6: np.ndarray) -> np.ndarray:
    from scipy.spatial.transform import Rotation

    mats = rotation_6d_to_matrix(rot6.reshape(-1, 6))
    return Rotation.from_matrix(mats).as_euler(_BVH_CHANNEL_ORDER, degrees=True)


def export_bvh(clip: MotionClip, path: Path) -> None:
    sk = clip.skeleton
    lines = ["HIERARCHY"]

    def emit(joint: int, depth: int):
        pad = "  " * depth
        j = sk.joints[joint]
        ox, oy, oz = (float(x) for x in j.offset)
        if joint == 0:
            lines.append(f"{pad}ROOT {j.name}")
            channels = ("CHANNELS 6 Xposition Yposition Zposition "
                        "Zrotation Xrotation Yrotation")
        else:
            lines.append(f"{pad}JOINT {j.name}")
            channels = "CHANNELS 3 Zrotation Xrotation Yrotation"
        lines.append(pad + "{")
        lines.append(f"{pad}  OFFSET {ox:.6f} {oy:.6f} {oz:.6f}")
        lines.append(f"{pad}  {channels}")
        children = sk.children_of(joint)
        if children:
            for c in children:
                emit(c, depth + 1)
        else:
            lines.append(f"{pad}  End Site")
            lines.append(f"{pad}  {{")
            lines.append(f"{pad}    OFFSET 0.000000 0.000000 0.000000")
            lines.append(f"{pad}  }}")
        lines.append(pad + "}")

    emit(0, 0)
    n = clip.n_frames
    lines.append("MOTION")
    lines.append(f"Frames: {n}")
    lines.append(f"Frame Time: {1.0 / clip.fps:.8f}")

    eulers = _euler_deg(clip.joint_rotations).reshape(n, sk.n_joints, 3)
    for f in range(n):
        vals = list(clip.root_translation[f].astype(np.float64))
        for j in range(sk.n_joints):
            vals.extend(eulers[f, j])
        lines.append(" ".join(f"{v:.6f}" for v in vals))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- SVG stick-figure rendering --------------------------------------------

_SVG_EXTENT = 1.5  # world half-width of the fixed canvas
_SVG_SIZE = 480


def render_frame_svg(positions: np.ndarray, skeleton: Skeleton) -> str:
    """One orthographic front-view (x right, y up) stick figure."""
    e = _SVG_EXTENT
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_SIZE}" '
        f'height="{_SVG_SIZE}" viewBox="{-e} {-e} {2 * e} {2 * e}">',
        f'<rect x="{-e}" y="{-e}" width="{2 * e}" height="{2 * e}" fill="white"/>',
    ]
    for child in range(1, skeleton.n_joints):
        parent = skeleton.parents[child]
        x1, y1 = positions[parent, 0], -positions[parent, 1]
        x2, y2 = positions[child, 0], -positions[child, 1]
        parts.append(f'<line x1="{x1:.4f}" y1="{y1:.4f}" x2="{x2:.4f}" '
                     f'y2="{y2:.4f}" stroke="black" stroke-width="0.02"/>')
    for j in range(skeleton.n_joints):
        parts.append(f'<circle cx="{positions[j, 0]:.4f}" '
                     f'cy="{-positions[j, 1]:.4f}" r="0.025" fill="crimson"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_frames(clip: MotionClip, out_dir: Path, stride: int = 10) -> list:
    """Write one SVG per stride-th frame; returns the written paths."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    positions = fk_positions(clip)
    written = []
    for f in range(0, clip.n_frames, stride):
        p = out / f"frame_{f:06d}.svg"
        p.write_text(render_frame_svg(positions[f], clip.skeleton),
                     encoding="utf-8")
        written.append(p)
    return written
