import json

import numpy as np
import pytest

from helpers import chain_skeleton, random_clip

from onodance.errors import DimensionMismatch, SchemaError
from onodance.motion import (
    MotionClip,
    clip_from_json,
    clip_to_json,
    default_skeleton,
    export_bvh,
    feature_dim,
    fk_positions,
    from_features,
    load_clip,
    matrix_to_rotation_6d,
    render_frames,
    rest_clip,
    rotation_6d_to_matrix,
    save_clip,
    to_features,
)


class TestFeatures:
    def test_dimension_formula(self, skeleton):
        assert skeleton.n_joints == 24
        assert feature_dim(skeleton) == 3 + 6 * 24 == 147

    def test_round_trip_bitwise(self, skeleton):
        rng = np.random.default_rng(0)
        clip = random_clip(rng, skeleton, 17)
        back = from_features(to_features(clip), skeleton, clip.fps)
        assert np.array_equal(back.root_translation, clip.root_translation)
        assert np.array_equal(back.joint_rotations, clip.joint_rotations)

    def test_wrong_dim_raises(self, skeleton):
        with pytest.raises(DimensionMismatch):
            from_features(np.zeros((5, 146), dtype=np.float32), skeleton, 60.0)


class TestRotation6d:
    def test_identity(self):
        m = rotation_6d_to_matrix(np.array([1, 0, 0, 0, 1, 0], dtype=float))
        assert np.allclose(m, np.eye(3), atol=1e-12)

    def test_orthonormal_det_one(self):
        rng = np.random.default_rng(1)
        r6 = rng.standard_normal((500, 6))
        mats = rotation_6d_to_matrix(r6)
        eye = np.einsum("nij,nkj->nik", mats, mats)
        assert np.max(np.abs(eye - np.eye(3))) < 1e-6
        assert np.max(np.abs(np.linalg.det(mats) - 1.0)) < 1e-6

    def test_matrix_round_trip(self):
        rng = np.random.default_rng(2)
        mats = rotation_6d_to_matrix(rng.standard_normal((50, 6)))
        again = rotation_6d_to_matrix(matrix_to_rotation_6d(mats))
        assert np.allclose(mats, again, atol=1e-9)


class TestForwardKinematics:
    def test_identity_cumulative_offsets(self, skeleton):
        clip = rest_clip(skeleton, 3)
        pos = fk_positions(clip)
        expected = np.zeros((skeleton.n_joints, 3))
        for i in range(1, skeleton.n_joints):
            expected[i] = expected[skeleton.parents[i]] + skeleton.offsets[i]
        assert np.allclose(pos[0], expected, atol=1e-12)
        assert np.allclose(pos[2], expected, atol=1e-12)

    def test_translation_equivariance(self, skeleton):
        rng = np.random.default_rng(3)
        clip = random_clip(rng, skeleton, 4)
        base = fk_positions(clip)
        shift = np.array([0.3, -1.2, 2.5], dtype=np.float32)
        moved = MotionClip(fps=clip.fps, skeleton=skeleton,
                           root_translation=clip.root_translation + shift,
                           joint_rotations=clip.joint_rotations)
        assert np.allclose(fk_positions(moved), base + shift.astype(np.float64),
                           atol=1e-5)

    def test_hand_computed_rotation(self):
        # Two-joint chain, offset (1,0,0); rotate root 90 degrees about z:
        # the child lands at (0,1,0).
        sk = chain_skeleton(2)
        rot = np.tile(np.array([1, 0, 0, 0, 1, 0], dtype=np.float32), (1, 2, 1))
        rot[0, 0] = np.array([0, 1, 0, -1, 0, 0], dtype=np.float32)  # Rz(90)
        clip = MotionClip(fps=60.0, skeleton=sk,
                          root_translation=np.zeros((1, 3), dtype=np.float32),
                          joint_rotations=rot)
        pos = fk_positions(clip)
        assert np.allclose(pos[0, 1], [0.0, 1.0, 0.0], atol=1e-6)


class TestClipJson:
    def test_round_trip_bitwise(self, skeleton, tmp_path):
        rng = np.random.default_rng(4)
        clip = random_clip(rng, skeleton, 9)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_clip(clip, p1)
        loaded = load_clip(p1)
        save_clip(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert np.array_equal(loaded.root_translation, clip.root_translation)
        assert np.array_equal(loaded.joint_rotations, clip.joint_rotations)

    def test_missing_fps(self, skeleton):
        doc = clip_to_json(rest_clip(skeleton, 2))
        del doc["fps"]
        with pytest.raises(SchemaError) as info:
            clip_from_json(doc)
        assert info.value.pointer == "/fps"

    def test_nonpositive_fps(self, skeleton):
        doc = clip_to_json(rest_clip(skeleton, 2))
        doc["fps"] = 0
        with pytest.raises(SchemaError) as info:
            clip_from_json(doc)
        assert info.value.pointer == "/fps"

    def test_bad_rotation_shape(self, skeleton):
        doc = clip_to_json(rest_clip(skeleton, 2))
        doc["joint_rotations"] = [[[0.0] * 5] * 24] * 2
        with pytest.raises(SchemaError):
            clip_from_json(doc)


def parse_bvh(text: str):
    """Minimal reader: joint names and frame count."""
    joints = [line.split()[1] for line in text.splitlines()
              if line.strip().startswith(("ROOT", "JOINT"))]
    frames = next(int(line.split()[1]) for line in text.splitlines()
                  if line.startswith("Frames:"))
    motion_lines = text.split("Frame Time:")[1].splitlines()[1:]
    rows = [line for line in motion_lines if line.strip()]
    return joints, frames, rows


class TestBvh:
    def test_export_parse_back(self, skeleton, tmp_path):
        rng = np.random.default_rng(5)
        clip = random_clip(rng, skeleton, 11)
        p = tmp_path / "out.bvh"
        export_bvh(clip, p)
        joints, frames, rows = parse_bvh(p.read_text())
        assert len(joints) == skeleton.n_joints
        assert frames == 11 and len(rows) == 11
        # root gets 6 channels, every other joint 3
        assert len(rows[0].split()) == 6 + 3 * (skeleton.n_joints - 1)


class TestRender:
    def test_stride_count(self, skeleton, tmp_path):
        clip = rest_clip(skeleton, 600)
        written = render_frames(clip, tmp_path / "svg", stride=10)
        assert len(written) == 60
        text = written[0].read_text()
        assert text.startswith("<svg")
        assert text.count("<line") == skeleton.n_joints - 1
