import filecmp
import json

from onodance.fixtures import MIN_SPREAD, scale_values, write_fixtures


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestFixtures:
    def test_deterministic_byte_identical(self, tmp_path):
        meta1 = write_fixtures(tmp_path / "a", seed=7)
        meta2 = write_fixtures(tmp_path / "b", seed=7)
        assert meta1 == meta2
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")

    def test_seed_changes_content(self, tmp_path):
        write_fixtures(tmp_path / "a", seed=7)
        write_fixtures(tmp_path / "b", seed=8)
        assert tree_bytes(tmp_path / "a") != tree_bytes(tmp_path / "b")

    def test_designated_scale_spread(self):
        values = scale_values()
        assert max(values.values()) - min(values.values()) >= MIN_SPREAD

    def test_meta_ordering_matches_values(self, fixture_dir):
        meta = json.loads((fixture_dir / "fixture_meta.json").read_text())
        values = meta["scale_values"]
        order = meta["expected_speed_order"]
        assert order == sorted(values, key=values.__getitem__, reverse=True)
        assert meta["high_word"] == order[0]
        assert meta["low_word"] == order[-1]
        amps = meta["amplitudes"]
        assert amps[meta["high_word"]] > amps[meta["low_word"]]

    def test_manifest_contents(self, fixture_dir):
        manifest = json.loads((fixture_dir / "manifest.json").read_text())
        assert len(manifest) == 13  # 4 words x 3 variants + baseline
        for entry in manifest:
            assert (fixture_dir / entry["clip"]).is_file()
            assert (fixture_dir / entry["captions"]).is_file()
            assert entry["format"] in ("srt", "sbv", "csv")
        formats = {e["format"] for e in manifest}
        assert formats == {"srt", "sbv", "csv"}
