import json

import numpy as np
import pytest

from onodance.cli import main
from onodance.motion import feature_dim


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    assert code == 0, err
    return json.loads(out)


class TestParseEmbed:
    def test_parse_prints_json(self, capsys):
        code, out, _ = run(capsys, "parse", "kurukuru")
        assert code == 0
        doc = json.loads(out)
        assert doc["reduplicated"] is True
        assert len(doc["morae"]) == 4

    def test_parse_error_exit_2(self, capsys):
        code, out, err = run(capsys, "parse", "")
        assert code == 2
        assert "error" in err

    def test_embed_labeled_values(self, capsys):
        code, out, _ = run(capsys, "embed", "kurukuru")
        assert code == 0
        assert len(out.strip().splitlines()) == 43
        assert "light-heavy" in out

    def test_embed_json_schema(self, capsys):
        doc = run_json(capsys, "embed", "goro")
        assert len(doc["values"]) == 43
        assert len(doc["labels"]) == 43
        assert doc["table_version"] == "rules-v1"

    def test_embed_with_dictionary(self, capsys, tmp_path):
        words = tmp_path / "words.txt"
        words.write_text("goro\nkurukuru\n")
        dict_path = tmp_path / "dict.json"
        doc = run_json(capsys, "dict-build", "--words", str(words),
                       "--out", str(dict_path))
        assert doc["entries"] == 2
        doc = run_json(capsys, "embed", "goro", "--dict", str(dict_path))
        assert len(doc["values"]) == 43


class TestCondition:
    def test_writes_binary(self, capsys, tmp_path):
        cap = tmp_path / "c.srt"
        cap.write_text("1\n00:00:02,000 --> 00:00:04,000\nkurukuru\n")
        out_path = tmp_path / "c.onoc"
        doc = run_json(capsys, "condition", "--captions", str(cap),
                       "--frames", "600", "--out", str(out_path))
        assert doc["n_frames"] == 600
        assert doc["filled_frames"] == 120
        blob = out_path.read_bytes()
        assert blob[:4] == b"ONOC"
        assert len(blob) == 16 + 600 * 43 * 4

    def test_missing_captions_exit_2(self, capsys, tmp_path):
        code, _, err = run(capsys, "condition", "--captions",
                           str(tmp_path / "missing.srt"),
                           "--frames", "10", "--out", str(tmp_path / "x"))
        assert code == 2
        assert "missing.srt" in err


class TestUsageErrors:
    def test_unknown_flag_exit_1(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["parse", "--bogus", "x"])
        assert info.value.code == 1

    def test_unknown_command_exit_1(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["frobnicate"])
        assert info.value.code == 1

    def test_no_command_exit_1(self, capsys):
        assert main([]) == 1


class TestFixturesCommand:
    def test_deterministic_trees(self, capsys, tmp_path):
        run_json(capsys, "fixtures", "--out", str(tmp_path / "a"),
                 "--seed", "7")
        run_json(capsys, "fixtures", "--out", str(tmp_path / "b"),
                 "--seed", "7")
        a = {p.relative_to(tmp_path / "a").as_posix(): p.read_bytes()
             for p in sorted((tmp_path / "a").rglob("*")) if p.is_file()}
        b = {p.relative_to(tmp_path / "b").as_posix(): p.read_bytes()
             for p in sorted((tmp_path / "b").rglob("*")) if p.is_file()}
        assert a == b


@pytest.fixture(scope="module")
def train_dir(tmp_path_factory, fixture_dir, skeleton):
    out = tmp_path_factory.mktemp("cli_train")
    cfg = {
        "model": {"motion_dim": feature_dim(skeleton), "hidden_dim": 16,
                  "motion_layers": 1, "cond_layers": 1, "cross_layers": 1,
                  "heads": 2, "init_seed": 0},
        "learning_rate": 1e-3, "batch_size": 1, "total_steps": 4,
        "window_stride": 120, "seed": 1,
    }
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    return out, cfg_path


class TestTrainGenerateEval:
    def test_train_writes_outputs(self, capsys, fixture_dir, train_dir):
        out, cfg_path = train_dir
        doc = run_json(capsys, "train",
                       "--manifest", str(fixture_dir / "manifest.json"),
                       "--config", str(cfg_path), "--out", str(out / "run"))
        assert doc["steps"] == 4
        assert (out / "run" / "checkpoint_final.onof").is_file()
        assert (out / "run" / "metrics.csv").read_text() \
            .startswith("step,loss,wall_ms")
        assert (out / "run" / "loss_curve.png").stat().st_size > 0

    def test_model_info(self, capsys, small_checkpoint):
        doc = run_json(capsys, "model-info", "--checkpoint",
                       str(small_checkpoint))
        assert doc["config"]["cond_dim"] == 43
        assert doc["parameters"] > 0

    def test_generate_word_and_render(self, capsys, small_checkpoint,
                                      tmp_path):
        out_clip = tmp_path / "gen.json"
        doc = run_json(capsys, "generate",
                       "--checkpoint", str(small_checkpoint),
                       "--word", "pikipiki", "--from", "0", "--to", "2",
                       "--frames", "30", "--out", str(out_clip),
                       "--render", str(tmp_path / "svg"), "--stride", "15")
        assert doc["frames"] == 30
        assert doc["svg_count"] == 2
        assert out_clip.is_file()

    def test_generate_from_captions(self, capsys, small_checkpoint,
                                    fixture_dir, tmp_path):
        out_clip = tmp_path / "gen2.json"
        doc = run_json(capsys, "generate",
                       "--checkpoint", str(small_checkpoint),
                       "--captions", str(fixture_dir /
                                         "captions/pikipiki_steady.srt"),
                       "--frames", "10", "--out", str(out_clip))
        assert doc["frames"] == 10
        assert doc["words"] == ["pikipiki"]

    def test_generate_seed_clip(self, capsys, small_checkpoint, fixture_dir,
                                tmp_path):
        doc = run_json(capsys, "generate",
                       "--checkpoint", str(small_checkpoint),
                       "--word", "goro", "--from", "0", "--to", "1",
                       "--frames", "5",
                       "--seed-clip", str(fixture_dir /
                                          "clips/pikipiki_steady.json"),
                       "--out", str(tmp_path / "gen3.json"))
        assert doc["frames"] == 5

    def test_eval_reports(self, capsys, fixture_dir, tmp_path):
        gen = tmp_path / "gen"
        ref = tmp_path / "ref"
        gen.mkdir()
        ref.mkdir()
        for name in ("pikipiki_steady", "noonoo_steady"):
            data = (fixture_dir / f"clips/{name}.json").read_bytes()
            (gen / f"{name}.json").write_bytes(data)
            (ref / f"{name}.json").write_bytes(data)
        report_path = tmp_path / "report.json"
        doc = run_json(capsys, "eval", "--generated", str(gen),
                       "--reference", str(ref), "--out", str(report_path))
        assert doc["fid_k"] < 1e-6
        assert report_path.is_file()
        assert (tmp_path / "report.csv").read_text().startswith("metric,value")
        assert (tmp_path / "report.png").stat().st_size > 0

    def test_render_and_export(self, capsys, fixture_dir, tmp_path):
        clip = fixture_dir / "clips/baseline.json"
        doc = run_json(capsys, "render", "--clip", str(clip),
                       "--out", str(tmp_path / "svg"), "--stride", "100")
        assert doc["svg_count"] == 6
        doc = run_json(capsys, "export-bvh", "--clip", str(clip),
                       "--out", str(tmp_path / "out.bvh"))
        assert doc["joints"] == 24
        text = (tmp_path / "out.bvh").read_text()
        assert text.startswith("HIERARCHY")
        assert "Frames: 600" in text

    def test_corrupt_checkpoint_exit_2(self, capsys, small_checkpoint,
                                       tmp_path):
        bad = tmp_path / "bad.onof"
        blob = bytearray(small_checkpoint.read_bytes())
        blob[50] ^= 0xFF
        bad.write_bytes(bytes(blob))
        code, _, err = run(capsys, "model-info", "--checkpoint", str(bad))
        assert code == 2
        assert "CRC" in err or "checksum" in err.lower()
