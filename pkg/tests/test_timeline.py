import logging

import numpy as np
import pytest

from onodance.errors import DecodeError, MalformedTimestamp, NegativeStart
from onodance.phonology import parse
from onodance.symbolism import quantify
from onodance.timeline import (
    ConditioningSequence,
    TimedAnnotation,
    build_sequence,
    load_conditioning,
    parse_captions,
    save_conditioning,
    window,
)

SRT = """1
00:00:02,000 --> 00:00:04,000
kurukuru

2
00:00:05,500 --> 00:00:06,000
goro
"""

SBV = """0:00:02.000,0:00:04.000
kurukuru

0:00:05.500,0:00:06.000
goro
"""

CSV = """word,start_s,end_s
kurukuru,2.0,4.0
goro,5.5,6.0
"""


class TestParseCaptions:
    @pytest.mark.parametrize("text,fmt", [(SRT, "srt"), (SBV, "sbv"),
                                          (CSV, "csv")])
    def test_hand_parsed_cues(self, text, fmt):
        doc = parse_captions(text.encode(), fmt)
        assert [(a.word, a.start_s, a.end_s) for a in doc.annotations] == \
            [("kurukuru", 2.0, 4.0), ("goro", 5.5, 6.0)]

    def test_empty_file(self):
        assert parse_captions(b"", "srt").annotations == []

    def test_malformed_timestamp_line_number(self):
        bad = "1\n00:00:0X,000 --> 00:00:04,000\nkuru\n"
        with pytest.raises(MalformedTimestamp) as info:
            parse_captions(bad.encode(), "srt")
        assert info.value.line_no == 2

    def test_multiword_cue_collapses(self):
        srt = "1\n00:00:00,000 --> 00:00:01,000\nkuru kuru\n"
        doc = parse_captions(srt.encode(), "srt")
        assert doc.annotations[0].word == "kurukuru"

    def test_empty_cue_counted(self):
        srt = ("1\n00:00:00,000 --> 00:00:01,000\n\n\n"
               "2\n00:00:02,000 --> 00:00:03,000\ngoro\n")
        doc = parse_captions(srt.encode(), "srt")
        assert doc.empty_cues == 1
        assert len(doc.annotations) == 1

    def test_sorted_by_start(self):
        csv = "word,start_s,end_s\nb,5.0,6.0\na,1.0,2.0\n"
        doc = parse_captions(csv.encode(), "csv")
        assert [a.word for a in doc.annotations] == ["a", "b"]

    def test_decode_error(self):
        with pytest.raises(DecodeError):
            parse_captions(b"\xff\xfe\x00bad", "srt")

    def test_csv_header_required(self):
        with pytest.raises(MalformedTimestamp):
            parse_captions(b"kuru,1,2\n", "csv")

    def test_invalid_annotation_times(self):
        with pytest.raises(ValueError):
            TimedAnnotation("x", 2.0, 2.0)
        with pytest.raises(ValueError):
            TimedAnnotation("x", -1.0, 2.0)


class TestBuildSequence:
    def test_paper_worked_example(self, table, empty_dictionary):
        # kuru-kuru over 2.0-4.0 s at 60 fps fills rows [120, 240).
        seq = build_sequence([TimedAnnotation("kurukuru", 2.0, 4.0)],
                             n_frames=600, fps=60.0,
                             dictionary=empty_dictionary, table=table)
        vec = quantify(parse("kurukuru"), table).astype(np.float32)
        assert seq.frames.shape == (600, 43)
        assert np.array_equal(seq.frames[120:240],
                              np.tile(vec, (120, 1)))
        assert not seq.frames[:120].any()
        assert not seq.frames[240:].any()

    def test_no_annotations_all_zero(self, table, empty_dictionary):
        seq = build_sequence([], n_frames=600, fps=60.0,
                             dictionary=empty_dictionary, table=table)
        assert seq.frames.shape == (600, 43)
        assert not seq.frames.any()

    def test_clipping_past_end(self, table, empty_dictionary):
        seq = build_sequence([TimedAnnotation("goro", 9.0, 12.0)],
                             n_frames=600, fps=60.0,
                             dictionary=empty_dictionary, table=table)
        assert seq.frames[540:600].any()
        assert not seq.frames[:540].any()
        assert np.all(seq.frames[540:600].any(axis=1))

    def test_inclusive_end_flag(self, table, empty_dictionary):
        ann = [TimedAnnotation("goro", 2.0, 4.0)]
        half_open = build_sequence(ann, 600, 60.0, empty_dictionary, table)
        inclusive = build_sequence(ann, 600, 60.0, empty_dictionary, table,
                                   inclusive_end=True)
        assert not half_open.frames[240].any()
        assert inclusive.frames[240].any()

    def test_overlap_last_writer_wins(self, table, empty_dictionary, caplog):
        anns = [TimedAnnotation("goro", 1.0, 3.0),
                TimedAnnotation("pika", 2.0, 4.0)]
        with caplog.at_level(logging.WARNING):
            seq = build_sequence(anns, 300, 60.0, empty_dictionary, table)
        pika = quantify(parse("pika"), table).astype(np.float32)
        goro = quantify(parse("goro"), table).astype(np.float32)
        assert np.array_equal(seq.frames[130], pika)  # overwritten region
        assert np.array_equal(seq.frames[70], goro)
        assert any("overlap" in r.message for r in caplog.records)

    def test_deterministic(self, table, empty_dictionary):
        anns = [TimedAnnotation("kurukuru", 0.5, 1.5)]
        a = build_sequence(anns, 200, 60.0, empty_dictionary, table)
        b = build_sequence(anns, 200, 60.0, empty_dictionary, table)
        assert np.array_equal(a.frames, b.frames)


class TestWindow:
    def make(self, n=600):
        frames = np.arange(n * 43, dtype=np.float32).reshape(n, 43)
        return ConditioningSequence(fps=60.0, frames=frames)

    def test_verbatim(self):
        seq = self.make()
        out = window(seq, 0, 240)
        assert np.array_equal(out, seq.frames[:240])

    def test_zero_padding(self):
        seq = self.make()
        out = window(seq, 590, 240)
        assert np.array_equal(out[:10], seq.frames[590:])
        assert not out[10:].any()

    def test_negative_start(self):
        with pytest.raises(NegativeStart):
            window(self.make(), -1, 240)

    def test_start_past_end_all_zero(self):
        out = window(self.make(10), 50, 8)
        assert out.shape == (8, 43)
        assert not out.any()


class TestConditioningFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        seq = ConditioningSequence(
            fps=60.0, frames=rng.standard_normal((37, 43)).astype(np.float32))
        p = tmp_path / "c.onoc"
        save_conditioning(seq, p)
        loaded = load_conditioning(p)
        assert np.array_equal(loaded.frames, seq.frames)
        assert p.read_bytes()[:4] == b"ONOC"

    def test_truncated(self, tmp_path):
        p = tmp_path / "c.onoc"
        seq = ConditioningSequence(fps=60.0,
                                   frames=np.zeros((5, 43), dtype=np.float32))
        save_conditioning(seq, p)
        p.write_bytes(p.read_bytes()[:-7])
        with pytest.raises(DecodeError):
            load_conditioning(p)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "c.onoc"
        p.write_bytes(b"XXXX" + b"\x00" * 20)
        with pytest.raises(DecodeError):
            load_conditioning(p)
