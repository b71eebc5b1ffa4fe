"""Command-line entry point.

Every subcommand supports --json (machine-readable result on stdout). Exit
codes: 0 success, 1 usage error, 2 data error, 3 internal error. The
ONOMA_DATA_DIR environment variable overrides the packaged data files.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import OnodanceError
from .datafiles import ENV_VAR


def _load_table(args):
    from .symbolism import default_rule_table, load_rule_table
    path = getattr(args, "table", None)
    return load_rule_table(path) if path else default_rule_table()


def _load_dictionary(args, table):
    from .symbolism import QuantificationDictionary, load_dictionary
    path = getattr(args, "dict", None)
    if path:
        return load_dictionary(path)
    return QuantificationDictionary(table_version=table.version, entries={})


def _caption_format(path: Path, explicit: str | None) -> str:
    from .timeline import CAPTION_FORMATS
    if explicit:
        return explicit
    suffix = Path(path).suffix.lstrip(".").lower()
    if suffix in CAPTION_FORMATS:
        return suffix
    raise OnodanceError(
        f"cannot infer caption format from {path}; pass --format")


# --- subcommands -------------------------------------------------------------

def cmd_parse(args) -> dict:
    from .phonology import normalize, parse_word
    normalized = normalize(args.word)
    word = parse_word(normalized)
    result = {
        "input": args.word,
        "normalized": normalized,
        "surface": word.surface,
        "reduplicated": word.reduplicated,
        "final_gemination": word.final_gemination,
        "final_nasal": word.final_nasal,
        "final_ri": word.final_ri,
        "morae": [
            {"consonant": m.consonant, "vowel": m.vowel, "voiced": m.voiced,
             "palatalized": m.palatalized, "long_vowel": m.long_vowel}
            for m in word.morae
        ],
    }
    if not args.json:
        print(json.dumps(result, indent=2))
    return result


def cmd_embed(args) -> dict:
    from .symbolism import load_scale_registry, lookup_or_quantify
    table = _load_table(args)
    dictionary = _load_dictionary(args, table)
    vec = lookup_or_quantify(args.word, dictionary, table)
    registry = load_scale_registry()
    result = {
        "word": args.word,
        "table_version": table.version,
        "values": [float(x) for x in vec],
        "labels": [registry.label(i) for i in range(len(registry))],
    }
    if not args.json:
        for i, (label, value) in enumerate(zip(result["labels"],
                                               result["values"])):
            print(f"{i:2d}  {label:20s} {value:+.4f}")
    return result


def cmd_dict_build(args) -> dict:
    from .symbolism import build_dictionary, save_dictionary
    table = _load_table(args)
    words = [line.strip() for line in
             Path(args.words).read_text(encoding="utf-8").splitlines()
             if line.strip() and not line.lstrip().startswith("#")]
    dictionary = build_dictionary(words, table)
    save_dictionary(dictionary, args.out)
    result = {"out": str(args.out), "entries": len(dictionary.entries),
              "table_version": dictionary.table_version}
    if not args.json:
        print(f"wrote {result['entries']} entries to {args.out} "
              f"(table {dictionary.table_version})")
    return result


def cmd_condition(args) -> dict:
    from .timeline import build_sequence, parse_captions, save_conditioning
    table = _load_table(args)
    dictionary = _load_dictionary(args, table)
    path = Path(args.captions)
    fmt = _caption_format(path, args.format)
    doc = parse_captions(path.read_bytes(), fmt)
    seq = build_sequence(doc.annotations, n_frames=args.frames, fps=args.fps,
                         dictionary=dictionary, table=table,
                         inclusive_end=args.inclusive_end)
    save_conditioning(seq, args.out)
    filled = int(np.count_nonzero(np.any(seq.frames != 0.0, axis=1)))
    result = {"out": str(args.out), "n_frames": seq.n_frames,
              "fps": args.fps, "annotations": len(doc.annotations),
              "empty_cues": doc.empty_cues, "filled_frames": filled}
    if not args.json:
        print(f"wrote {seq.n_frames} x 43 conditioning to {args.out} "
              f"({len(doc.annotations)} annotations, {filled} filled frames)")
    return result


def cmd_train(args) -> dict:
    from .report import save_loss_curve
    from .trainer import TrainConfig, load_manifest, train, write_metrics
    table = _load_table(args)
    dictionary = _load_dictionary(args, table)
    cfg = TrainConfig.from_json(
        json.loads(Path(args.config).read_text(encoding="utf-8")))
    dataset = load_manifest(args.manifest, dictionary, table, split=args.split)
    out = Path(args.out)
    result_obj = train(dataset, cfg, out_dir=out)
    metrics_csv = out / "metrics.csv"
    write_metrics(result_obj.metrics, metrics_csv)
    figure = out / "loss_curve.png"
    save_loss_curve(result_obj.metrics, figure)
    final_loss = result_obj.metrics[-1][1] if result_obj.metrics else None
    result = {"out": str(out), "examples": len(dataset),
              "steps": len(result_obj.metrics), "final_loss": final_loss,
              "checkpoint": str(result_obj.checkpoints[-1])
              if result_obj.checkpoints else None,
              "metrics_csv": str(metrics_csv), "figure": str(figure)}
    if not args.json:
        print(f"trained {result['steps']} steps on {len(dataset)} examples; "
              f"final loss {final_loss}")
        print(f"checkpoint: {result['checkpoint']}")
    return result


def cmd_generate(args) -> dict:
    from .factmodel import load_checkpoint
    from .generator import GenerationRequest, generate
    from .motion import default_skeleton, load_clip, render_frames, save_clip, to_features
    from .timeline import (ConditioningSequence, TimedAnnotation,
                           build_sequence, parse_captions)
    table = _load_table(args)
    dictionary = _load_dictionary(args, table)
    model = load_checkpoint(args.checkpoint)
    cond_frames = args.frames + model.config.cond_len

    if args.captions:
        path = Path(args.captions)
        fmt = _caption_format(path, args.format)
        annotations = parse_captions(path.read_bytes(), fmt).annotations
    elif args.word:
        if args.start_s is None or args.end_s is None:
            raise OnodanceError("--word needs --from and --to seconds")
        annotations = [TimedAnnotation(args.word, args.start_s, args.end_s)]
    else:
        annotations = []
    seq = build_sequence(annotations, n_frames=cond_frames, fps=60.0,
                         dictionary=dictionary, table=table)

    seed = None
    if args.seed_clip:
        clip = load_clip(args.seed_clip)
        feats = to_features(clip)
        if feats.shape[0] < model.config.seed_len:
            raise OnodanceError(
                f"seed clip has {feats.shape[0]} frames; "
                f"need >= {model.config.seed_len}")
        seed = feats[-model.config.seed_len:]

    request = GenerationRequest(condition=seq, n_frames=args.frames,
                                seed_motion=seed)
    clip = generate(request, model=model, skeleton=default_skeleton())
    save_clip(clip, args.out)
    result = {"out": str(args.out), "frames": clip.n_frames,
              "fps": clip.fps, "words": sorted({a.word for a in annotations})}
    if args.render:
        written = render_frames(clip, args.render, stride=args.stride)
        result["render_dir"] = str(args.render)
        result["svg_count"] = len(written)
    if not args.json:
        print(f"generated {clip.n_frames} frames to {args.out}")
        if args.render:
            print(f"rendered {result['svg_count']} SVG frames to {args.render}")
    return result


def cmd_eval(args) -> dict:
    from .evalsuite import evaluate
    from .motion import load_clip
    from .report import save_eval_figure

    def load_dir(d):
        paths = sorted(Path(d).glob("*.json"))
        if not paths:
            raise OnodanceError(f"no clip JSON files in {d}")
        return [load_clip(p) for p in paths]

    generated = load_dir(args.generated)
    reference = load_dir(args.reference)
    report = evaluate(generated, reference)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    csv_path = out.with_suffix(".csv")
    rows = ["metric,value",
            f"fid_k,{report.fid_k!r}", f"fid_g,{report.fid_g!r}",
            f"dist_k,{report.dist_k!r}", f"dist_g,{report.dist_g!r}"]
    csv_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    result = report.to_json()
    result["out"] = str(out)
    result["csv"] = str(csv_path)
    if not args.no_figures:
        figure = out.with_suffix(".png")
        save_eval_figure(report, figure)
        result["figure"] = str(figure)
    if not args.json:
        print(f"fid_k={report.fid_k:.4f} fid_g={report.fid_g:.4f} "
              f"dist_k={report.dist_k:.4f} dist_g={report.dist_g:.4f}")
        print(f"report: {out}")
    return result


def cmd_render(args) -> dict:
    from .motion import load_clip, render_frames
    clip = load_clip(args.clip)
    written = render_frames(clip, args.out, stride=args.stride)
    result = {"out": str(args.out), "svg_count": len(written),
              "frames": clip.n_frames, "stride": args.stride}
    if not args.json:
        print(f"rendered {len(written)} SVG frames to {args.out}")
    return result


def cmd_export_bvh(args) -> dict:
    from .motion import export_bvh, load_clip
    clip = load_clip(args.clip)
    export_bvh(clip, args.out)
    result = {"out": str(args.out), "frames": clip.n_frames,
              "joints": clip.skeleton.n_joints, "fps": clip.fps}
    if not args.json:
        print(f"exported {clip.n_frames} frames / "
              f"{clip.skeleton.n_joints} joints to {args.out}")
    return result


def cmd_model_info(args) -> dict:
    from .factmodel import load_checkpoint
    model = load_checkpoint(args.checkpoint)
    result = {"config": model.config.to_json(),
              "parameters": model.params.n_parameters(),
              "parameter_tensors": len(model.params.names())}
    if not args.json:
        print(json.dumps(result, indent=2, sort_keys=True))
    return result


def cmd_fixtures(args) -> dict:
    from .fixtures import write_fixtures
    meta = write_fixtures(args.out, seed=args.seed, n_frames=args.frames)
    result = {"out": str(args.out), **meta}
    if not args.json:
        print(f"wrote fixture dataset to {args.out} "
              f"(designated scale {meta['designated_scale']['label']}, "
              f"high={meta['high_word']}, low={meta['low_word']})")
    return result


# --- parser ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true",
                        help="print a machine-readable JSON result on stdout")

    table_opts = argparse.ArgumentParser(add_help=False)
    table_opts.add_argument("--table", type=Path, default=None,
                            help="rule-table JSON (default: packaged table)")
    table_opts.add_argument("--dict", type=Path, default=None,
                            help="quantification dictionary JSON")

    parser = _Parser(
        prog="onodance",
        description="Generate skeletal dance motion from sound-symbolic words.",
        epilog=f"Set {ENV_VAR} to override packaged data files.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("parse", parents=[common],
                       help="print the mora decomposition of a word as JSON")
    p.add_argument("word")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("embed", parents=[common, table_opts],
                       help="print the 43 scale values of a word")
    p.add_argument("word")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("dict-build", parents=[common, table_opts],
                       help="quantify a word list into a dictionary file")
    p.add_argument("--words", type=Path, required=True,
                   help="text file, one word per line")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_dict_build)

    p = sub.add_parser("condition", parents=[common, table_opts],
                       help="build a frame-aligned conditioning matrix")
    p.add_argument("--captions", type=Path, required=True)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--fps", type=float, default=60.0)
    p.add_argument("--format", choices=("srt", "sbv", "csv"), default=None)
    p.add_argument("--inclusive-end", action="store_true",
                   help="also fill the frame at round(end*fps)")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_condition)

    p = sub.add_parser("train", parents=[common, table_opts],
                       help="train a model from a dataset manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--config", type=Path, required=True,
                   help="TrainConfig JSON file")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--split", default=None,
                   help="only use manifest entries with this split value")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", parents=[common, table_opts],
                       help="generate motion from a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--captions", type=Path, default=None)
    p.add_argument("--format", choices=("srt", "sbv", "csv"), default=None)
    p.add_argument("--word", default=None)
    p.add_argument("--from", dest="start_s", type=float, default=None,
                   help="annotation start (seconds), with --word")
    p.add_argument("--to", dest="end_s", type=float, default=None,
                   help="annotation end (seconds), with --word")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--seed-clip", type=Path, default=None,
                   help="clip whose last frames seed generation "
                        "(default: rest pose)")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--render", type=Path, default=None,
                   help="also render SVG frames into this directory")
    p.add_argument("--stride", type=int, default=10)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", parents=[common],
                       help="FID and diversity between two clip directories")
    p.add_argument("--generated", type=Path, required=True)
    p.add_argument("--reference", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", parents=[common],
                       help="render a clip as SVG stick figures")
    p.add_argument("--clip", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--stride", type=int, default=10)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("export-bvh", parents=[common],
                       help="export a clip to BVH")
    p.add_argument("--clip", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_export_bvh)

    p = sub.add_parser("model-info", parents=[common],
                       help="echo a checkpoint's config as JSON")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.set_defaults(func=cmd_model_info)

    p = sub.add_parser("fixtures", parents=[common],
                       help="write the deterministic synthetic dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--frames", type=int, default=600)
    p.set_defaults(func=cmd_fixtures)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return 1
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        result = args.func(args)
    except (OnodanceError, OSError, ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # pragma: no cover - defensive
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    if args.json and result is not None:
        print(json.dumps(result, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
