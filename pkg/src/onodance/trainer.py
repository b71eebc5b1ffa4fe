"""Dataset windowing, batching and the training loop.

A paired example is one motion feature matrix plus its frame-aligned
conditioning sequence. Windows slide over each example: seed motion and
conditioning start on the same frame, the target is the out_len frames right
after the seed. Training samples windows with a seeded generator so the loss
curve reproduces bitwise for a fixed config.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diffcore as dc
from .errors import EmptyDataset, NonFiniteLoss, TooShort
from .factmodel import FactModel, ModelConfig, forward_tensor, loss_tensor, save_checkpoint
from .motion import load_clip, to_features
from .symbolism import QuantificationDictionary, RuleTable
from .timeline import ConditioningSequence, build_sequence, parse_captions, window

logger = logging.getLogger(__name__)

TRAIN_FPS = 60.0


@dataclass
class PairedExample:
    motion: np.ndarray                # (n, D) float32
    condition: ConditioningSequence   # (n, 43)
    id: str

    def __post_init__(self):
        self.motion = np.ascontiguousarray(self.motion, dtype=np.float32)
        if self.motion.ndim != 2:
            raise ValueError("motion features must be a 2-D matrix")
        if self.motion.shape[0] != self.condition.n_frames:
            raise ValueError(
                f"example {self.id!r}: motion has {self.motion.shape[0]} frames "
                f"but conditioning has {self.condition.n_frames}")
        if self.condition.fps != TRAIN_FPS:
            raise ValueError(f"example {self.id!r}: conditioning must be "
                             f"{TRAIN_FPS:g} fps")

    @property
    def n_frames(self) -> int:
        return self.motion.shape[0]


@dataclass
class TrainConfig:
    model: ModelConfig
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    batch_size: int = 1
    total_steps: int = 1000
    checkpoint_interval: int = 0   # 0: only the final checkpoint
    window_stride: int = 1
    seed: int = 0
    stop_loss: float | None = None  # early stop once loss drops below

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.total_steps < 0:
            raise ValueError("learning rate, batch size, steps must be positive")
        if self.window_stride < 1:
            raise ValueError("window stride must be >= 1")

    def to_json(self) -> dict:
        doc = {k: v for k, v in self.__dict__.items() if k != "model"}
        doc["model"] = self.model.to_json()
        return doc

    @staticmethod
    def from_json(doc: dict) -> "TrainConfig":
        doc = dict(doc)
        model = ModelConfig.from_json(doc.pop("model"))
        return TrainConfig(model=model, **doc)


def make_windows(example: PairedExample, cfg: TrainConfig):
    """Yield (seed, cond, target) windows; seed and cond share frame 0."""
    m = cfg.model
    span = m.seed_len + m.out_len
    n = example.n_frames
    if n < span:
        raise TooShort(f"example {example.id!r} has {n} frames, needs {span}")
    for s in range(0, n - span + 1, cfg.window_stride):
        seed = example.motion[s:s + m.seed_len]
        cond = window(example.condition, s, m.cond_len)
        target = example.motion[s + m.seed_len:s + span]
        yield seed, cond, target


def count_windows(example: PairedExample, cfg: TrainConfig) -> int:
    m = cfg.model
    span = m.seed_len + m.out_len
    if example.n_frames < span:
        return 0
    return (example.n_frames - span) // cfg.window_stride + 1


@dataclass
class TrainResult:
    model: FactModel
    metrics: list = field(default_factory=list)  # (step, loss, wall_ms)
    checkpoints: list = field(default_factory=list)


def _window_at(example: PairedExample, s: int, m: ModelConfig):
    seed = example.motion[s:s + m.seed_len]
    cond = window(example.condition, s, m.cond_len)
    target = example.motion[s + m.seed_len:s + m.seed_len + m.out_len]
    return seed, cond, target


def train(dataset, cfg: TrainConfig, out_dir: Path | None = None) -> TrainResult:
    """Seeded window sampling with Adam updates; deterministic loss curve."""
    if not dataset:
        raise EmptyDataset("no paired examples")
    index = []  # (example_idx, start_frame)
    for e, example in enumerate(dataset):
        c = count_windows(example, cfg)
        if c == 0:
            logger.warning("example %r too short for windowing; skipped",
                           example.id)
            continue
        index.extend((e, s * cfg.window_stride) for s in range(c))
    if not index:
        raise EmptyDataset("no example long enough to window")

    model = FactModel(cfg.model)
    state = dc.AdamState()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    result = TrainResult(model=model)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    for step in range(1, cfg.total_steps + 1):
        t0 = time.perf_counter()
        picks = rng.integers(0, len(index), size=cfg.batch_size)
        model.params.zero_grads()
        drop_rng = dc.DropoutRng(cfg.seed, step)
        losses = []
        for pick in picks:
            e, s = index[int(pick)]
            seed, cond, target = _window_at(dataset[e], s, cfg.model)
            pred = forward_tensor(model, seed, cond, train=True, rng=drop_rng)
            losses.append(loss_tensor(pred, target))
        total = losses[0] if len(losses) == 1 else dc.scale(
            _sum_tensors(losses), 1.0 / len(losses))
        loss_val = float(total.data)
        if not math.isfinite(loss_val):
            raise NonFiniteLoss(step)
        dc.backward(total)
        dc.adam_step(model.params, state, lr=cfg.learning_rate,
                     beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        result.metrics.append((step, loss_val, wall_ms))
        if out is not None and cfg.checkpoint_interval > 0 \
                and step % cfg.checkpoint_interval == 0:
            p = out / f"checkpoint_{step:06d}.onof"
            save_checkpoint(model, p)
            result.checkpoints.append(p)
        if cfg.stop_loss is not None and loss_val < cfg.stop_loss:
            break

    if out is not None:
        p = out / "checkpoint_final.onof"
        save_checkpoint(model, p)
        result.checkpoints.append(p)
    return result


def _sum_tensors(ts):
    acc = ts[0]
    for t in ts[1:]:
        acc = dc.add(acc, t)
    return acc


def write_metrics(metrics, path: Path) -> None:
    lines = ["step,loss,wall_ms"]
    for step, loss_val, wall_ms in metrics:
        lines.append(f"{step},{loss_val!r},{wall_ms:.3f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path: Path, dictionary: QuantificationDictionary,
                  table: RuleTable, split: str | None = None,
                  inclusive_end: bool = False):
    """Manifest: JSON list of {"clip", "captions", "format"[, "id", "split"]}."""
    base = Path(path).parent
    entries = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(entries, list):
        raise ValueError("manifest must be a JSON list")
    examples = []
    for i, entry in enumerate(entries):
        if split is not None and entry.get("split", "train") != split:
            continue
        clip_path = base / entry["clip"]
        captions_path = base / entry["captions"]
        clip = load_clip(clip_path)
        doc = parse_captions(captions_path.read_bytes(), entry["format"])
        seq = build_sequence(doc.annotations, n_frames=clip.n_frames,
                             fps=clip.fps, dictionary=dictionary, table=table,
                             inclusive_end=inclusive_end)
        examples.append(PairedExample(
            motion=to_features(clip), condition=seq,
            id=str(entry.get("id", clip_path.stem))))
    return examples
