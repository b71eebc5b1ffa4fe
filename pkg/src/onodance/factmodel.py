"""Cross-modal transformer that extends a seed motion window under a
frame-aligned 43-dim conditioning window.

Both streams are linearly embedded into the hidden width, get their own
learnable positional encoding, and pass through per-stream encoder stacks.
Their outputs are concatenated along time into a cross stack; the last
``out_len`` positions are projected back to motion features.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import diffcore as dc
from .diffcore import DropoutRng, ParameterSet, Tensor
from .errors import (
    CorruptChecksum,
    HeadDivisibility,
    ShapeMismatch,
    VersionUnsupported,
)

COND_DIM = 43
CHECKPOINT_MAGIC = b"ONOF"
CHECKPOINT_VERSION = 1
_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


@dataclass(frozen=True)
class ModelConfig:
    motion_dim: int
    cond_dim: int = COND_DIM
    hidden_dim: int = 64
    motion_layers: int = 2
    cond_layers: int = 2
    cross_layers: int = 4
    heads: int = 4
    seed_len: int = 120
    cond_len: int = 240
    out_len: int = 20
    dropout: float = 0.0
    init_seed: int = 0
    # The conditioning values live in [-2, 2]; raw by default, halved into
    # [-1, 1] when set. Stored in the config so checkpoints carry it.
    normalize_cond: bool = False

    def __post_init__(self):
        if self.cond_dim != COND_DIM:
            raise ValueError(f"cond_dim must be {COND_DIM}")
        if self.motion_dim < 1 or self.hidden_dim < 1:
            raise ValueError("dims must be positive")
        if min(self.motion_layers, self.cond_layers, self.cross_layers) < 0:
            raise ValueError("layer counts must be >= 0")
        if self.seed_len > self.cond_len:
            raise ValueError("seed_len must not exceed cond_len")
        if self.out_len < 1:
            raise ValueError("out_len must be >= 1")
        if self.hidden_dim % self.heads != 0:
            raise HeadDivisibility(
                f"hidden {self.hidden_dim} not divisible by {self.heads} heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    @staticmethod
    def desk(motion_dim: int, **overrides) -> "ModelConfig":
        return ModelConfig(motion_dim=motion_dim, **overrides)

    @staticmethod
    def paper(motion_dim: int, **overrides) -> "ModelConfig":
        """Width-faithful preset (800-dim hidden); depth/heads are ours."""
        base = dict(hidden_dim=800, heads=10, motion_layers=2, cond_layers=2,
                    cross_layers=12, dropout=0.1)
        base.update(overrides)
        return ModelConfig(motion_dim=motion_dim, **base)

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(doc: dict) -> "ModelConfig":
        return ModelConfig(**doc)


_STACKS = ("motion_enc", "cond_enc", "cross")


def _stack_depth(config: ModelConfig, stack: str) -> int:
    return {"motion_enc": config.motion_layers,
            "cond_enc": config.cond_layers,
            "cross": config.cross_layers}[stack]


def expected_shapes(config: ModelConfig) -> dict:
    """Parameter name -> shape, derivable from the config alone."""
    h, ff = config.hidden_dim, 4 * config.hidden_dim
    shapes = {
        "motion_embed/w": (config.motion_dim, h),
        "motion_embed/b": (h,),
        "cond_embed/w": (config.cond_dim, h),
        "cond_embed/b": (h,),
        "motion_pos": (config.seed_len, h),
        "cond_pos": (config.cond_len, h),
        "out_proj/w": (h, config.motion_dim),
        "out_proj/b": (config.motion_dim,),
    }
    for stack in _STACKS:
        for i in range(_stack_depth(config, stack)):
            base = f"{stack}/{i}"
            for w in ("wq", "wk", "wv", "wo"):
                shapes[f"{base}/attn/{w}"] = (h, h)
            for b in ("bq", "bk", "bv", "bo"):
                shapes[f"{base}/attn/{b}"] = (h,)
            shapes[f"{base}/ln1/gain"] = (h,)
            shapes[f"{base}/ln1/bias"] = (h,)
            shapes[f"{base}/ffn/w1"] = (h, ff)
            shapes[f"{base}/ffn/b1"] = (ff,)
            shapes[f"{base}/ffn/w2"] = (ff, h)
            shapes[f"{base}/ffn/b2"] = (h,)
            shapes[f"{base}/ln2/gain"] = (h,)
            shapes[f"{base}/ln2/bias"] = (h,)
    return shapes


def _init_kind(name: str) -> str:
    if name.endswith(("bias", "/b", "bq", "bk", "bv", "bo", "b1", "b2")):
        return "zeros"
    if name.endswith("gain"):
        return "ones"
    if name in ("motion_pos", "cond_pos"):
        return "small"
    return "xavier"


def build_parameters(config: ModelConfig, dtype=np.float32) -> ParameterSet:
    pset = ParameterSet(config.init_seed, dtype=dtype)
    for name, shape in expected_shapes(config).items():
        pset.new(name, shape, init=_init_kind(name))
    return pset


class FactModel:
    def __init__(self, config: ModelConfig, params: ParameterSet | None = None):
        self.config = config
        self.params = params if params is not None else build_parameters(config)
        self._validate_params()

    def _validate_params(self) -> None:
        expected = expected_shapes(self.config)
        names = set(self.params.names())
        missing = sorted(set(expected) - names)
        extra = sorted(names - set(expected))
        if missing or extra:
            raise ShapeMismatch(sorted(expected), sorted(names),
                                f"parameter names (missing={missing}, extra={extra})")
        for name, shape in expected.items():
            actual = self.params[name].data.shape
            if actual != shape:
                raise ShapeMismatch(shape, actual, name)


def _attn_params(params: ParameterSet, prefix: str) -> dict:
    return {k: params[f"{prefix}/attn/{k}"]
            for k in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")}


def _layer(x: Tensor, params: ParameterSet, prefix: str, heads: int,
           rate: float, train: bool, rng: DropoutRng | None) -> Tensor:
    a = dc.multi_head_attention(x, x, _attn_params(params, prefix), heads,
                                dropout_rate=rate, train=train, rng=rng)
    x = dc.layer_norm(dc.add(x, dc.dropout(a, rate, train, rng)),
                      params[f"{prefix}/ln1/gain"], params[f"{prefix}/ln1/bias"])
    f = dc.linear(dc.gelu(dc.linear(x, params[f"{prefix}/ffn/w1"],
                                    params[f"{prefix}/ffn/b1"])),
                  params[f"{prefix}/ffn/w2"], params[f"{prefix}/ffn/b2"])
    return dc.layer_norm(dc.add(x, dc.dropout(f, rate, train, rng)),
                         params[f"{prefix}/ln2/gain"], params[f"{prefix}/ln2/bias"])


def _check_input(name: str, arr: np.ndarray, rows: int, cols: int) -> None:
    if arr.ndim != 2 or arr.shape != (rows, cols):
        raise ShapeMismatch((rows, cols), arr.shape, name)


def forward_tensor(model: FactModel, seed_motion: np.ndarray,
                   condition: np.ndarray, train: bool = False,
                   rng: DropoutRng | None = None) -> Tensor:
    """Differentiable forward pass; returns an (out_len, motion_dim) tensor."""
    cfg = model.config
    seed_motion = np.asarray(seed_motion)
    condition = np.asarray(condition)
    _check_input("seed_motion", seed_motion, cfg.seed_len, cfg.motion_dim)
    _check_input("condition", condition, cfg.cond_len, cfg.cond_dim)
    p = model.params
    dtype = p.dtype
    rate = cfg.dropout

    x = dc.tensor(seed_motion.astype(dtype))
    x = dc.linear(x, p["motion_embed/w"], p["motion_embed/b"])
    x = dc.add(x, p["motion_pos"])
    x = dc.dropout(x, rate, train, rng)
    for i in range(cfg.motion_layers):
        x = _layer(x, p, f"motion_enc/{i}", cfg.heads, rate, train, rng)

    cond_values = condition.astype(dtype)
    if cfg.normalize_cond:
        cond_values = cond_values * dtype.type(0.5)
    c = dc.tensor(cond_values)
    c = dc.linear(c, p["cond_embed/w"], p["cond_embed/b"])
    c = dc.add(c, p["cond_pos"])
    c = dc.dropout(c, rate, train, rng)
    for i in range(cfg.cond_layers):
        c = _layer(c, p, f"cond_enc/{i}", cfg.heads, rate, train, rng)

    z = dc.concat([x, c], axis=0)
    for i in range(cfg.cross_layers):
        z = _layer(z, p, f"cross/{i}", cfg.heads, rate, train, rng)
    tail = dc.narrow(z, 0, cfg.seed_len + cfg.cond_len - cfg.out_len, cfg.out_len)
    return dc.linear(tail, p["out_proj/w"], p["out_proj/b"])


def forward(model: FactModel, seed_motion: np.ndarray, condition: np.ndarray,
            train_flag: bool = False, rng: DropoutRng | None = None) -> np.ndarray:
    """(seed_len x D, cond_len x 43) -> (out_len x D); deterministic when
    train_flag is false."""
    out = forward_tensor(model, seed_motion, condition, train=train_flag, rng=rng)
    return np.array(out.data)


def loss_tensor(pred: Tensor, target: np.ndarray) -> Tensor:
    target = np.asarray(target, dtype=pred.data.dtype)
    if target.shape != pred.data.shape:
        raise ShapeMismatch(pred.data.shape, target.shape, "loss target")
    diff = dc.sub(pred, dc.tensor(target))
    return dc.mean_all(dc.mul(diff, diff))


def loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean squared error over all out_len * D entries."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeMismatch(pred.shape, target.shape, "loss")
    diff = pred.astype(np.float64) - target.astype(np.float64)
    return float(np.mean(diff * diff))


# --- checkpoint container ----------------------------------------------------

def _config_bytes(config: ModelConfig) -> bytes:
    return json.dumps(config.to_json(), sort_keys=True,
                      separators=(",", ":")).encode("utf-8")


def save_checkpoint(model: FactModel, path: Path) -> None:
    """Binary container: magic, version, CRC32, config JSON, named blobs."""
    chunks = []
    cfg = _config_bytes(model.config)
    chunks.append(struct.pack("<I", len(cfg)))
    chunks.append(cfg)
    names = sorted(model.params.names())
    chunks.append(struct.pack("<I", len(names)))
    for name in names:
        data = model.params[name].data
        code = 0 if data.dtype == np.float32 else 1
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<BB", code, data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(np.ascontiguousarray(data, dtype=_DTYPE_CODES[code]).tobytes())
    payload = b"".join(chunks)
    header = CHECKPOINT_MAGIC + struct.pack("<II", CHECKPOINT_VERSION,
                                            zlib.crc32(payload))
    Path(path).write_bytes(header + payload)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CorruptChecksum("checkpoint payload is truncated")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path: Path) -> FactModel:
    blob = Path(path).read_bytes()
    if len(blob) < 12:
        raise CorruptChecksum("file shorter than the checkpoint header")
    if blob[:4] != CHECKPOINT_MAGIC:
        raise VersionUnsupported(f"bad magic {blob[:4]!r}")
    version, crc = struct.unpack("<II", blob[4:12])
    if version != CHECKPOINT_VERSION:
        raise VersionUnsupported(f"checkpoint format version {version}")
    payload = blob[12:]
    if zlib.crc32(payload) != crc:
        raise CorruptChecksum("CRC mismatch")

    r = _Reader(payload)
    (cfg_len,) = r.unpack("<I")
    config = ModelConfig.from_json(json.loads(r.take(cfg_len).decode("utf-8")))
    (n_params,) = r.unpack("<I")
    pset = ParameterSet(config.init_seed, dtype=np.float32)
    for _ in range(n_params):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        code, ndim = r.unpack("<BB")
        if code not in _DTYPE_CODES:
            raise VersionUnsupported(f"unknown dtype code {code}")
        shape = r.unpack(f"<{ndim}I")
        dtype = _DTYPE_CODES[code]
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        data = np.frombuffer(r.take(count * dtype.itemsize),
                             dtype=dtype).reshape(shape).copy()
        pset.params[name] = Tensor(data, requires_grad=True)
    if r.pos != len(payload):
        raise CorruptChecksum("trailing bytes after the last parameter")
    return FactModel(config, pset)
