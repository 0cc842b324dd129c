"""Velocity-regression network: a 1-D residual conv net over 200-frame
IMU windows, group-normalized so predictions never depend on batch
composition, with a small-initialized affine head to 3 outputs.

Parameters are a named dict of float32 arrays; the layout is fully
determined by ModelConfig, which is what checkpoint loading validates
against.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import CorruptCheckpoint, InvalidConfig, ShapeMismatch, VersionMismatch
from .seeding import rng_stream

KERNEL = 3
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    block_count: int = 4
    channel_widths: tuple[int, ...] = (16, 32, 64, 128)
    gn_channels_per_group: int = 8
    input_channels: int = 6
    input_frames: int = 200
    output_dim: int = 3

    def __post_init__(self):
        object.__setattr__(self, "channel_widths", tuple(int(w) for w in self.channel_widths))
        if self.block_count < 1:
            raise InvalidConfig("block_count must be >= 1")
        if len(self.channel_widths) != self.block_count:
            raise InvalidConfig(f"need {self.block_count} channel widths, got {len(self.channel_widths)}")
        if any(w <= 0 for w in self.channel_widths):
            raise InvalidConfig("channel widths must be positive")
        if any(a > b for a, b in zip(self.channel_widths, self.channel_widths[1:])):
            raise InvalidConfig("channel widths must be nondecreasing")
        if self.input_channels != 6:
            raise InvalidConfig("input_channels is fixed at 6 (3 accel + 3 gyro)")
        if self.input_frames != 200:
            raise InvalidConfig("input_frames is fixed at 200 (1 s at 200 Hz)")
        if self.output_dim != 3:
            raise InvalidConfig("output_dim is fixed at 3")
        if self.gn_channels_per_group < 1:
            raise InvalidConfig("gn_channels_per_group must be >= 1")
        for w in self.channel_widths:
            if w % min(self.gn_channels_per_group, w):
                raise InvalidConfig(f"width {w} not divisible into groups of {min(self.gn_channels_per_group, w)}")

    def to_dict(self) -> dict:
        return {
            "block_count": self.block_count,
            "channel_widths": list(self.channel_widths),
            "gn_channels_per_group": self.gn_channels_per_group,
            "input_channels": self.input_channels,
            "input_frames": self.input_frames,
            "output_dim": self.output_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown model config keys: {sorted(unknown)}")
        d = dict(d)
        if "channel_widths" in d:
            d["channel_widths"] = tuple(d["channel_widths"])
        return cls(**d)


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict[str, np.ndarray]
    seed: int

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()}, self.seed)


def _block_specs(config: ModelConfig):
    """(in_ch, out_ch, stride, has_projection) per residual block."""
    specs = []
    prev = config.channel_widths[0]
    for i, width in enumerate(config.channel_widths):
        stride = 1 if i == 0 else 2
        specs.append((prev, width, stride, stride != 1 or prev != width))
        prev = width
    return specs


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Canonical ordered name -> shape map; also fixes checkpoint order."""
    w0 = config.channel_widths[0]
    shapes: dict[str, tuple[int, ...]] = {
        "stem.conv.w": (w0, config.input_channels, KERNEL),
        "stem.conv.b": (w0,),
        "stem.gn.g": (w0,),
        "stem.gn.b": (w0,),
    }
    for i, (cin, cout, _stride, proj) in enumerate(_block_specs(config)):
        p = f"block{i}"
        shapes[f"{p}.conv1.w"] = (cout, cin, KERNEL)
        shapes[f"{p}.conv1.b"] = (cout,)
        shapes[f"{p}.gn1.g"] = (cout,)
        shapes[f"{p}.gn1.b"] = (cout,)
        shapes[f"{p}.conv2.w"] = (cout, cout, KERNEL)
        shapes[f"{p}.conv2.b"] = (cout,)
        shapes[f"{p}.gn2.g"] = (cout,)
        shapes[f"{p}.gn2.b"] = (cout,)
        if proj:
            shapes[f"{p}.proj.w"] = (cout, cin, 1)
            shapes[f"{p}.proj.b"] = (cout,)
            shapes[f"{p}.projgn.g"] = (cout,)
            shapes[f"{p}.projgn.b"] = (cout,)
    shapes["head.w"] = (config.channel_widths[-1], config.output_dim)
    shapes["head.b"] = (config.output_dim,)
    return shapes


def init_model(config: ModelConfig, seed: int) -> ModelParams:
    """He-initialized conv stacks; the head is drawn small (std 1e-3) with
    zero bias so a fresh model predicts velocities near zero."""
    rng = rng_stream(seed, "init")
    tensors: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(config).items():
        if "gn" in name and name.endswith(".g"):
            value = np.ones(shape)
        elif name == "head.w":
            value = rng.standard_normal(shape) * 1e-3
        elif name.endswith(".w"):
            fan_in = int(np.prod(shape[1:]))
            value = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
        else:
            value = np.zeros(shape)  # conv biases, gn shifts, head bias
        tensors[name] = value.astype(np.float32)
    return ModelParams(config, tensors, int(seed))


def wrap_tensors(params: ModelParams, requires_grad: bool = False) -> dict[str, Tensor]:
    return {k: Tensor(v, requires_grad=requires_grad, name=k) for k, v in params.tensors.items()}


def forward_graph(config: ModelConfig, pt: dict[str, Tensor], x: Tensor) -> Tensor:
    """Build the network graph on Tensor leaves `pt` for input windows x."""
    if x.data.ndim != 3 or x.shape[1:] != (config.input_channels, config.input_frames):
        raise ShapeMismatch(
            f"model input must be (B, {config.input_channels}, {config.input_frames}), got {x.shape}")
    cpg = config.gn_channels_per_group

    def gn(h, prefix):
        return ad.group_norm(h, pt[f"{prefix}.g"], pt[f"{prefix}.b"], cpg)

    h = ad.relu(gn(ad.conv1d(x, pt["stem.conv.w"], pt["stem.conv.b"], stride=1, padding=1), "stem.gn"))
    for i, (_cin, _cout, stride, proj) in enumerate(_block_specs(config)):
        p = f"block{i}"
        main = ad.conv1d(h, pt[f"{p}.conv1.w"], pt[f"{p}.conv1.b"], stride=stride, padding=1)
        main = ad.relu(gn(main, f"{p}.gn1"))
        main = ad.conv1d(main, pt[f"{p}.conv2.w"], pt[f"{p}.conv2.b"], stride=1, padding=1)
        main = gn(main, f"{p}.gn2")
        skip = h
        if proj:
            skip = gn(ad.conv1d(h, pt[f"{p}.proj.w"], pt[f"{p}.proj.b"], stride=stride, padding=0), f"{p}.projgn")
        h = ad.relu(ad.add(main, skip))
    feat = ad.global_avg_pool(h)
    return ad.affine(feat, pt["head.w"], pt["head.b"])


def predict_velocity(params: ModelParams, windows: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """Velocities (B, 3) for a batch of windows (B, 6, 200); pure and
    deterministic, evaluated in memory-bounded chunks (group norm makes
    the result independent of chunking)."""
    w = np.asarray(windows, dtype=np.float32)
    if w.ndim != 3:
        raise ShapeMismatch(f"predict_velocity expects (B, 6, 200), got {w.shape}")
    pt = wrap_tensors(params)
    outs = [forward_graph(params.config, pt, Tensor(w[i : i + chunk])).data for i in range(0, len(w), chunk)]
    return np.concatenate(outs, axis=0) if outs else np.zeros((0, 3), dtype=np.float32)


# ---------------------------------------------------------------------------
# checkpoint format: NAME.json manifest + NAME.bin little-endian f32 payload


def save_checkpoint(params: ModelParams, stem: str) -> None:
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "config": params.config.to_dict(),
        "seed": params.seed,
        "tensors": [[name, list(arr.shape)] for name, arr in params.tensors.items()],
    }
    os.makedirs(os.path.dirname(os.path.abspath(stem)) or ".", exist_ok=True)
    payload = b"".join(np.ascontiguousarray(arr, dtype="<f4").tobytes() for arr in params.tensors.values())
    with open(stem + ".json", "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    with open(stem + ".bin", "wb") as f:
        f.write(payload)


def load_checkpoint(stem: str) -> ModelParams:
    """Load and validate a checkpoint; every declared shape is checked
    against the layout implied by the stored config."""
    with open(stem + ".json") as f:
        manifest = json.load(f)
    version = manifest.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"checkpoint format {version}, expected {CHECKPOINT_VERSION}")
    config = ModelConfig.from_dict(manifest["config"])
    expected = param_shapes(config)
    listed = manifest["tensors"]
    if [n for n, _ in listed] != list(expected):
        raise CorruptCheckpoint("manifest tensor list does not match the config layout")
    for name, shape in listed:
        if tuple(shape) != expected[name]:
            raise CorruptCheckpoint(f"tensor '{name}' declares shape {tuple(shape)}, config implies {expected[name]}")
    with open(stem + ".bin", "rb") as f:
        payload = f.read()
    total = sum(int(np.prod(s)) for s in expected.values())
    if len(payload) != total * 4:
        raise CorruptCheckpoint(f"payload holds {len(payload)} bytes, manifest implies {total * 4}")
    flat = np.frombuffer(payload, dtype="<f4")
    tensors: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in expected.items():
        size = int(np.prod(shape))
        tensors[name] = flat[offset : offset + size].reshape(shape).astype(np.float32)
        offset += size
    if not all(np.isfinite(v).all() for v in tensors.values()):
        raise CorruptCheckpoint("payload contains non-finite values")
    return ModelParams(config, tensors, int(manifest["seed"]))
