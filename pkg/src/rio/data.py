"""IMU sequences, their on-disk CSV format, and windowing into model
inputs with average-velocity supervision targets.

Sequences are sampled at a nominal 200 Hz in a gravity-aligned world
frame with arbitrary heading (z vertical), so horizontal rotations act
purely on the x/y components of every channel.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import MissingGroundTruth, TooShort

RATE_HZ = 200.0
DT = 1.0 / RATE_HZ
WINDOW = 200  # frames per model input (1 s)

_HEADER_BASE = "t,ax,ay,az,wx,wy,wz"
_HEADER_POS = _HEADER_BASE + ",px,py,pz"


@dataclass
class ImuSequence:
    """Timestamped accel/gyro stream with optional ground-truth positions."""

    t: np.ndarray                      # (n,) seconds
    accel: np.ndarray                  # (n, 3) m/s^2
    gyro: np.ndarray                   # (n, 3) rad/s
    positions: np.ndarray | None = None  # (n, 3) meters

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.accel = np.asarray(self.accel, dtype=np.float64)
        self.gyro = np.asarray(self.gyro, dtype=np.float64)
        n = self.t.shape[0]
        if self.accel.shape != (n, 3) or self.gyro.shape != (n, 3):
            raise ValueError(f"accel/gyro must be ({n}, 3), got {self.accel.shape}/{self.gyro.shape}")
        if self.positions is not None:
            self.positions = np.asarray(self.positions, dtype=np.float64)
            if self.positions.shape != (n, 3):
                raise ValueError(f"positions must be ({n}, 3), got {self.positions.shape}")
        for arr in (self.t, self.accel, self.gyro) + (() if self.positions is None else (self.positions,)):
            if not np.isfinite(arr).all():
                raise ValueError("sequence contains non-finite values")
        if n >= 2:
            dt = np.diff(self.t)
            if (dt <= 0).any() or np.abs(dt - DT).max() > 1e-4:
                raise ValueError("timestamps must increase at a nominal 200 Hz")

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def channels(self) -> np.ndarray:
        """(6, n) sensor layout: accel x,y,z then gyro x,y,z."""
        return np.concatenate([self.accel.T, self.gyro.T], axis=0)


def save_sequence(seq: ImuSequence, path: str) -> None:
    cols = [seq.t, seq.accel, seq.gyro]
    header = _HEADER_BASE
    if seq.positions is not None:
        cols.append(seq.positions)
        header = _HEADER_POS
    table = np.column_stack(cols)
    os.makedirs(os.path.dirname(os.path.abspath(path)) or ".", exist_ok=True)
    np.savetxt(path, table, fmt="%.10g", delimiter=",", header=header, comments="")


def load_sequence(path: str) -> ImuSequence:
    with open(path) as f:
        header = f.readline().strip()
    if header not in (_HEADER_BASE, _HEADER_POS):
        raise ValueError(f"unrecognized sequence header in {path!r}: {header!r}")
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    want = 10 if header == _HEADER_POS else 7
    if table.shape[1] != want:
        raise ValueError(f"{path!r}: expected {want} columns, got {table.shape[1]}")
    positions = table[:, 7:10] if want == 10 else None
    return ImuSequence(table[:, 0], table[:, 1:4], table[:, 4:7], positions)


def stream_windows(seq: ImuSequence, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """All 200-frame windows at the given frame stride.

    Returns (windows (B, 6, 200) float32, start frame indices (B,)):
    window i covers frames [i*stride, i*stride + 199].
    """
    n = len(seq)
    if n < WINDOW:
        raise TooShort(f"sequence has {n} frames, need at least {WINDOW}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    count = (n - WINDOW) // stride + 1
    starts = np.arange(count) * stride
    chans = np.ascontiguousarray(seq.channels(), dtype=np.float32)  # (6, n)
    view = np.lib.stride_tricks.sliding_window_view(chans, WINDOW, axis=1)  # (6, n-199, 200)
    windows = np.ascontiguousarray(view[:, starts].transpose(1, 0, 2))
    return windows, starts


def window_targets(seq: ImuSequence, starts: np.ndarray) -> np.ndarray:
    """Average-velocity labels: displacement over each window divided by
    its actual time span (199 frame intervals)."""
    if seq.positions is None:
        raise MissingGroundTruth("sequence has no ground-truth positions")
    ends = starts + WINDOW - 1
    span = seq.t[ends] - seq.t[starts]
    return (seq.positions[ends] - seq.positions[starts]) / span[:, None]


def make_windows(seq: ImuSequence, stride: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Supervised samples: (windows (B, 6, 200) f32, targets (B, 3) f64,
    start indices (B,)). Requires ground truth."""
    if seq.positions is None:
        raise MissingGroundTruth("sequence has no ground-truth positions")
    windows, starts = stream_windows(seq, stride)
    return windows, window_targets(seq, starts), starts
