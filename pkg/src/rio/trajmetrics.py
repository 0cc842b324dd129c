"""Velocity integration and trajectory evaluation metrics.

Estimated velocity series (20 Hz window-center estimates) are integrated
into positions and compared against ground truth with three metrics:

  ate      RMSE between the trajectories as a whole
  rte      RMSE of relative-displacement errors over a fixed time
           interval (default 1 minute, 1 s hop)
  d_drift  absolute path-length difference over ground-truth length

Ground truth at 200 Hz is decimated to the 20 Hz estimate grid, offset
to window centers, before comparison.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .data import WINDOW, ImuSequence
from .errors import LengthMismatch, MissingGroundTruth, TooShort, ZeroLengthGroundTruth
from .geometry import umeyama_align


@dataclass(frozen=True)
class Trajectory:
    positions: np.ndarray  # (n, 3) meters
    rate: float            # Hz
    t0: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError(f"positions must be (n, 3), got {p.shape}")
        if not np.isfinite(p).all():
            raise ValueError("positions contain non-finite values")
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        object.__setattr__(self, "positions", p)

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class TrajMetrics:
    ate: float
    rte: float
    d_drift: float


def integrate(velocities, rate: float, origin=(0.0, 0.0, 0.0), t0: float = 0.0) -> Trajectory:
    """Euler integration: P_0 = origin, P_{k+1} = P_k + v_k / rate."""
    v = np.asarray(velocities, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != 3:
        raise ValueError(f"velocities must be (n, 3), got {v.shape}")
    if rate <= 0:
        raise ValueError("rate must be positive")
    pos = np.empty((v.shape[0] + 1, 3))
    pos[0] = np.asarray(origin, dtype=np.float64)
    np.cumsum(v / rate, axis=0, out=pos[1:])
    pos[1:] += pos[0]
    return Trajectory(pos, rate, t0)


def _paired(est: Trajectory, gt: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    if len(est) != len(gt):
        raise LengthMismatch(f"trajectories differ in length: {len(est)} vs {len(gt)}")
    if len(est) < 1:
        raise LengthMismatch("empty trajectories")
    return est.positions, gt.positions


def ate(est: Trajectory, gt: Trajectory) -> float:
    """Root mean squared pointwise position error."""
    p, q = _paired(est, gt)
    return float(np.sqrt(np.mean(np.sum((p - q) ** 2, axis=1))))


def rte(est: Trajectory, gt: Trajectory, interval_s: float = 60.0, hop_s: float = 1.0,
        style: str = "relative") -> float:
    """Relative trajectory error over windows of `interval_s` seconds.

    style 'relative' (default): RMSE over start times (1 s hop) of
    ||(est_end - est_start) - (gt_end - gt_start)||, which cancels any
    constant offset of the estimate.

    style 'aligned_window': each window of the estimate is rigidly
    re-aligned to ground truth before taking its RMSE; the result is the
    RMS over windows of those per-window RMSEs.
    """
    p, q = _paired(est, gt)
    if est.rate != gt.rate:
        raise LengthMismatch(f"trajectory rates differ: {est.rate} vs {gt.rate}")
    delta = int(round(interval_s * est.rate))
    hop = max(1, int(round(hop_s * est.rate)))
    if len(est) - 1 < delta:
        raise TooShort(f"trajectory spans {(len(est) - 1) / est.rate:.2f}s, RTE needs {interval_s}s")
    starts = np.arange(0, len(est) - delta, hop)
    if style == "relative":
        d = (p[starts + delta] - p[starts]) - (q[starts + delta] - q[starts])
        return float(np.sqrt(np.mean(np.sum(d * d, axis=1))))
    if style == "aligned_window":
        errs = []
        for s in starts:
            _, aligned = umeyama_align(p[s : s + delta + 1], q[s : s + delta + 1])
            errs.append(np.mean(np.sum((aligned - q[s : s + delta + 1]) ** 2, axis=1)))
        return float(np.sqrt(np.mean(errs)))
    raise ValueError(f"unknown rte style {style!r}")


def path_length(positions: np.ndarray) -> float:
    p = np.asarray(positions, dtype=np.float64)
    return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))


def d_drift(est: Trajectory, gt: Trajectory) -> float:
    """|len(est) - len(gt)| / len(gt) using polyline path lengths."""
    gt_len = path_length(gt.positions)
    if gt_len <= 0:
        raise ZeroLengthGroundTruth("ground-truth path has zero length")
    return float(abs(path_length(est.positions) - gt_len) / gt_len)


# ---------------------------------------------------------------------------
# sequence-level evaluation


def gt_trajectory(seq: ImuSequence, stride: int = 10) -> Trajectory:
    """Ground truth decimated to the estimate grid: every `stride`-th frame
    starting at the center of the first window."""
    if seq.positions is None:
        raise MissingGroundTruth("sequence has no ground-truth positions")
    center = WINDOW // 2
    pos = seq.positions[center::stride]
    return Trajectory(pos, 200.0 / stride, t0=float(seq.t[center]))


def reconstruct(est_velocities: np.ndarray, seq: ImuSequence, stride: int = 10) -> tuple[Trajectory, Trajectory]:
    """Integrate estimated velocities against the matching decimated ground
    truth; both trajectories are cropped to their common length.

    Velocity k is treated as the average velocity around the center of
    window k, and integration starts from the ground-truth position at the
    first window center.
    """
    gt = gt_trajectory(seq, stride)
    v = np.asarray(est_velocities, dtype=np.float64)
    est = integrate(v, 200.0 / stride, origin=gt.positions[0], t0=gt.t0)
    n = min(len(est), len(gt))
    return (Trajectory(est.positions[:n], est.rate, est.t0),
            Trajectory(gt.positions[:n], gt.rate, gt.t0))


def evaluate_sequence(est_velocities: np.ndarray, seq: ImuSequence, policy: str = "aligned",
                      rte_interval_s: float | None = 60.0, rte_style: str = "relative",
                      stride: int = 10) -> TrajMetrics:
    """All three metrics for one sequence.

    policy 'aligned': the reconstructed trajectory is compared directly
    (sensor and ground-truth frames already agree). policy 'umeyama':
    the whole estimate is rigidly aligned to ground truth first.
    rte_interval_s=None skips RTE (reported as nan).
    """
    est, gt = reconstruct(est_velocities, seq, stride)
    if policy == "umeyama":
        _, aligned = umeyama_align(est.positions, gt.positions)
        est = Trajectory(aligned, est.rate, est.t0)
    elif policy != "aligned":
        raise ValueError(f"unknown policy {policy!r}")
    rte_val = float("nan") if rte_interval_s is None else rte(est, gt, rte_interval_s, style=rte_style)
    return TrajMetrics(ate(est, gt), rte_val, d_drift(est, gt))


# ---------------------------------------------------------------------------
# report files


def write_metrics_csv(path: str, rows: list[dict]) -> None:
    """rows: dicts with keys sequence, ate_m, rte_m, d_drift."""
    os.makedirs(os.path.dirname(os.path.abspath(path)) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["sequence", "ate_m", "rte_m", "d_drift"])
        for row in rows:
            writer.writerow([row["sequence"], repr(float(row["ate_m"])),
                             repr(float(row["rte_m"])), repr(float(row["d_drift"]))])


def write_metrics_summary(path: str, rows: list[dict]) -> None:
    """JSON aggregate: per-scenario and overall means of each metric."""
    scenarios: dict[str, list[dict]] = {}
    for row in rows:
        scenarios.setdefault(row.get("scenario", "default"), []).append(row)

    def agg(group):
        out = {}
        for k in ("ate_m", "rte_m", "d_drift"):
            vals = np.asarray([g[k] for g in group], dtype=float)
            finite = vals[np.isfinite(vals)]
            out[k] = float(finite.mean()) if finite.size else float("nan")
        out["count"] = len(group)
        return out

    summary = {
        "per_scenario": {name: agg(group) for name, group in sorted(scenarios.items())},
        "overall": agg(rows),
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)) or ".", exist_ok=True)
    with open(path, "w") as f:
        json.dump(summary, f, indent=1, sort_keys=True)
