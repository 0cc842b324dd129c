"""Streaming inference with the adaptive test-time-training controller.

Windows are sampled from the stream every 10 frames (20 Hz) and buffered
into batches of 128. Per batch the controller looks at the ensemble's
velocity variance and picks one action:

  restore  any window's variance is near zero (stationary): reset every
           member to its pristine parameters
  skip     mean variance below the stop threshold (confident): leave the
           models alone
  update   otherwise: up to `max_updates_per_batch` Adam steps per member
           on the self-supervised equivariance loss built from the four
           fixed conjugate angles

Restore takes precedence over skip. The naive variant updates
unconditionally and never restores; mode 'off' is plain inference.
Velocities are always emitted from the post-action ensemble.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .autodiff import Tensor
from .data import ImuSequence, stream_windows
from .ensemble import EnsembleState, deployed_velocity, ensemble_predict
from .equivariance import EquivarianceConfig, batch_aux_loss
from .errors import InvalidConfig, NonFiniteLoss
from .model import ModelParams, forward_graph, wrap_tensors
from .optim import adam_step, init_adam


class Action(Enum):
    UPDATE = "updated"
    SKIP = "skipped"
    RESTORE = "restored"


@dataclass(frozen=True)
class TttConfig:
    batch_size: int = 128
    sample_stride: int = 10            # frames between windows (20 Hz)
    max_updates_per_batch: int = 5
    stop_threshold: float = 0.04       # (m/s)^2 on the mean variance
    restore_threshold: float = 1e-4    # (m/s)^2 on the min variance
    lr: float = 1e-4
    mode: str = "adaptive"             # adaptive | naive | off
    update_scope: str = "all"          # all | member0
    equivariance: EquivarianceConfig = field(default_factory=EquivarianceConfig)

    def __post_init__(self):
        if self.batch_size < 1 or self.sample_stride < 1 or self.max_updates_per_batch < 1:
            raise InvalidConfig("batch_size, sample_stride and max_updates_per_batch must be >= 1")
        if not self.restore_threshold < self.stop_threshold:
            raise InvalidConfig("restore_threshold must be below stop_threshold")
        if self.mode not in ("adaptive", "naive", "off"):
            raise InvalidConfig(f"unknown ttt mode {self.mode!r}")
        if self.update_scope not in ("all", "member0"):
            raise InvalidConfig("update_scope must be 'all' or 'member0'")
        if self.lr <= 0:
            raise InvalidConfig("lr must be positive")

    @property
    def angles_rad(self) -> np.ndarray:
        return self.equivariance.ttt_angles_rad


@dataclass
class TttEvent:
    batch_index: int
    action: Action
    steps: int
    mean_var: float
    min_var: float
    aux_before: float
    aux_after: float
    non_finite: bool = False


def decide(mean_var: float, min_var: float, cfg: TttConfig) -> Action:
    """Pure controller rule; restore precedence, strict inequalities."""
    if mean_var < 0 or min_var < 0:
        raise ValueError("variances must be >= 0")
    if min_var < cfg.restore_threshold:
        return Action.RESTORE
    if mean_var < cfg.stop_threshold:
        return Action.SKIP
    return Action.UPDATE


def _member_aux(member: ModelParams, windows: np.ndarray, cfg: TttConfig) -> float:
    pt = wrap_tensors(member)
    predict = lambda w: forward_graph(member.config, pt, Tensor(np.asarray(w, dtype=np.float32)))
    loss, _ = batch_aux_loss(predict, windows, cfg.angles_rad, cfg.equivariance)
    return float(loss.data)


def _update_member(member: ModelParams, windows: np.ndarray, cfg: TttConfig) -> tuple[ModelParams, float, int]:
    """Up to max_updates Adam steps on the member's own auxiliary loss.

    Optimizer state is fresh for every batch. Returns the updated member,
    the loss before the first step, and the number of completed steps;
    raises NonFiniteLoss as soon as the loss stops being finite.
    """
    params = dict(member.tensors)
    adam = init_adam(params, lr=cfg.lr)
    first = float("nan")
    steps = 0
    for k in range(cfg.max_updates_per_batch):
        pt = {name: Tensor(arr, requires_grad=True, name=name) for name, arr in params.items()}
        predict = lambda w: forward_graph(member.config, pt, Tensor(np.asarray(w, dtype=np.float32)))
        loss, _ = batch_aux_loss(predict, windows, cfg.angles_rad, cfg.equivariance)
        value = float(loss.data)
        if not np.isfinite(value):
            raise NonFiniteLoss(f"auxiliary loss became {value} at update step {k}")
        if k == 0:
            first = value
        if loss.requires_grad:
            loss.backward()
        grads = {name: (t.grad if t.grad is not None else np.zeros_like(t.data)) for name, t in pt.items()}
        params, adam = adam_step(params, grads, adam)
        steps = k + 1
    return ModelParams(member.config, params, member.seed), first, steps


def ttt_batch(state: EnsembleState, windows: np.ndarray, cfg: TttConfig, batch_index: int = 0,
              variance_override: np.ndarray | None = None) -> tuple[np.ndarray, TttEvent]:
    """Process one buffered batch; mutates `state` on update/restore and
    returns the velocities of the post-action ensemble.

    `variance_override` substitutes the per-window scalar variances fed to
    the controller (testing hook); the real ensemble estimate is used for
    the emitted velocities either way.
    """
    if cfg.mode == "off":
        raise InvalidConfig("ttt_batch is not used in mode 'off'")
    windows = np.asarray(windows, dtype=np.float32)
    est = ensemble_predict(state, windows)
    variances = est.var_scalar if variance_override is None else np.asarray(variance_override, dtype=np.float64)
    if variances.shape != (len(windows),):
        raise InvalidConfig(f"variance override must be ({len(windows)},), got {variances.shape}")
    mean_var = float(variances.mean())
    min_var = float(variances.min())
    action = Action.UPDATE if cfg.mode == "naive" else decide(mean_var, min_var, cfg)

    steps = 0
    aux_before = aux_after = float("nan")
    non_finite = False
    if action is Action.UPDATE:
        member_ids = range(state.size) if cfg.update_scope == "all" else (0,)
        try:
            befores, afters = [], []
            for mi in member_ids:
                updated, first, steps = _update_member(state.members[mi], windows, cfg)
                state.members[mi] = updated
                befores.append(first)
                afters.append(_member_aux(updated, windows, cfg))
            if not np.all(np.isfinite(afters)):
                raise NonFiniteLoss("post-update auxiliary loss non-finite")
            aux_before = float(np.mean(befores))
            aux_after = float(np.mean(afters))
        except NonFiniteLoss:
            state.restore()
            action = Action.RESTORE
            non_finite = True
            aux_after = float("nan")
    elif action is Action.RESTORE:
        state.restore()

    if action is Action.SKIP and state.predictor == "mean":
        velocities = est.mean  # skip leaves the models untouched
    else:
        velocities = deployed_velocity(state, windows)
    event = TttEvent(batch_index, action, steps, mean_var, min_var, aux_before, aux_after, non_finite)
    return velocities, event


def run_stream(state: EnsembleState, seq: ImuSequence, cfg: TttConfig,
               variance_hook=None) -> tuple[np.ndarray, list[TttEvent]]:
    """Causal streaming inference over a whole sequence.

    Windows are emitted every `sample_stride` frames and buffered into
    batches of `batch_size`; the final partial batch follows the same
    rules. `variance_hook(batch_index, window_starts)` may return per-
    window variances to feed the controller instead of the ensemble's
    (or None to keep the real ones).

    Returns (velocities at 20 Hz in time order, event log). Mode 'off'
    performs plain ensemble inference with an empty log.
    """
    windows, starts = stream_windows(seq, cfg.sample_stride)
    if cfg.mode == "off":
        return deployed_velocity(state, windows), []
    velocities = []
    events: list[TttEvent] = []
    for bi, lo in enumerate(range(0, len(windows), cfg.batch_size)):
        batch = windows[lo : lo + cfg.batch_size]
        override = variance_hook(bi, starts[lo : lo + cfg.batch_size]) if variance_hook else None
        vel, event = ttt_batch(state, batch, cfg, batch_index=bi, variance_override=override)
        velocities.append(vel)
        events.append(event)
    return np.concatenate(velocities, axis=0), events


def write_event_log(events: list[TttEvent], path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["batch", "action", "steps", "mean_var", "min_var", "aux_before", "aux_after"])
        for e in events:
            writer.writerow([e.batch_index, e.action.value, e.steps, repr(e.mean_var),
                             repr(e.min_var), repr(e.aux_before), repr(e.aux_after)])


def read_event_log(path: str) -> list[TttEvent]:
    events = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            events.append(TttEvent(int(row["batch"]), Action(row["action"]), int(row["steps"]),
                                   float(row["mean_var"]), float(row["min_var"]),
                                   float(row["aux_before"]), float(row["aux_after"])))
    return events
