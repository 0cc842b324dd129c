"""Deep-ensemble training and variance-based predictive uncertainty.

M models are trained independently (each with its own init and shuffle
seed); at prediction time the ensemble mean is the velocity estimate and
the population variance of member outputs is the uncertainty signal that
drives the test-time-training controller.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidConfig, ShapeMismatch, VersionMismatch
from .model import ModelConfig, ModelParams, init_model, load_checkpoint, predict_velocity, save_checkpoint
from .training import TrainConfig, TrainStats, joint_train

ENSEMBLE_MANIFEST_VERSION = 1
VARIANCE_REDUCTIONS = ("sum", "max", "norm")


@dataclass
class EnsembleState:
    members: list[ModelParams]
    pristine: tuple[ModelParams, ...]   # snapshots for restore; never mutated
    member_seeds: tuple[int, ...]
    variance_reduction: str = "sum"
    predictor: str = "mean"             # mean | member0

    def __post_init__(self):
        if len(self.members) < 2:
            raise InvalidConfig("an ensemble needs at least 2 members")
        if self.variance_reduction not in VARIANCE_REDUCTIONS:
            raise InvalidConfig(f"variance_reduction must be one of {VARIANCE_REDUCTIONS}")
        if self.predictor not in ("mean", "member0"):
            raise InvalidConfig("predictor must be 'mean' or 'member0'")

    @property
    def size(self) -> int:
        return len(self.members)

    def restore(self) -> None:
        """Reset every member to its pristine snapshot (bitwise)."""
        self.members = [p.copy() for p in self.pristine]


@dataclass(frozen=True)
class EnsembleEstimate:
    mean: np.ndarray        # (B, 3) m/s
    var: np.ndarray         # (B, 3) per-component population variance
    var_scalar: np.ndarray  # (B,) reduced variance used for gating


def train_ensemble(model_cfg: ModelConfig, train_set, val_set, cfg: TrainConfig,
                   member_seeds) -> tuple[EnsembleState, list[TrainStats]]:
    """Train one member per seed; each gets its own init and data order."""
    seeds = tuple(int(s) for s in member_seeds)
    if len(seeds) < 2:
        raise InvalidConfig("need at least 2 member seeds")
    members: list[ModelParams] = []
    stats: list[TrainStats] = []
    for seed in seeds:
        init = init_model(model_cfg, seed)
        trained, st = joint_train(init, train_set, val_set, replace(cfg, seed=seed))
        members.append(trained)
        stats.append(st)
    state = EnsembleState(members, tuple(m.copy() for m in members), seeds)
    return state, stats


def member_predictions(state: EnsembleState, windows: np.ndarray) -> np.ndarray:
    """(M, B, 3) stacked member outputs."""
    return np.stack([predict_velocity(m, windows) for m in state.members])


def ensemble_predict(state: EnsembleState, windows: np.ndarray) -> EnsembleEstimate:
    """Mean and population variance of member predictions.

    Variance divides by M (not M-1); the scalar reduction across the three
    components is configured on the state (default: sum).
    """
    preds = member_predictions(state, windows).astype(np.float64)
    mean = preds.mean(axis=0)
    var = np.mean((preds - mean) ** 2, axis=0)
    if state.variance_reduction == "sum":
        var_scalar = var.sum(axis=1)
    elif state.variance_reduction == "max":
        var_scalar = var.max(axis=1)
    else:
        var_scalar = np.linalg.norm(var, axis=1)
    return EnsembleEstimate(mean, var, var_scalar)


def deployed_velocity(state: EnsembleState, windows: np.ndarray) -> np.ndarray:
    """The velocity series the pipeline reports downstream."""
    if state.predictor == "member0":
        return predict_velocity(state.members[0], windows).astype(np.float64)
    return ensemble_predict(state, windows).mean


# ---------------------------------------------------------------------------
# on-disk layout: member checkpoints + a manifest with order and seeds


def save_ensemble(state: EnsembleState, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    stems = [f"member_{i:02d}" for i in range(state.size)]
    for stem, member in zip(stems, state.members):
        save_checkpoint(member, os.path.join(directory, stem))
    manifest = {
        "format_version": ENSEMBLE_MANIFEST_VERSION,
        "members": stems,
        "seeds": list(state.member_seeds),
        "variance_reduction": state.variance_reduction,
        "predictor": state.predictor,
    }
    with open(os.path.join(directory, "ensemble.json"), "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)


def load_ensemble(directory: str) -> EnsembleState:
    """Load members in manifest order; pristine snapshots are taken from
    the freshly loaded parameters."""
    with open(os.path.join(directory, "ensemble.json")) as f:
        manifest = json.load(f)
    if manifest.get("format_version") != ENSEMBLE_MANIFEST_VERSION:
        raise VersionMismatch(f"ensemble manifest version {manifest.get('format_version')}")
    members = [load_checkpoint(os.path.join(directory, stem)) for stem in manifest["members"]]
    if len({m.config for m in members}) > 1:
        raise ShapeMismatch("ensemble members disagree on model config")
    return EnsembleState(
        members,
        tuple(m.copy() for m in members),
        tuple(int(s) for s in manifest["seeds"]),
        manifest.get("variance_reduction", "sum"),
        manifest.get("predictor", "mean"),
    )
