"""Joint training: stride-velocity regression plus the rotation-
equivariance auxiliary loss on per-window conjugates.

Every batch draws one fresh rotation angle per window, forwards the
originals and the conjugates through the same parameters, and takes one
Adam step on

    mean velocity loss + aux_weight * mean auxiliary loss,

with the auxiliary term gated per window by the speed gate (ground-truth
speed by default during training; the model's own speed if
`gate_on_prediction` is set). Runs are bitwise reproducible for a fixed
config: init, shuffling and angle draws come from independent named
streams of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .equivariance import EquivarianceConfig, batch_aux_loss
from .errors import InvalidConfig, NonFiniteLoss, ShapeMismatch
from .model import ModelConfig, ModelParams, forward_graph, predict_velocity, wrap_tensors
from .optim import adam_step, init_adam
from .seeding import rng_stream

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    aux_weight: float = 1.0
    window_stride: int = 10
    seed: int = 0
    gate_on_prediction: bool = False
    early_stop_val_ratio: float | None = None
    equivariance: EquivarianceConfig = field(default_factory=EquivarianceConfig)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.window_stride < 1:
            raise InvalidConfig("epochs, batch_size and window_stride must be positive")
        if self.aux_weight < 0:
            raise InvalidConfig("aux_weight must be >= 0")
        if self.lr <= 0:
            raise InvalidConfig("lr must be positive")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    supervised_loss: float
    aux_loss: float
    gated_fraction: float
    val_mse: float


@dataclass(frozen=True)
class TrainStats:
    initial_val_mse: float
    epochs: tuple[EpochStats, ...]


def supervised_velocity_loss(pred, gt) -> float:
    """Per-sample sum of squared component errors, averaged over the batch."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ShapeMismatch(f"supervised_velocity_loss: {p.shape} vs {g.shape}")
    if p.ndim != 2:
        raise ShapeMismatch(f"supervised_velocity_loss expects (B, 3), got {p.shape}")
    return float(np.mean(np.sum((p - g) ** 2, axis=1)))


def sample_train_angles(rng: np.random.Generator, count: int) -> np.ndarray:
    """One rotation per window, uniform on (0, 2*pi]."""
    return TWO_PI - rng.uniform(0.0, TWO_PI, size=count)


def _validation_mse(params: ModelParams, val_set) -> float:
    windows, targets = val_set
    if len(windows) == 0:
        return float("nan")
    return supervised_velocity_loss(predict_velocity(params, windows), targets)


def joint_train(init: ModelParams, train_set, val_set, cfg: TrainConfig) -> tuple[ModelParams, TrainStats]:
    """Run the joint loop over `train_set = (windows, targets)` arrays.

    Returns the trained parameters and per-epoch statistics; the entry
    `initial_val_mse` is the validation loss of the untrained model, the
    reference point for convergence ratios. With aux_weight=0 the
    auxiliary branch is skipped entirely, giving the plain supervised
    loop (angle draws never touch the shuffle stream, so both variants
    see identical batches).
    """
    windows, targets = train_set
    n = len(windows)
    if n == 0:
        raise InvalidConfig("training set is empty")
    windows = np.asarray(windows, dtype=np.float32)
    targets32 = np.asarray(targets, dtype=np.float32)
    gt_speeds = np.linalg.norm(np.asarray(targets, dtype=np.float64), axis=1)

    config = init.config
    params = dict(init.tensors)
    adam = init_adam(params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
    shuffle_rng = rng_stream(cfg.seed, "shuffle")
    angle_rng = rng_stream(cfg.seed, "angles")

    initial_val = _validation_mse(ModelParams(config, params, cfg.seed), val_set)
    stats: list[EpochStats] = []
    batch_index = 0
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        sup_sum = aux_sum = 0.0
        gated = pairs = 0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            batch = windows[idx]
            gt = targets32[idx]
            pt = wrap_tensors(ModelParams(config, params, cfg.seed), requires_grad=True)
            predict = lambda w: forward_graph(config, pt, Tensor(np.asarray(w, dtype=np.float32)))
            v = predict(batch)
            sup = ad.mse_loss(v, gt)
            if cfg.aux_weight > 0:
                phi = sample_train_angles(angle_rng, len(idx))
                gate = None if cfg.gate_on_prediction else gt_speeds[idx]
                aux, gated_pairs = batch_aux_loss(predict, batch, phi[None, :], cfg.equivariance,
                                                  gate_speeds=gate, precomputed=v)
                total = ad.add(sup, ad.scale(aux, cfg.aux_weight))
                aux_sum += float(aux.data) * len(idx)
                gated += gated_pairs
                pairs += len(idx)
            else:
                total = sup
            if not np.isfinite(total.data):
                raise NonFiniteLoss(f"non-finite loss in epoch {epoch}, batch {batch_index}")
            total.backward()
            grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in pt.items()}
            params, adam = adam_step(params, grads, adam)
            sup_sum += float(sup.data) * len(idx)
            batch_index += 1
        val = _validation_mse(ModelParams(config, params, cfg.seed), val_set)
        stats.append(EpochStats(
            epoch=epoch,
            supervised_loss=sup_sum / n,
            aux_loss=(aux_sum / n) if cfg.aux_weight > 0 else 0.0,
            gated_fraction=(gated / pairs) if pairs else 0.0,
            val_mse=val,
        ))
        if (cfg.early_stop_val_ratio is not None and np.isfinite(val)
                and val < cfg.early_stop_val_ratio * initial_val):
            break
    return ModelParams(config, params, cfg.seed), TrainStats(initial_val, tuple(stats))


def build_dataset(sequences, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Pool windows and targets from many sequences into one dataset."""
    from .data import make_windows

    all_w, all_t = [], []
    for seq in sequences:
        w, t, _ = make_windows(seq, stride)
        all_w.append(w)
        all_t.append(t)
    return np.concatenate(all_w, axis=0), np.concatenate(all_t, axis=0)
