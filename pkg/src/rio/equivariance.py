"""Rotation-equivariance self-supervised loss.

A window and its conjugate (the same window rotated about z) should
produce velocity predictions that differ by exactly that rotation; the
loss scores the angle between the rotated original prediction and the
conjugate prediction with negative cosine similarity, and is gated to
zero for windows whose speed is too low to define a direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InvalidConfig, ZeroVector
from .geometry import rotate_window, rotate_z


@dataclass(frozen=True)
class EquivarianceConfig:
    speed_gate: float = 0.5                                  # m/s, strict '>' to stay active
    ttt_angles_deg: tuple[float, ...] = (72.0, 144.0, 216.0, 288.0)
    stop_gradient_on_rotated: bool = False

    def __post_init__(self):
        if self.speed_gate < 0:
            raise InvalidConfig("speed_gate must be >= 0")
        if not self.ttt_angles_deg or any(not (0.0 < a <= 360.0) for a in self.ttt_angles_deg):
            raise InvalidConfig("angles must lie in (0, 360] degrees")
        object.__setattr__(self, "ttt_angles_deg", tuple(float(a) for a in self.ttt_angles_deg))

    @property
    def ttt_angles_rad(self) -> np.ndarray:
        return np.deg2rad(np.asarray(self.ttt_angles_deg, dtype=np.float64))


def cosine_dissimilarity(v1, v2) -> float:
    """Negative cosine similarity between two 3-vectors, in [-1, 1].

    Raises ZeroVector when either direction is undefined (norm < 1e-9).
    """
    a = np.asarray(v1, dtype=np.float64)
    b = np.asarray(v2, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-9 or nb < 1e-9:
        raise ZeroVector(f"direction undefined for norms ({na:.3g}, {nb:.3g})")
    return float(-np.dot(a, b) / (na * nb))


def aux_loss(v, v_conj, angle: float, cfg: EquivarianceConfig) -> float:
    """Per-pair auxiliary loss value.

    cosine_dissimilarity(rotate_z(angle, v), v_conj) when ||v|| exceeds
    the speed gate, exactly 0 otherwise. A degenerate conjugate direction
    also contributes 0 rather than an error.
    """
    v = np.asarray(v, dtype=np.float64)
    if np.linalg.norm(v) <= cfg.speed_gate:
        return 0.0
    rotated = rotate_z(angle, v)
    nc = np.linalg.norm(np.asarray(v_conj, dtype=np.float64))
    if nc < 1e-9:
        return 0.0
    return cosine_dissimilarity(rotated, v_conj)


def _angle_grid(angles, batch: int) -> np.ndarray:
    """Normalize the angle argument to a (K, B) per-pair matrix.

    Accepts (K,) — each angle applied to every window — or (K, B) with
    one angle per (rotation, window) pair.
    """
    phi = np.asarray(angles, dtype=np.float64)
    if phi.ndim == 1:
        return np.broadcast_to(phi[:, None], (phi.shape[0], batch)).copy()
    if phi.ndim == 2 and phi.shape[1] == batch:
        return phi
    raise InvalidConfig(f"angles must be (K,) or (K, {batch}), got {phi.shape}")


def batch_aux_loss(predict, windows: np.ndarray, angles, cfg: EquivarianceConfig,
                   gate_speeds: np.ndarray | None = None,
                   precomputed: Tensor | None = None) -> tuple[Tensor, int]:
    """Mean auxiliary loss over all K*B (window, angle) pairs.

    predict: callable mapping a (N, 6, 200) array to a Tensor of (N, 3)
    velocities; it is invoked once for the originals (unless `precomputed`
    is supplied) and once for all conjugates, so gradients flow through
    both branches of every pair.

    gate_speeds: per-window speeds to gate on (ground-truth speeds during
    training); defaults to the predicted speeds, which is the test-time
    rule. Gated pairs contribute exactly 0 and are excluded from the
    graph entirely, but still count in the K*B denominator.

    Returns (loss tensor, number of gated pairs).
    """
    windows = np.asarray(windows)
    batch = windows.shape[0]
    phi = _angle_grid(angles, batch)
    k = phi.shape[0]
    total_pairs = k * batch
    if total_pairs == 0:
        raise InvalidConfig("angles must be nonempty")

    v = precomputed if precomputed is not None else predict(windows)
    if not isinstance(v, Tensor):
        v = Tensor(np.asarray(v))
    speeds = np.linalg.norm(v.data.astype(np.float64), axis=1) if gate_speeds is None \
        else np.asarray(gate_speeds, dtype=np.float64)
    active = np.flatnonzero(speeds > cfg.speed_gate)
    gated_pairs = total_pairs - k * active.size
    if active.size == 0:
        return Tensor(np.asarray(0.0, dtype=np.float32)), gated_pairs

    conjugates = np.concatenate(
        [rotate_window(phi[j, active], windows[active]) for j in range(k)], axis=0)
    v_conj = predict(conjugates)
    if not isinstance(v_conj, Tensor):
        v_conj = Tensor(np.asarray(v_conj))

    v_active = ad.take_rows(v, active)
    if cfg.stop_gradient_on_rotated:
        v_active = v_active.detach()
    v_tiled = ad.repeat_rows(v_active, k)
    rotated = ad.rotate_rows(v_tiled, phi[:, active].reshape(-1))
    cos = ad.cosine_sim(rotated, v_conj)
    loss = ad.scale(ad.sum_all(cos), -1.0 / total_pairs)
    return loss, int(gated_pairs)
