"""Horizontal (z-axis) rotations of vectors and IMU windows, plus rigid
least-squares trajectory alignment.

Angles are radians everywhere inside the library; degrees appear only at
CLI/config boundaries. All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput

TWO_PI = 2.0 * np.pi


def normalize_angle(angle: float) -> float:
    """Map an angle to the canonical interval (0, 2*pi]."""
    a = float(angle) % TWO_PI
    return TWO_PI if a == 0.0 else a


def rotation_z_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotate_z(angle, v) -> np.ndarray:
    """Rotate 3-vector(s) about the z axis.

    `v` has shape (..., 3); `angle` is a scalar or an array broadcastable
    against the leading axes of `v`. The z component is untouched and the
    Euclidean norm is preserved. Result keeps the dtype of `v`.
    """
    v = np.asarray(v)
    if v.shape[-1] != 3:
        raise ValueError(f"rotate_z expects (..., 3) vectors, got {v.shape}")
    c = np.cos(angle)
    s = np.sin(angle)
    x, y = v[..., 0], v[..., 1]
    out = np.empty(v.shape, dtype=np.float64)
    out[..., 0] = c * x - s * y
    out[..., 1] = s * x + c * y
    out[..., 2] = v[..., 2]
    return out.astype(v.dtype, copy=False)


def rotate_window(angle, window) -> np.ndarray:
    """Rotate every accelerometer and gyroscope sample of an IMU window.

    `window` is (6, T) or a batch (B, 6, T) laid out as channels
    (ax, ay, az, wx, wy, wz); `angle` is a scalar, or (B,) for a batch.
    Timestamps are not part of the array and are unaffected.
    """
    w = np.asarray(window)
    if w.shape[-2] != 6:
        raise ValueError(f"rotate_window expects (..., 6, T) windows, got {w.shape}")
    c = np.asarray(np.cos(angle))
    s = np.asarray(np.sin(angle))
    if c.ndim > 0:  # per-window angles broadcast over the time axis
        c = c.reshape(c.shape + (1,))
        s = s.reshape(s.shape + (1,))
    out = np.empty(w.shape, dtype=np.float64)
    for i in (0, 3):  # accel pair, gyro pair
        out[..., i, :] = c * w[..., i, :] - s * w[..., i + 1, :]
        out[..., i + 1, :] = s * w[..., i, :] + c * w[..., i + 1, :]
    out[..., 2, :] = w[..., 2, :]
    out[..., 5, :] = w[..., 5, :]
    return out.astype(w.dtype, copy=False)


@dataclass(frozen=True)
class RigidTransform:
    """Similarity transform p -> scale * R @ p + t (scale defaults to 1)."""

    rotation: np.ndarray       # (3, 3), orthonormal, det +1
    translation: np.ndarray    # (3,)
    scale: float = 1.0

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9) or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must be orthonormal with determinant +1")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return self.scale * (p @ self.rotation.T) + self.translation

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3), 1.0)


def umeyama_align(est, gt, with_scale: bool = False) -> tuple[RigidTransform, np.ndarray]:
    """Least-squares transform mapping `est` onto `gt`, and the mapped points.

    Closed-form similarity alignment: the returned transform minimises
    ||scale * R @ est_i + t - gt_i||^2. With `with_scale=False` (default)
    the fit is rigid and scale is pinned to 1.

    Raises DegenerateInput for fewer than 3 points or a zero-variance
    point set, where the alignment is under-determined.
    """
    x = np.asarray(est, dtype=np.float64)
    y = np.asarray(gt, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"trajectories must have equal shape, got {x.shape} vs {y.shape}")
    n = x.shape[0]
    if n < 3:
        raise DegenerateInput(f"need at least 3 points to align, got {n}")
    mu_x = x.mean(axis=0)
    mu_y = y.mean(axis=0)
    xc = x - mu_x
    yc = y - mu_y
    var_x = (xc * xc).sum() / n
    var_y = (yc * yc).sum() / n
    if var_x < 1e-18 or var_y < 1e-18:
        raise DegenerateInput("zero-variance point set; alignment under-determined")
    cov = yc.T @ xc / n
    u, d, vt = np.linalg.svd(cov)
    s_diag = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s_diag[2] = -1.0
    rotation = u @ np.diag(s_diag) @ vt
    scale = float((d * s_diag).sum() / var_x) if with_scale else 1.0
    translation = mu_y - scale * rotation @ mu_x
    transform = RigidTransform(rotation, translation, scale)
    return transform, transform.apply(x)
