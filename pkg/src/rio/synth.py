"""Synthetic IMU scenario generation with exact ground truth.

Motion is a planar path built from segments (rest, line, arc, sinusoid)
whose speed and heading-rate profiles are closed-form and joined with
quintic smoothstep ramps, so the accelerometer channel is the analytic
second derivative of position and the gyroscope channel is the analytic
heading rate about z. Positions come from high-resolution quadrature of
the same profiles. A multiplicative gait oscillation (speed wobble at a
fixed cadence, amplitude proportional to speed) gives windows enough
texture for a learner to recover speed; world-frame accelerations carry
the heading.

Distribution shifts corrupt the sensor channels only; ground truth is
never touched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import DT, RATE_HZ, ImuSequence
from .errors import InvalidOnset, InvalidSpec
from .geometry import rotate_z
from .seeding import rng_stream

_OVERSAMPLE = 10  # quadrature grid refinement relative to 200 Hz

SEGMENT_KINDS = ("rest", "line", "arc", "sinusoid")
SHIFT_KINDS = ("sensor_yaw_offset", "accel_bias", "gyro_bias", "gain")


@dataclass(frozen=True)
class Segment:
    kind: str
    duration: float
    speed: float = 0.0           # m/s along the path
    turn_rate_dps: float = 0.0   # arc: constant heading rate, deg/s
    weave_dps: float = 0.0       # sinusoid: heading-rate amplitude, deg/s
    weave_freq_hz: float = 0.35  # sinusoid: heading-rate frequency

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise InvalidSpec(f"unknown segment kind {self.kind!r}")
        if self.duration <= 0:
            raise InvalidSpec("segment durations must be positive")
        if self.speed < 0:
            raise InvalidSpec("segment speed must be >= 0")
        if self.kind == "rest" and self.speed != 0.0:
            raise InvalidSpec("rest segments must have zero speed")


@dataclass(frozen=True)
class ShiftSpec:
    """Sensor corruption applied from `onset` seconds onward."""

    kind: str
    value: object        # degrees | 3-vector | scalar gain, per kind
    onset: float = 0.0

    def __post_init__(self):
        if self.kind not in SHIFT_KINDS:
            raise InvalidSpec(f"unknown shift kind {self.kind!r}")
        if self.kind in ("accel_bias", "gyro_bias"):
            v = np.asarray(self.value, dtype=np.float64)
            if v.shape != (3,):
                raise InvalidSpec(f"{self.kind} needs a 3-vector, got shape {v.shape}")
            object.__setattr__(self, "value", tuple(float(x) for x in v))
        else:
            object.__setattr__(self, "value", float(self.value))
        if self.onset < 0:
            raise InvalidOnset("shift onset must be >= 0")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": list(self.value) if isinstance(self.value, tuple) else self.value,
                "onset": self.onset}

    @classmethod
    def from_dict(cls, d: dict) -> "ShiftSpec":
        unknown = set(d) - {"kind", "value", "onset"}
        if unknown:
            raise InvalidSpec(f"unknown shift keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class ScenarioSpec:
    duration: float
    segments: tuple[Segment, ...]
    accel_noise_std: float = 0.05   # m/s^2
    gyro_noise_std: float = 0.005   # rad/s
    seed: int = 0
    gait_freq_hz: float = 1.9
    gait_amp: float = 0.0           # relative speed-oscillation amplitude
    z_bob_amp: float = 0.0          # m of vertical bob per (m/s) of speed
    initial_heading_deg: float = 0.0
    blend_s: float = 0.4            # ramp length joining segments

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.duration <= 0:
            raise InvalidSpec("duration must be positive")
        if not self.segments:
            raise InvalidSpec("at least one segment required")
        if self.accel_noise_std < 0 or self.gyro_noise_std < 0:
            raise InvalidSpec("noise std must be >= 0")
        if not 0 <= self.gait_amp < 0.5:
            raise InvalidSpec("gait_amp must lie in [0, 0.5)")
        if self.blend_s <= 0:
            raise InvalidSpec("blend_s must be positive")
        total = sum(s.duration for s in self.segments)
        if abs(total - self.duration) > 1e-6:
            raise InvalidSpec(f"segment durations sum to {total}, spec says {self.duration}")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "segments"}
        d["segments"] = [vars(s).copy() for s in self.segments]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidSpec(f"unknown scenario keys: {sorted(unknown)}")
        d = dict(d)
        d["segments"] = tuple(Segment(**s) for s in d["segments"])
        return cls(**d)


# ---------------------------------------------------------------------------
# closed-form profiles


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u * u)


def _smoothstep_d(u):
    inside = (u > 0.0) & (u < 1.0)
    uc = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30.0 * uc**2 * (1.0 - uc) ** 2, 0.0)


def _smoothstep_dd(u):
    inside = (u > 0.0) & (u < 1.0)
    uc = np.clip(u, 0.0, 1.0)
    return np.where(inside, 60.0 * uc * (1.0 - uc) * (1.0 - 2.0 * uc), 0.0)


def _boundaries(spec: ScenarioSpec) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum([s.duration for s in spec.segments])])


def _blend_len(spec: ScenarioSpec) -> float:
    shortest = min(s.duration for s in spec.segments)
    return min(spec.blend_s, 0.8 * shortest)


def _speed_profile(spec: ScenarioSpec, t: np.ndarray):
    """Base path speed and its first two time derivatives (no gait)."""
    bounds = _boundaries(spec)
    b = _blend_len(spec)
    speeds = [s.speed for s in spec.segments]
    v = np.full_like(t, speeds[0])
    dv = np.zeros_like(t)
    ddv = np.zeros_like(t)
    for i in range(1, len(speeds)):
        delta = speeds[i] - speeds[i - 1]
        if delta == 0.0:
            continue
        u = (t - bounds[i]) / b + 0.5
        v += delta * _smoothstep(u)
        dv += delta * _smoothstep_d(u) / b
        ddv += delta * _smoothstep_dd(u) / b**2
    return v, dv, ddv


def _heading_rate(spec: ScenarioSpec, t: np.ndarray) -> np.ndarray:
    """Analytic heading rate about z (rad/s), ramped per segment."""
    bounds = _boundaries(spec)
    b = _blend_len(spec)
    rate = np.zeros_like(t)
    last = len(spec.segments) - 1
    for i, seg in enumerate(spec.segments):
        if seg.kind == "arc":
            contrib = np.full_like(t, np.deg2rad(seg.turn_rate_dps))
        elif seg.kind == "sinusoid":
            contrib = np.deg2rad(seg.weave_dps) * np.sin(2.0 * np.pi * seg.weave_freq_hz * (t - bounds[i]))
        else:
            continue
        left = 1.0 if i == 0 else _smoothstep((t - bounds[i]) / b + 0.5)
        right = 0.0 if i == last else _smoothstep((t - bounds[i + 1]) / b + 0.5)
        rate += contrib * (left - right)
    return rate


def _gait(spec: ScenarioSpec, t: np.ndarray):
    """Multiplicative speed modulation 1 + a*(sin + 0.5 sin 2th); the
    asymmetric second harmonic makes the direction of travel (not just its
    line) recoverable from a window."""
    if spec.gait_amp == 0.0:
        one = np.ones_like(t)
        zero = np.zeros_like(t)
        return one, zero, zero
    w = 2.0 * np.pi * spec.gait_freq_hz
    th = w * t
    g = 1.0 + spec.gait_amp * (np.sin(th) + 0.5 * np.sin(2.0 * th))
    dg = spec.gait_amp * (w * np.cos(th) + w * np.cos(2.0 * th))
    ddg = spec.gait_amp * (-(w**2) * np.sin(th) - 2.0 * w**2 * np.sin(2.0 * th))
    return g, dg, ddg


def _cumtrapz(y: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(y)
    np.cumsum((y[1:] + y[:-1]) * (0.5 * h), axis=0, out=out[1:])
    return out


def gen_scenario(spec: ScenarioSpec, seed: int | None = None) -> ImuSequence:
    """Generate one 200 Hz sequence with ground-truth positions.

    Deterministic for a fixed spec; `seed` overrides spec.seed for the
    sensor-noise stream only.
    """
    n = int(round(spec.duration * RATE_HZ)) + 1
    hf = DT / _OVERSAMPLE
    tf = np.arange((n - 1) * _OVERSAMPLE + 1) * hf

    v, dv, ddv = _speed_profile(spec, tf)
    g, dg, _ddg = _gait(spec, tf)
    s = v * g
    ds = dv * g + v * dg
    rate = _heading_rate(spec, tf)
    psi = np.deg2rad(spec.initial_heading_deg) + _cumtrapz(rate, hf)
    c, snp = np.cos(psi), np.sin(psi)

    vel = np.stack([s * c, s * snp, np.zeros_like(s)], axis=1)
    accel = np.stack([ds * c - s * rate * snp, ds * snp + s * rate * c, np.zeros_like(s)], axis=1)
    if spec.z_bob_amp:
        beta = 4.0 * np.pi * spec.gait_freq_hz
        sb, cb = np.sin(beta * tf), np.cos(beta * tf)
        vel[:, 2] = spec.z_bob_amp * (dv * sb + v * beta * cb)
        accel[:, 2] = spec.z_bob_amp * (ddv * sb + 2.0 * dv * beta * cb - v * beta**2 * sb)
    pos = _cumtrapz(vel, hf)

    sl = slice(None, None, _OVERSAMPLE)
    t = np.arange(n) * DT
    acc200 = accel[sl].copy()
    gyro200 = np.zeros((n, 3))
    gyro200[:, 2] = rate[sl]

    rng = rng_stream(spec.seed if seed is None else seed, "noise")
    if spec.accel_noise_std:
        acc200 += rng.normal(0.0, spec.accel_noise_std, acc200.shape)
    if spec.gyro_noise_std:
        gyro200 += rng.normal(0.0, spec.gyro_noise_std, gyro200.shape)
    return ImuSequence(t, acc200, gyro200, pos[sl].copy())


def rest_spans(spec: ScenarioSpec) -> list[tuple[float, float]]:
    """(start, end) seconds of every rest segment; handy for locating the
    stationary gaps between motion modes."""
    bounds = _boundaries(spec)
    return [(float(bounds[i]), float(bounds[i + 1]))
            for i, seg in enumerate(spec.segments) if seg.kind == "rest"]


# ---------------------------------------------------------------------------
# distribution shifts


def inject_shift(seq: ImuSequence, shift: ShiftSpec) -> ImuSequence:
    """Corrupt sensor channels from the shift onset onward; ground-truth
    positions are returned unchanged."""
    duration = seq.t[-1] - seq.t[0]
    if shift.onset >= duration:
        raise InvalidOnset(f"onset {shift.onset}s outside sequence of {duration}s")
    i0 = int(round(shift.onset * RATE_HZ))
    accel = seq.accel.copy()
    gyro = seq.gyro.copy()
    if shift.kind == "sensor_yaw_offset":
        phi = np.deg2rad(shift.value)
        accel[i0:] = rotate_z(phi, accel[i0:])
        gyro[i0:] = rotate_z(phi, gyro[i0:])
    elif shift.kind == "accel_bias":
        accel[i0:] += np.asarray(shift.value)
    elif shift.kind == "gyro_bias":
        gyro[i0:] += np.asarray(shift.value)
    elif shift.kind == "gain":
        accel[i0:] *= shift.value
        gyro[i0:] *= shift.value
    pos = None if seq.positions is None else seq.positions.copy()
    return ImuSequence(seq.t.copy(), accel, gyro, pos)


def inject_shifts(seq: ImuSequence, shifts) -> ImuSequence:
    for shift in shifts:
        seq = inject_shift(seq, shift)
    return seq


# ---------------------------------------------------------------------------
# named presets used throughout the examples and acceptance runs


def _fill_rest(segments: list[Segment], duration: float) -> list[Segment]:
    used = sum(s.duration for s in segments)
    gap = duration - used
    if gap < 0.5:
        # absorb into the last segment instead of a sliver of rest
        last = segments[-1]
        segments[-1] = Segment(last.kind, last.duration + gap, last.speed,
                               last.turn_rate_dps, last.weave_dps, last.weave_freq_hz)
    else:
        segments.append(Segment("rest", gap))
    return segments


def _walk_turns_segments(rng: np.random.Generator, duration: float) -> list[Segment]:
    segs = [Segment("rest", float(rng.uniform(1.0, 2.0)))]
    sign = 1.0 if rng.uniform() < 0.5 else -1.0
    used = segs[0].duration
    while used < duration - 15.0:  # a loop turn adds at most 13 s
        speed = float(rng.uniform(0.9, 1.4))
        line = Segment("line", float(rng.uniform(4.0, 7.0)), speed)
        arc = Segment("arc", float(rng.uniform(3.0, 6.0)), speed,
                      turn_rate_dps=sign * float(rng.uniform(25.0, 55.0)))
        sign = -sign if rng.uniform() < 0.7 else sign
        segs += [line, arc]
        used += line.duration + arc.duration
    segs.append(Segment("line", max(1.0, duration - used - 1.5), float(rng.uniform(0.9, 1.4))))
    return _fill_rest(segs, duration)


def _mode_switch_segments(rng: np.random.Generator, duration: float) -> list[Segment]:
    segs = [Segment("rest", float(rng.uniform(1.0, 1.6)))]
    kinds = ["line", "arc", "sinusoid"]
    used = segs[0].duration
    i = 0
    while used < duration - 11.0:
        kind = kinds[i % 3]
        speed = float(rng.uniform(0.9, 1.4))
        if kind == "line":
            seg = Segment("line", float(rng.uniform(5.0, 7.0)), speed)
        elif kind == "arc":
            seg = Segment("arc", float(rng.uniform(5.0, 7.0)), speed,
                          turn_rate_dps=float(rng.choice([-1.0, 1.0]) * rng.uniform(25.0, 50.0)))
        else:
            seg = Segment("sinusoid", float(rng.uniform(5.0, 7.0)), speed,
                          weave_dps=float(rng.uniform(20.0, 40.0)), weave_freq_hz=float(rng.uniform(0.25, 0.45)))
        gap = Segment("rest", float(rng.uniform(2.5, 3.5)))
        segs += [seg, gap]
        used += seg.duration + gap.duration
        i += 1
    # loop exit guarantees duration - used > 0.5, so this closes exactly
    segs.append(Segment("line", duration - used, float(rng.uniform(0.9, 1.3))))
    return segs


def _stop_and_go_segments(rng: np.random.Generator, duration: float) -> list[Segment]:
    segs = [Segment("rest", float(rng.uniform(1.5, 2.5)))]
    used = segs[0].duration
    while used < duration - 10.5:  # a loop turn adds at most 9 s
        line = Segment("line", float(rng.uniform(4.0, 6.0)), float(rng.uniform(0.9, 1.4)))
        gap = Segment("rest", float(rng.uniform(2.0, 3.0)))
        segs += [line, gap]
        used += line.duration + gap.duration
    segs.append(Segment("line", max(1.0, duration - used - 1.5), float(rng.uniform(0.9, 1.3))))
    return _fill_rest(segs, duration)


def _walk_straight_segments(rng: np.random.Generator, duration: float) -> list[Segment]:
    rest = float(rng.uniform(1.0, 2.0))
    segs = [Segment("rest", rest),
            Segment("line", duration - rest - 1.5, float(rng.uniform(0.9, 1.4)))]
    return _fill_rest(segs, duration)


_PRESET_DEFAULTS = {
    "walk_straight": (_walk_straight_segments, 30.0),
    "walk_turns": (_walk_turns_segments, 60.0),
    "stop_and_go": (_stop_and_go_segments, 30.0),
    "mode_switch_with_rest": (_mode_switch_segments, 36.0),
    "shifted_yaw30": (_walk_turns_segments, 60.0),
}

PRESETS = tuple(_PRESET_DEFAULTS)


def preset_spec(name: str, seed: int, duration: float | None = None) -> tuple[ScenarioSpec, tuple[ShiftSpec, ...]]:
    """Concrete randomized scenario for a named preset.

    Segment speeds, turn rates and durations are drawn from the preset's
    ranges using the 'scenario' stream of `seed`, so different seeds give
    genuinely different paths while staying reproducible.
    """
    if name not in _PRESET_DEFAULTS:
        raise InvalidSpec(f"unknown preset {name!r}; known: {sorted(_PRESET_DEFAULTS)}")
    builder, default_duration = _PRESET_DEFAULTS[name]
    duration = float(duration if duration is not None else default_duration)
    rng = rng_stream(seed, "scenario")
    segments = builder(rng, duration)
    spec = ScenarioSpec(
        duration=duration,
        segments=tuple(segments),
        seed=seed,
        gait_amp=0.12,
        gait_freq_hz=1.9,
        initial_heading_deg=float(rng.uniform(0.0, 360.0)),
    )
    shifts: tuple[ShiftSpec, ...] = ()
    if name == "shifted_yaw30":
        shifts = (ShiftSpec("sensor_yaw_offset", 30.0, onset=0.0),)
    return spec, shifts


def gen_preset(name: str, seed: int, duration: float | None = None) -> ImuSequence:
    """Generate a preset sequence, shifts included."""
    spec, shifts = preset_spec(name, seed, duration)
    return inject_shifts(gen_scenario(spec), shifts)
