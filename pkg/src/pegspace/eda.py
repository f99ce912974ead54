"""Elementary dynamic actions: submovements, oscillations and impedance.

Coordinates follow the KUKA Sunrise convention used throughout the package:
translations x, y, z and rotations C (about x), B (about y), A (about z).
Six-vectors are always ordered ``[x, y, z, C, B, A]`` so that they line up
with the stiffness vector ``[k_x, k_y, k_z, k_C, k_B, k_A]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PARAM_NAMES = ("k_x", "k_y", "k_z", "k_C", "k_B", "k_A", "zeta_t", "zeta_r")

# Renderable ranges of the robot controller, one row per parameter.
GLOBAL_BOUNDS = np.array(
    [
        [50.0, 1000.0],
        [50.0, 1000.0],
        [50.0, 1000.0],
        [5.0, 200.0],
        [5.0, 200.0],
        [5.0, 200.0],
        [0.1, 0.9],
        [0.1, 0.9],
    ]
)

AXES = ("x", "y", "z", "C", "B", "A")

DEFAULT_INERTIA = (4.0, 4.0, 4.0, 0.1, 0.1, 0.1)


class InvalidProfileError(ValueError):
    pass


@dataclass(frozen=True)
class ImpedanceParams:
    """The eight impedance values varied in the assembly experiments.

    Stiffnesses are in N/m (translational) and Nm/rad (rotational); the two
    damping ratios are dimensionless.
    """

    k_x: float
    k_y: float
    k_z: float
    k_C: float
    k_B: float
    k_A: float
    zeta_t: float
    zeta_r: float

    def __post_init__(self):
        values = self.as_array()
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ValueError(f"impedance parameters must be finite and positive: {values}")
        bad = (values < GLOBAL_BOUNDS[:, 0]) | (values > GLOBAL_BOUNDS[:, 1])
        if np.any(bad):
            names = [n for n, b in zip(PARAM_NAMES, bad) if b]
            raise ValueError(f"parameters outside renderable bounds: {names}")

    @classmethod
    def from_array(cls, values) -> "ImpedanceParams":
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != (8,):
            raise ValueError(f"expected 8 impedance values, got {values.shape[0]}")
        return cls(*(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=float)

    @property
    def stiffness(self) -> np.ndarray:
        return self.as_array()[:6]

    @property
    def damping_ratios(self) -> np.ndarray:
        """Per-axis damping ratio, translational then rotational."""
        return np.array([self.zeta_t] * 3 + [self.zeta_r] * 3)


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True)
class Pose:
    position: tuple = (0.0, 0.0, 0.0)
    # A about z, B about y, C about x
    A: float = 0.0
    B: float = 0.0
    C: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(p) for p in self.position))
        for name in ("A", "B", "C"):
            object.__setattr__(self, name, wrap_angle(getattr(self, name)))

    def as_vector(self) -> np.ndarray:
        return np.array([*self.position, self.C, self.B, self.A])

    @classmethod
    def from_vector(cls, q) -> "Pose":
        q = np.asarray(q, dtype=float)
        return cls(position=tuple(q[:3]), C=q[3], B=q[4], A=q[5])


@dataclass(frozen=True)
class Wrench:
    force: tuple = (0.0, 0.0, 0.0)
    moment: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        f = tuple(float(v) for v in self.force)
        m = tuple(float(v) for v in self.moment)
        if len(f) != 3 or len(m) != 3:
            raise ValueError("force and moment must be 3-vectors")
        if not all(math.isfinite(v) for v in f + m):
            raise ValueError("wrench components must be finite")
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "moment", m)

    def as_vector(self) -> np.ndarray:
        return np.array(self.force + self.moment)

    @classmethod
    def from_vector(cls, w) -> "Wrench":
        w = np.asarray(w, dtype=float)
        return cls(tuple(w[:3]), tuple(w[3:6]))

    def __add__(self, other: "Wrench") -> "Wrench":
        return superpose(self, other)

    def __neg__(self) -> "Wrench":
        return Wrench.from_vector(-self.as_vector())


ZERO_WRENCH = Wrench()


@dataclass(frozen=True)
class SubmovementProfile:
    amplitude_v: tuple = field(default=(0.0,) * 6)
    duration_T: float = 1.0
    start_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "amplitude_v", tuple(float(v) for v in self.amplitude_v))
        if not self.duration_T > 0:
            raise InvalidProfileError("submovement duration must be positive")
        if not self.start_time >= 0:
            raise InvalidProfileError("submovement start time must be non-negative")


@dataclass(frozen=True)
class OscillationProfile:
    amplitude_A: float = 0.006
    frequency_f: float = 4.5
    axis: str = "A"

    def __post_init__(self):
        if not self.frequency_f > 0:
            raise InvalidProfileError("oscillation frequency must be positive")
        if self.axis not in AXES:
            raise InvalidProfileError(f"unknown axis {self.axis!r}")


def min_jerk_speed(tau):
    """Minimum-jerk speed shape scaled to unit peak; zero outside (0, 1)."""
    tau = np.asarray(tau, dtype=float)
    inside = (tau > 0) & (tau < 1)
    s = np.where(inside, 16.0 * tau**2 * (1.0 - tau) ** 2, 0.0)
    return float(s) if s.ndim == 0 else s


def min_jerk_progress(tau):
    """Integral of :func:`min_jerk_speed` from 0 to ``tau``; equals 8/15 at tau >= 1."""
    tau = np.clip(np.asarray(tau, dtype=float), 0.0, 1.0)
    p = 16.0 * (tau**3 / 3.0 - tau**4 / 2.0 + tau**5 / 5.0)
    return float(p) if p.ndim == 0 else p


def submovement_basis(t, profile: SubmovementProfile):
    return min_jerk_speed((np.asarray(t, dtype=float) - profile.start_time) / profile.duration_T)


def submovement_velocity(t, profile: SubmovementProfile) -> np.ndarray:
    return np.asarray(profile.amplitude_v) * submovement_basis(t, profile)


def submovement_displacement(t, profile: SubmovementProfile) -> np.ndarray:
    tau = (float(t) - profile.start_time) / profile.duration_T
    return np.asarray(profile.amplitude_v) * profile.duration_T * min_jerk_progress(tau)


def velocity_for_displacement(displacement, duration):
    """Velocity amplitude whose submovement covers ``displacement`` in ``duration``."""
    return np.asarray(displacement, dtype=float) * 15.0 / (8.0 * duration)


def oscillation_offset(t, profile: OscillationProfile):
    if not profile.frequency_f > 0:
        raise InvalidProfileError("oscillation frequency must be positive")
    out = profile.amplitude_A * np.sin(2.0 * np.pi * profile.frequency_f * np.asarray(t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def oscillation_velocity(t, profile: OscillationProfile):
    w = 2.0 * np.pi * profile.frequency_f
    out = profile.amplitude_A * w * np.cos(w * np.asarray(t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def damping_coefficients(params: ImpedanceParams, inertia=DEFAULT_INERTIA) -> np.ndarray:
    """Per-axis damping b = 2 zeta sqrt(k m)."""
    inertia = np.asarray(inertia, dtype=float)
    if inertia.shape != (6,) or np.any(~(inertia > 0)):
        raise ValueError("inertia must be six positive values")
    return 2.0 * params.damping_ratios * np.sqrt(params.stiffness * inertia)


def impedance_wrench(
    params: ImpedanceParams,
    x0: Pose,
    x: Pose,
    v0=np.zeros(6),
    v=np.zeros(6),
    inertia=DEFAULT_INERTIA,
) -> Wrench:
    """Wrench of a diagonal spring-damper pulling ``x`` toward the virtual pose ``x0``.

    Angular errors are taken per axis (small-angle, decoupled) and wrapped.
    Twists ``v0`` and ``v`` are ordered like pose vectors.
    """
    b = damping_coefficients(params, inertia)
    dx = x0.as_vector() - x.as_vector()
    dx[3:] = wrap_angle(dx[3:])
    dv = np.asarray(v0, dtype=float) - np.asarray(v, dtype=float)
    return Wrench.from_vector(params.stiffness * dx + b * dv)


def superpose(w1: Wrench, w2: Wrench) -> Wrench:
    return Wrench.from_vector(w1.as_vector() + w2.as_vector())
