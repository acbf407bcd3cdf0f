"""Two-link planar manipulator model and the leader trajectory.

Each agent is a planar arm with two revolute joints obeying

    H(q) qdd + C(q, qd) qd + g(q) = tau,

with the standard two-link closed forms

    H11 = m1 lc1^2 + I1 + m2 (l1^2 + lc2^2 + 2 l1 lc2 cos q2) + I2
    H12 = H21 = m2 (lc2^2 + l1 lc2 cos q2) + I2
    H22 = m2 lc2^2 + I2
    C   = [[h qd2, h (qd1 + qd2)], [-h qd1, 0]],  h = -m2 l1 lc2 sin q2
    g1  = (m1 lc1 + m2 l1) g cos q1 + m2 lc2 g cos(q1 + q2)
    g2  = m2 lc2 g cos(q1 + q2)

H is symmetric positive definite for valid parameters, and dH/dt - 2C is
skew-symmetric (the passivity property the energy tests rely on).

The leader is a double integrator along a prescribed trajectory: either an
analytic circle or a cubic spline through user samples, exposing position,
velocity, and acceleration consistently differentiated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "DEFAULT_PARAMS",
    "ManipulatorParams",
    "ManipulatorState",
    "LeaderSpec",
    "mass_matrix",
    "coriolis_matrix",
    "gravity_vector",
    "forward_dynamics",
    "leader_state",
]


@dataclass(frozen=True)
class ManipulatorParams:
    """Physical constants of one two-link arm (SI units).

    Defaults model two uniform thin rods of 1 m and 1 kg each
    (lc = l/2, I = m l^2 / 12 about the center of mass).
    """

    m1: float = 1.0
    m2: float = 1.0
    l1: float = 1.0
    l2: float = 1.0
    lc1: float = 0.5
    lc2: float = 0.5
    i1: float = 1.0 / 12.0
    i2: float = 1.0 / 12.0
    gravity: float = 9.81

    def __post_init__(self):
        for name in ("m1", "m2", "l1", "l2"):
            if not getattr(self, name) > 0:
                raise ValidationError("must be positive", path=name)
        for com, link in (("lc1", "l1"), ("lc2", "l2")):
            v = getattr(self, com)
            if not 0 < v <= getattr(self, link):
                raise ValidationError(
                    f"center-of-mass distance must lie in (0, {link}]", path=com
                )
        for name in ("i1", "i2"):
            if getattr(self, name) < 0:
                raise ValidationError("must be nonnegative", path=name)
        if self.gravity < 0:
            raise ValidationError("must be nonnegative", path="gravity")


DEFAULT_PARAMS = ManipulatorParams()


@dataclass(frozen=True)
class ManipulatorState:
    """One agent's state: joint positions, velocities, and its estimate of
    the leader acceleration (maintained by the distributed estimator)."""

    q: np.ndarray
    qdot: np.ndarray
    a_est: np.ndarray

    def __post_init__(self):
        for name in ("q", "qdot", "a_est"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValidationError("must be finite", path=name)
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)


def mass_matrix(p: ManipulatorParams, q) -> np.ndarray:
    """Symmetric positive definite inertia matrix H(q), shape (2, 2)."""
    q = np.asarray(q, dtype=float)
    c2 = np.cos(q[1])
    h11 = p.m1 * p.lc1**2 + p.i1 + p.m2 * (p.l1**2 + p.lc2**2 + 2 * p.l1 * p.lc2 * c2) + p.i2
    h12 = p.m2 * (p.lc2**2 + p.l1 * p.lc2 * c2) + p.i2
    h22 = p.m2 * p.lc2**2 + p.i2
    return np.array([[h11, h12], [h12, h22]])


def coriolis_matrix(p: ManipulatorParams, q, qdot) -> np.ndarray:
    """Coriolis/centrifugal matrix C(q, qd) in the factorization that makes
    dH/dt - 2C skew-symmetric."""
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    h = -p.m2 * p.l1 * p.lc2 * np.sin(q[1])
    return np.array(
        [
            [h * qdot[1], h * (qdot[0] + qdot[1])],
            [-h * qdot[0], 0.0],
        ]
    )


def gravity_vector(p: ManipulatorParams, q) -> np.ndarray:
    """Gravity torque g(q), shape (2,)."""
    q = np.asarray(q, dtype=float)
    c1 = np.cos(q[0])
    c12 = np.cos(q[0] + q[1])
    g1 = (p.m1 * p.lc1 + p.m2 * p.l1) * p.gravity * c1 + p.m2 * p.lc2 * p.gravity * c12
    g2 = p.m2 * p.lc2 * p.gravity * c12
    return np.array([g1, g2])


def forward_dynamics(p: ManipulatorParams, q, qdot, tau) -> np.ndarray:
    """Joint acceleration qdd = H(q)^{-1} (tau - C(q, qd) qd - g(q)).

    H is inverted in closed form; positive definiteness guarantees the
    2x2 determinant is bounded away from zero.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    tau = np.asarray(tau, dtype=float)
    h = mass_matrix(p, q)
    rhs = tau - coriolis_matrix(p, q, qdot) @ qdot - gravity_vector(p, q)
    det = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
    return np.array(
        [
            (h[1, 1] * rhs[0] - h[0, 1] * rhs[1]) / det,
            (h[0, 0] * rhs[1] - h[1, 0] * rhs[0]) / det,
        ]
    )


@dataclass(frozen=True)
class LeaderSpec:
    """Leader trajectory: analytic circle or cubic spline through samples.

    circle:  x0(t) = center + radius (cos omega t, sin omega t); velocity and
             acceleration are the analytic derivatives; the jerk supremum is
             radius |omega|^3.
    sampled: a natural cubic spline through (times, positions) samples; the
             velocity/acceleration are the spline's first/second derivatives,
             so the triple is consistent by construction; the jerk supremum is
             the max norm of the (piecewise-constant) third derivative.
    """

    kind: str = "circle"
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    radius: float = 30.0
    omega: float = 0.05 * np.pi
    sample_times: np.ndarray | None = None
    sample_positions: np.ndarray | None = None
    m: int = 2

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", center)
        center.setflags(write=False)
        if self.kind == "circle":
            if center.shape != (2,):
                raise ValidationError(
                    f"circle center must be length 2, got shape {center.shape}",
                    path="center",
                )
            if self.radius < 0:
                raise ValidationError("must be nonnegative", path="radius")
            object.__setattr__(self, "m", 2)
            object.__setattr__(self, "_spline", None)
        elif self.kind == "sampled":
            if self.sample_times is None or self.sample_positions is None:
                raise ValidationError(
                    "sampled leader needs sample_times and sample_positions",
                    path="kind",
                )
            ts = np.asarray(self.sample_times, dtype=float)
            xs = np.asarray(self.sample_positions, dtype=float)
            if ts.ndim != 1 or ts.size < 4:
                raise ValidationError(
                    "need at least 4 sample times for a cubic spline",
                    path="sample_times",
                )
            if np.any(np.diff(ts) <= 0):
                raise ValidationError(
                    "sample times must be strictly increasing", path="sample_times"
                )
            if xs.ndim != 2 or xs.shape[0] != ts.size:
                raise ValidationError(
                    f"sample_positions must be (len(sample_times), m), got {xs.shape}",
                    path="sample_positions",
                )
            from scipy.interpolate import CubicSpline

            spline = CubicSpline(ts, xs, axis=0, bc_type="natural")
            object.__setattr__(self, "sample_times", ts)
            object.__setattr__(self, "sample_positions", xs)
            object.__setattr__(self, "m", int(xs.shape[1]))
            object.__setattr__(self, "_spline", spline)
            ts.setflags(write=False)
            xs.setflags(write=False)
        else:
            raise ValidationError(
                f"unknown leader kind {self.kind!r} (expected 'circle' or 'sampled')",
                path="kind",
            )

    @property
    def jerk_bound(self) -> float:
        """sup over time of the Euclidean norm of the acceleration derivative."""
        if self.kind == "circle":
            return self.radius * abs(self.omega) ** 3
        # Cubic pieces have constant third derivative: evaluate once per piece.
        spline = self._spline
        mids = 0.5 * (self.sample_times[:-1] + self.sample_times[1:])
        jerks = spline(mids, 3)
        return float(np.max(np.linalg.norm(jerks, axis=1)))


def leader_state(spec: LeaderSpec, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Leader (position, velocity, acceleration) at time t."""
    if spec.kind == "circle":
        ang = spec.omega * t
        c, s = np.cos(ang), np.sin(ang)
        x0 = spec.center + spec.radius * np.array([c, s])
        v0 = spec.radius * spec.omega * np.array([-s, c])
        a0 = spec.radius * spec.omega**2 * np.array([-c, -s])
        return x0, v0, a0
    ts = spec.sample_times
    if t < ts[0] or t > ts[-1]:
        raise ValidationError(
            f"t={t} outside the sampled leader domain [{ts[0]}, {ts[-1]}]"
        )
    spline = spec._spline
    return (
        np.asarray(spline(t), dtype=float),
        np.asarray(spline(t, 1), dtype=float),
        np.asarray(spline(t, 2), dtype=float),
    )
