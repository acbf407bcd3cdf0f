"""Closed-loop simulation of the manipulator network.

The closed loop is a cascade: the sliding-mode estimators evolve
independently of the arms, and the computed-torque law reduces each arm to
a double integrator commanded by the reference acceleration. One step
advances

  - joint positions/velocities with a classical 4th-order fixed-step
    scheme applied to that reduced form (the torque round trip equals it
    identically, which keeps gravity-on/off trajectories bit-identical),
  - estimator states with forward Euler on the same grid (the estimator
    right side is discontinuous, so a higher-order scheme buys nothing).

Formation and topology switches are pinned to integer step indices at
load, and the active configuration is resolved once per step, so no
integration step ever straddles a switch: the configuration jump happens
between steps. All schedule lookups inside the run loop use step indices,
never accumulated float time.

Torques are evaluated and logged at every sample through the computed-
torque law; the logged triple (state, torque, commanded acceleration) is
what the verification suite replays through the forward dynamics.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .control import Gains, sig_pow
from .dynamics import LeaderSpec, ManipulatorParams, ManipulatorState, leader_state
from .errors import DivergenceError, ValidationError
from .formation import FormationSchedule, formation_at
from .graph import TopologySchedule, leader_reachable, topology_at

__all__ = [
    "DIVERGENCE_LIMIT",
    "InitSpec",
    "SimState",
    "Scenario",
    "TrajectoryLog",
    "initial_state",
    "step",
    "run",
]

# Any state component beyond this magnitude aborts the run with a diagnostic.
DIVERGENCE_LIMIT = 1e9

# Relative slack when checking that times sit on the dt grid.
_GRID_TOL = 1e-6


@dataclass(frozen=True)
class InitSpec:
    """Initial condition: either explicit arrays or a uniform box.

    uniform:  every component of q(0), qdot(0), a_est(0) drawn independently
              from [lo, hi].
    explicit: the given (n, m) arrays are used verbatim.
    """

    kind: str = "uniform"
    lo: float = -6.0
    hi: float = 6.0
    q: np.ndarray | None = None
    qdot: np.ndarray | None = None
    a_est: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "uniform":
            if not self.hi > self.lo:
                raise ValidationError(f"need lo < hi, got [{self.lo}, {self.hi}]", path="init")
        elif self.kind == "explicit":
            for name in ("q", "qdot", "a_est"):
                arr = getattr(self, name)
                if arr is None:
                    raise ValidationError(f"explicit init needs {name}", path=f"init.{name}")
                arr = np.asarray(arr, dtype=float)
                if not np.all(np.isfinite(arr)):
                    raise ValidationError("must be finite", path=f"init.{name}")
                object.__setattr__(self, name, arr)
                arr.setflags(write=False)
        else:
            raise ValidationError(
                f"unknown init kind {self.kind!r} (expected 'uniform' or 'explicit')",
                path="init.kind",
            )


@dataclass(frozen=True)
class SimState:
    """Stacked network state at one instant: arrays of shape (n, m)."""

    q: np.ndarray
    qdot: np.ndarray
    a_est: np.ndarray

    def __post_init__(self):
        for name in ("q", "qdot", "a_est"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)

    def agent(self, i: int) -> ManipulatorState:
        return ManipulatorState(q=self.q[i], qdot=self.qdot[i], a_est=self.a_est[i])


@dataclass(frozen=True)
class Scenario:
    """Complete, validated experiment description.

    Switch times of both schedules must sit on the dt grid strictly inside
    (t0, t_end); the step count must be a whole multiple of sample_every so
    the output grid is uniform through t_end inclusive. When faithful is on,
    every topology entry must be leader-reachable and beta must clear the
    leader's jerk bound; with it off only the reachability requirement is
    dropped (the estimator bound is meaningless below the jerk bound, so
    that check always applies).
    """

    agents: tuple[ManipulatorParams, ...]
    topologies: TopologySchedule
    formations: FormationSchedule
    leader: LeaderSpec
    gains: Gains
    t0: float
    t_end: float
    dt: float
    sample_every: int
    seed: int
    init: InitSpec
    faithful: bool = True
    gravity: bool = True
    expect_failure: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if not self.agents:
            raise ValidationError("need at least one agent", path="agents")
        n = len(self.agents)
        if self.topologies.entries[0][1].n != n:
            raise ValidationError(
                f"topology has {self.topologies.entries[0][1].n} agents, expected {n}",
                path="topology",
            )
        if self.formations.n != n:
            raise ValidationError(
                f"formations have {self.formations.n} agents, expected {n}",
                path="formations",
            )
        if self.formations.m != 2:
            raise ValidationError(
                "two-link arms have 2 generalized coordinates; formation offsets "
                f"must be 2-dimensional, got m={self.formations.m}",
                path="formations",
            )
        if self.leader.m != 2:
            raise ValidationError(
                f"leader must be 2-dimensional, got m={self.leader.m}", path="leader"
            )
        if not self.dt > 0:
            raise ValidationError("must be positive", path="integration.dt")
        if not self.t_end > self.t0:
            raise ValidationError(
                f"t_end={self.t_end} must exceed t0={self.t0}", path="integration.t_end"
            )
        steps_f = (self.t_end - self.t0) / self.dt
        steps = round(steps_f)
        if steps < 1 or abs(steps_f - steps) > _GRID_TOL:
            raise ValidationError(
                f"horizon {self.t_end - self.t0} is not a whole number of dt={self.dt} steps",
                path="integration.t_end",
            )
        if not (isinstance(self.sample_every, int) and self.sample_every >= 1):
            raise ValidationError(
                f"must be a positive integer, got {self.sample_every}",
                path="integration.sample_every",
            )
        if steps % self.sample_every != 0:
            raise ValidationError(
                f"step count {steps} must be a multiple of sample_every={self.sample_every}",
                path="integration.sample_every",
            )
        if abs(self.formations.t_start - self.t0) > _GRID_TOL * self.dt:
            raise ValidationError(
                f"formation schedule starts at {self.formations.t_start}, expected t0={self.t0}",
                path="formations",
            )
        for k, ts in enumerate(self.formations.switch_times):
            self._check_on_grid(ts, steps, f"switch_times[{k}]")
        topo_starts = [s for s, _ in self.topologies.entries]
        if abs(topo_starts[0] - self.t0) > _GRID_TOL * self.dt:
            raise ValidationError(
                f"first topology entry starts at {topo_starts[0]}, expected t0={self.t0}",
                path="topology_schedule[0]",
            )
        for k, ts in enumerate(topo_starts[1:], start=1):
            self._check_on_grid(ts, steps, f"topology_schedule[{k}]")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ValidationError(f"must be a nonnegative integer, got {self.seed}", path="seed")
        if self.init.kind == "explicit":
            for nm in ("q", "qdot", "a_est"):
                arr = getattr(self.init, nm)
                if arr.shape != (n, 2):
                    raise ValidationError(
                        f"must have shape ({n}, 2), got {arr.shape}", path=f"init.{nm}"
                    )
        jerk = self.leader.jerk_bound
        if not self.gains.beta > jerk:
            raise ValidationError(
                f"beta={self.gains.beta} must exceed the leader jerk bound {jerk:.6g}",
                path="gains.beta",
            )
        if self.faithful:
            for k, (_, topo) in enumerate(self.topologies.entries):
                if not leader_reachable(topo):
                    raise ValidationError(
                        "topology is not leader-reachable (some component has no "
                        "pinned agent); set flags.faithful=false to run anyway",
                        path=f"topology_schedule[{k}]",
                    )

    def _check_on_grid(self, ts: float, steps: int, path: str):
        r = (ts - self.t0) / self.dt
        if abs(r - round(r)) > _GRID_TOL:
            raise ValidationError(
                f"time {ts} does not sit on the dt={self.dt} grid", path=path
            )
        if not 0 < round(r) < steps:
            raise ValidationError(
                f"time {ts} must lie strictly inside ({self.t0}, {self.t_end})", path=path
            )

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def steps(self) -> int:
        return round((self.t_end - self.t0) / self.dt)

    @property
    def effective_agents(self) -> tuple[ManipulatorParams, ...]:
        """Per-agent parameters with the gravity flag applied."""
        if self.gravity:
            return self.agents
        return tuple(replace(p, gravity=0.0) for p in self.agents)


@dataclass(frozen=True)
class TrajectoryLog:
    """Uniformly sampled record of one run.

    Per sample: time, per-agent q/qdot/a_est/tau/qdd_cmd (shape (S, n, 2)),
    leader x0/v0/a0 (shape (S, 2)), and the active formation and topology
    indices. qdd_cmd is the commanded acceleration the logged torque was
    computed from; replaying tau through the forward dynamics must
    reproduce it.
    """

    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    a_est: np.ndarray
    tau: np.ndarray
    qdd_cmd: np.ndarray
    x0: np.ndarray
    v0: np.ndarray
    a0: np.ndarray
    formation_idx: np.ndarray
    topology_idx: np.ndarray
    scenario: Scenario = field(repr=False)

    def __post_init__(self):
        for name in (
            "t", "q", "qdot", "a_est", "tau", "qdd_cmd",
            "x0", "v0", "a0", "formation_idx", "topology_idx",
        ):
            getattr(self, name).setflags(write=False)

    @property
    def samples(self) -> int:
        return self.t.shape[0]


@dataclass(frozen=True)
class _DynCoeffs:
    """Per-agent coefficient arrays of the two-link model, shape (n,).

    h11 = a + b cos q2; h12 = d + e cos q2; h22 = d;
    Coriolis factor h = -e sin q2;
    g1 = f cos q1 + g cos(q1+q2); g2 = g cos(q1+q2).
    """

    a: np.ndarray
    b: np.ndarray
    d: np.ndarray
    e: np.ndarray
    f: np.ndarray
    g: np.ndarray

    @staticmethod
    def from_params(agents: tuple[ManipulatorParams, ...]) -> "_DynCoeffs":
        return _DynCoeffs(
            a=np.array([p.m1 * p.lc1**2 + p.i1 + p.m2 * (p.l1**2 + p.lc2**2) + p.i2 for p in agents]),
            b=np.array([2.0 * p.m2 * p.l1 * p.lc2 for p in agents]),
            d=np.array([p.m2 * p.lc2**2 + p.i2 for p in agents]),
            e=np.array([p.m2 * p.l1 * p.lc2 for p in agents]),
            f=np.array([(p.m1 * p.lc1 + p.m2 * p.l1) * p.gravity for p in agents]),
            g=np.array([p.m2 * p.lc2 * p.gravity for p in agents]),
        )


def initial_state(scenario: Scenario) -> SimState:
    """State at t0: explicit arrays verbatim, or seeded uniform draws.

    Random init uses numpy's default_rng (PCG64) seeded with scenario.seed
    and draws q, then qdot, then a_est, each as an (n, 2) block in C order
    (agent-major, coordinate-minor), so the draw sequence is part of the
    determinism contract.
    """
    n = scenario.n
    if scenario.init.kind == "explicit":
        return SimState(
            q=scenario.init.q.copy(),
            qdot=scenario.init.qdot.copy(),
            a_est=scenario.init.a_est.copy(),
        )
    rng = np.random.default_rng(scenario.seed)
    lo, hi = scenario.init.lo, scenario.init.hi
    q = rng.uniform(lo, hi, size=(n, 2))
    qdot = rng.uniform(lo, hi, size=(n, 2))
    a_est = rng.uniform(lo, hi, size=(n, 2))
    return SimState(q=q, qdot=qdot, a_est=a_est)


def _ref_accel(leader_xv, q, qd, a_est, coupling, eta, gains: Gains) -> np.ndarray:
    """Vectorized reference acceleration for all agents, shape (n, 2).

    The consensus sums equal the coupling matrix applied to the stacked
    offset-corrected errors: B (q - eta - x0) and B (qd - v0); the leader
    terms cancel inside neighbor differences and survive only through the
    pinning diagonal, which is how the per-agent law reads.
    """
    x0, v0 = leader_xv
    pos = coupling @ (q - eta - x0)
    vel = coupling @ (qd - v0)
    return a_est - gains.phi(sig_pow(pos, gains.alpha1)) - gains.psi(sig_pow(vel, gains.alpha2))


def _torque(coeffs: _DynCoeffs, q, qd, qdd_r) -> np.ndarray:
    """Vectorized computed-torque law for all agents, shape (n, 2)."""
    c2 = np.cos(q[:, 1])
    h11 = coeffs.a + coeffs.b * c2
    h12 = coeffs.d + coeffs.e * c2
    h22 = coeffs.d
    h = -coeffs.e * np.sin(q[:, 1])
    cqd1 = h * qd[:, 1] * qd[:, 0] + h * (qd[:, 0] + qd[:, 1]) * qd[:, 1]
    cqd2 = -h * qd[:, 0] * qd[:, 0]
    c12 = np.cos(q[:, 0] + q[:, 1])
    g1 = coeffs.f * np.cos(q[:, 0]) + coeffs.g * c12
    g2 = coeffs.g * c12
    return np.stack(
        [
            h11 * qdd_r[:, 0] + h12 * qdd_r[:, 1] + cqd1 + g1,
            h12 * qdd_r[:, 0] + h22 * qdd_r[:, 1] + cqd2 + g2,
        ],
        axis=1,
    )


def _advance(t, dt, q, qd, a_est, coupling, eta, leader: LeaderSpec, gains: Gains):
    """One 4th-order step of the reduced closed loop plus one Euler estimator step.

    a_est is held constant across the four stages; the active coupling
    matrix and offsets are the caller's responsibility and must not change
    inside the step.
    """
    lx0, lv0, la0 = leader_state(leader, t)
    lh = leader_state(leader, t + 0.5 * dt)[:2]
    le = leader_state(leader, t + dt)[:2]

    f1 = _ref_accel((lx0, lv0), q, qd, a_est, coupling, eta, gains)
    q2 = q + (0.5 * dt) * qd
    v2 = qd + (0.5 * dt) * f1
    f2 = _ref_accel(lh, q2, v2, a_est, coupling, eta, gains)
    q3 = q + (0.5 * dt) * v2
    v3 = qd + (0.5 * dt) * f2
    f3 = _ref_accel(lh, q3, v3, a_est, coupling, eta, gains)
    q4 = q + dt * v3
    v4 = qd + dt * f3
    f4 = _ref_accel(le, q4, v4, a_est, coupling, eta, gains)

    q_new = q + (dt / 6.0) * (qd + 2.0 * v2 + 2.0 * v3 + v4)
    qd_new = qd + (dt / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
    a_new = a_est - (gains.beta * dt) * np.sign(coupling @ (a_est - la0))
    return q_new, qd_new, a_new


def _check_finite(t, q, qd, a_est):
    worst = np.abs(np.stack([q, qd, a_est]))
    peak = np.max(worst)
    if not np.isfinite(peak) or peak > DIVERGENCE_LIMIT:
        per_agent = np.nanmax(np.where(np.isfinite(worst), worst, np.inf), axis=(0, 2))
        agent = int(np.argmax(per_agent))
        raise DivergenceError(t, agent, float(peak))


def step(scenario: Scenario, state: SimState, t: float) -> SimState:
    """Advance the full network state from t to t + dt.

    The active topology and formation are resolved at t (right-continuous
    schedules); grid alignment guarantees no switch falls strictly inside
    the step.
    """
    topo = topology_at(scenario.topologies, t)
    _, form = formation_at(scenario.formations, t)
    q, qd, a = _advance(
        t,
        scenario.dt,
        state.q,
        state.qdot,
        state.a_est,
        topo.coupling,
        form.offsets,
        scenario.leader,
        scenario.gains,
    )
    _check_finite(t + scenario.dt, q, qd, a)
    return SimState(q=q, qdot=qd, a_est=a)


def run(scenario: Scenario) -> TrajectoryLog:
    """Integrate the scenario over [t0, t_end] and return the sampled log.

    Deterministic given the scenario (including its seed): reruns produce
    bit-identical logs. Raises DivergenceError with time and agent if any
    state component exceeds the divergence limit.
    """
    n = scenario.n
    dt = scenario.dt
    t0 = scenario.t0
    steps = scenario.steps
    sev = scenario.sample_every
    gains = scenario.gains
    leader = scenario.leader
    coeffs = _DynCoeffs.from_params(scenario.effective_agents)

    form_steps = [round((ts - t0) / dt) for ts in scenario.formations.switch_times]
    topo_steps = [round((s - t0) / dt) for s, _ in scenario.topologies.entries]

    state = initial_state(scenario)
    q = state.q.copy()
    qd = state.qdot.copy()
    a = state.a_est.copy()

    sigma = 0
    eta = scenario.formations.formations[0].offsets
    topo_ptr = 0
    coupling = scenario.topologies.entries[0][1].coupling

    n_samples = steps // sev + 1
    log_t = np.empty(n_samples)
    log_q = np.empty((n_samples, n, 2))
    log_qd = np.empty((n_samples, n, 2))
    log_a = np.empty((n_samples, n, 2))
    log_tau = np.empty((n_samples, n, 2))
    log_cmd = np.empty((n_samples, n, 2))
    log_x0 = np.empty((n_samples, 2))
    log_v0 = np.empty((n_samples, 2))
    log_a0 = np.empty((n_samples, 2))
    log_form = np.empty(n_samples, dtype=np.int64)
    log_topo = np.empty(n_samples, dtype=np.int64)

    def record(slot: int, k: int):
        t_k = t0 + k * dt
        x0, v0, a0 = leader_state(leader, t_k)
        qdd_r = _ref_accel((x0, v0), q, qd, a, coupling, eta, gains)
        log_t[slot] = t_k
        log_q[slot] = q
        log_qd[slot] = qd
        log_a[slot] = a
        log_cmd[slot] = qdd_r
        log_tau[slot] = _torque(coeffs, q, qd, qdd_r)
        log_x0[slot] = x0
        log_v0[slot] = v0
        log_a0[slot] = a0
        log_form[slot] = sigma
        log_topo[slot] = topo_ptr

    for k in range(steps):
        while sigma < len(form_steps) and k == form_steps[sigma]:
            sigma += 1
            eta = scenario.formations.formations[sigma].offsets
        if topo_ptr + 1 < len(topo_steps) and k == topo_steps[topo_ptr + 1]:
            topo_ptr += 1
            coupling = scenario.topologies.entries[topo_ptr][1].coupling
        if k % sev == 0:
            record(k // sev, k)
        q, qd, a = _advance(t0 + k * dt, dt, q, qd, a, coupling, eta, leader, gains)
        _check_finite(t0 + (k + 1) * dt, q, qd, a)

    record(n_samples - 1, steps)

    return TrajectoryLog(
        t=log_t,
        q=log_q,
        qdot=log_qd,
        a_est=log_a,
        tau=log_tau,
        qdd_cmd=log_cmd,
        x0=log_x0,
        v0=log_v0,
        a0=log_a0,
        formation_idx=log_form,
        topology_idx=log_topo,
        scenario=scenario,
    )
