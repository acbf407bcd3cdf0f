"""Error signals and property checks computed from trajectory logs.

The tracking objective is threefold: offset-corrected positions agree
across neighbors, the group centroid follows the leader, and velocities
match the leader's. All three collapse to per-agent error norms

    eq_i = ||q_i - eta_i - x0||,  eqd_i = ||qd_i - v0||,  ea_i = ||a_i - a0||

plus the derived centroid and max-pairwise errors. Settling on a dwell
interval means entering and *staying* below tolerance until the interval
ends, which is the discrete-time reading of finite-time convergence.

The Lyapunov function V = V1 + V2 evaluated here is the one whose decrease
certifies convergence of the reduced closed loop after the estimators have
settled: V1 integrates the position shaping along each component of
y = B qbar (closed form for linear shaping), and V2 is the B-weighted
kinetic energy of the velocity errors.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .control import Gains, sig_pow
from .dynamics import LeaderSpec, forward_dynamics, leader_state
from .errors import ValidationError
from .formation import FormationSchedule
from .graph import Topology, _components, topology_at
from .sim import Scenario, TrajectoryLog, run

__all__ = [
    "ErrorSeries",
    "IntervalSettle",
    "SettleReport",
    "HomogeneityReport",
    "error_series",
    "settle_report",
    "lyapunov_series",
    "homogeneity_residual",
    "necessity_check",
    "linearization_residual",
    "estimator_settle_time",
]


@dataclass(frozen=True)
class ErrorSeries:
    """Per-sample error norms; eq/eqd/ea are (S, n), the rest (S,).

    ea_inf carries the per-agent max-component estimate error alongside the
    Euclidean ea because the estimator settle threshold is stated in the
    max norm. formation_idx/topology_idx are copied from the log so settle
    logic never re-derives dwell membership from float timestamps.
    """

    t: np.ndarray
    eq: np.ndarray
    eqd: np.ndarray
    ea: np.ndarray
    ea_inf: np.ndarray
    centroid: np.ndarray
    maxpair: np.ndarray
    formation_idx: np.ndarray
    topology_idx: np.ndarray

    def __post_init__(self):
        for name in ("t", "eq", "eqd", "ea", "ea_inf", "centroid", "maxpair",
                     "formation_idx", "topology_idx"):
            getattr(self, name).setflags(write=False)


@dataclass(frozen=True)
class IntervalSettle:
    """Settle verdict for one dwell interval [t_start, t_end)."""

    index: int
    t_start: float
    t_end: float
    settle_time: float | None
    settled: bool


@dataclass(frozen=True)
class SettleReport:
    intervals: tuple[IntervalSettle, ...]
    estimator_settle: float | None = None
    tf_bound: float | None = None

    @property
    def all_settled(self) -> bool:
        return all(iv.settled for iv in self.intervals)


def error_series(log: TrajectoryLog, fs: FormationSchedule, leader: LeaderSpec) -> ErrorSeries:
    """All error norms per sample, using the formation active at each sample.

    The schedule must be the one the log was produced under (same start,
    same formation count); the active index per sample comes from the log.
    """
    if abs(fs.t_start - log.t[0]) > 1e-9:
        raise ValidationError(
            f"schedule starts at {fs.t_start} but the log starts at {log.t[0]}"
        )
    if fs.switch_times and fs.switch_times[-1] >= log.t[-1]:
        raise ValidationError(
            f"schedule switches at {fs.switch_times[-1]} but the log ends at {log.t[-1]}"
        )
    if int(log.formation_idx.max()) >= len(fs.formations):
        raise ValidationError(
            f"log references formation {int(log.formation_idx.max())} but the "
            f"schedule has only {len(fs.formations)}"
        )
    x0_ref = leader_state(leader, float(log.t[0]))[0]
    if not np.allclose(x0_ref, log.x0[0], atol=1e-9):
        raise ValidationError("leader spec does not match the leader recorded in the log")

    offsets = np.stack([f.offsets for f in fs.formations])  # (k+1, n, m)
    etas = offsets[log.formation_idx]  # (S, n, m)

    qbar = log.q - etas - log.x0[:, None, :]
    qdbar = log.qdot - log.v0[:, None, :]
    abar = log.a_est - log.a0[:, None, :]

    eq = np.linalg.norm(qbar, axis=2)
    eqd = np.linalg.norm(qdbar, axis=2)
    ea = np.linalg.norm(abar, axis=2)
    ea_inf = np.max(np.abs(abar), axis=2)
    centroid = np.linalg.norm(log.q.mean(axis=1) - log.x0, axis=1)

    u = log.q - etas
    pair = u[:, :, None, :] - u[:, None, :, :]
    maxpair = np.max(np.linalg.norm(pair, axis=3), axis=(1, 2))

    return ErrorSeries(
        t=log.t.copy(),
        eq=eq,
        eqd=eqd,
        ea=ea,
        ea_inf=ea_inf,
        centroid=centroid,
        maxpair=maxpair,
        formation_idx=log.formation_idx.copy(),
        topology_idx=log.topology_idx.copy(),
    )


def _first_stay_below(t: np.ndarray, ok: np.ndarray) -> float | None:
    """First time from which ok stays true through the end; None if never."""
    if ok.size == 0:
        return None
    stay = np.logical_and.accumulate(ok[::-1])[::-1]
    idx = np.argmax(stay)
    if not stay[idx]:
        return None
    return float(t[idx])


def estimator_settle_time(es: ErrorSeries, est_tol: float) -> float | None:
    """First sample time from which every agent's max-component estimate
    error stays below est_tol through the end of the log."""
    return _first_stay_below(es.t, np.max(es.ea_inf, axis=1) < est_tol)


def settle_report(
    es: ErrorSeries,
    fs: FormationSchedule,
    tol: float = 1e-2,
    vel_tol: float | None = None,
    est_tol: float | None = None,
    tf_bound: float | None = None,
) -> SettleReport:
    """Enter-and-stay settle verdicts per dwell interval.

    An interval settles at the first sample after which every agent's
    position error stays below tol and velocity error below vel_tol
    (default 5*tol) until the interval's last sample. est_tol, when given,
    adds the estimator settle time (max-norm threshold over the whole log);
    tf_bound is carried through for reporting against it.
    """
    if not tol > 0:
        raise ValidationError("must be positive", path="tol")
    if vel_tol is None:
        vel_tol = 5.0 * tol
    intervals = []
    bounds = fs.dwell_intervals(float(es.t[-1]))
    for s, (t_lo, t_hi) in enumerate(bounds):
        mask = es.formation_idx == s
        ok = (np.max(es.eq[mask], axis=1) < tol) & (np.max(es.eqd[mask], axis=1) < vel_tol)
        settle = _first_stay_below(es.t[mask], ok)
        intervals.append(
            IntervalSettle(
                index=s,
                t_start=t_lo,
                t_end=t_hi,
                settle_time=settle,
                settled=settle is not None,
            )
        )
    est = estimator_settle_time(es, est_tol) if est_tol is not None else None
    return SettleReport(intervals=tuple(intervals), estimator_settle=est, tf_bound=tf_bound)


def lyapunov_series(
    log: TrajectoryLog,
    topology: Topology,
    fs: FormationSchedule,
    leader: LeaderSpec,
    gains: Gains,
) -> tuple[np.ndarray, np.ndarray]:
    """(times, V) from the estimator-settle sample to the end of the log.

    V1 sums, over the components of y = B qbar, the integral of the
    position shaping phi(sig(.)^alpha1) from 0 to y(k): in closed form
    c |y|^(1+alpha1)/(1+alpha1) for linear phi, by adaptive quadrature
    (abs/rel tolerance 1e-10) otherwise. V2 = 1/2 qdbar^T (B x I) qdbar.
    The window from settle to the end must not cross a topology switch.
    """
    dt = log.scenario.dt
    est_tol = 10.0 * gains.beta * dt
    abar = log.a_est - log.a0[:, None, :]
    ea_inf = np.max(np.abs(abar), axis=(1, 2))
    start = _first_stay_below(log.t, ea_inf < est_tol)
    if start is None:
        raise ValidationError(
            f"estimator never settles below {est_tol:.3g}; no valid window"
        )
    i0 = int(np.searchsorted(log.t, start))
    if np.any(log.topology_idx[i0:] != log.topology_idx[i0]):
        raise ValidationError(
            "window from estimator settle to the log end crosses a topology switch"
        )

    b = topology.coupling
    offsets = np.stack([f.offsets for f in fs.formations])
    etas = offsets[log.formation_idx[i0:]]
    qbar = log.q[i0:] - etas - log.x0[i0:, None, :]
    qdbar = log.qdot[i0:] - log.v0[i0:, None, :]

    y = np.einsum("ij,sjc->sic", b, qbar)
    alpha1 = gains.alpha1
    if gains.phi.kind == "linear":
        v1 = gains.phi.c * np.sum(np.abs(y) ** (1.0 + alpha1), axis=(1, 2)) / (1.0 + alpha1)
    else:
        from scipy.integrate import quad

        flat = np.abs(y).reshape(y.shape[0], -1)
        v1 = np.empty(flat.shape[0])
        for s in range(flat.shape[0]):
            total = 0.0
            for yk in flat[s]:
                if yk > 0:
                    val, _ = quad(
                        lambda sig: float(gains.phi(sig**alpha1)),
                        0.0,
                        yk,
                        epsabs=1e-10,
                        epsrel=1e-10,
                        limit=200,
                    )
                    total += val
            v1[s] = total

    bv = np.einsum("ij,sjc->sic", b, qdbar)
    v2 = 0.5 * np.sum(qdbar * bv, axis=(1, 2))
    return log.t[i0:].copy(), v1 + v2


@dataclass(frozen=True)
class HomogeneityReport:
    """Max relative residual of the dilation identity, with the degree and
    dilation exponents it was checked against."""

    residual: float
    degree: float
    dilation: tuple[float, float]


def homogeneity_residual(
    gains: Gains,
    coupling: np.ndarray,
    samples: int,
    epsilons,
    m: int = 2,
    seed: int = 0,
) -> HomogeneityReport:
    """Verify the dilation identity of the reduced error field numerically.

    With linear shaping the reduced field f(z1, z2) = (z2,
    -c1 sig(B z1)^a1 - c2 sig(B z2)^a2) satisfies, exactly,

        f(eps^2 z1, eps^(a1+1) z2) = (eps^(a1+1) z2, eps^(2 a1) f2(z1, z2)),

    i.e. it is homogeneous of degree a1 - 1 under the dilation
    (2, a1+1) on (positions, velocities); the exponent pairing
    a2 (a1+1) = 2 a1 is what makes the velocity term line up. Returns the
    max over random samples, epsilons, and components of
    |f_i(scaled z) - eps^(degree + gamma_i) f_i(z)| / max(|f_i(z)|, 1e-300).

    Nonlinear shaping only satisfies the identity asymptotically near the
    origin, so it is rejected here.
    """
    if gains.phi.kind != "linear" or gains.psi.kind != "linear":
        raise ValidationError(
            "the dilation identity is exact only for linear shaping", path="gains"
        )
    b = np.asarray(coupling, dtype=float)
    n = b.shape[0]
    alpha1, alpha2 = gains.alpha1, gains.alpha2
    c1, c2 = gains.phi.c, gains.psi.c
    degree = alpha1 - 1.0
    g_pos, g_vel = 2.0, alpha1 + 1.0

    def field(z1, z2):
        f_pos = z2
        f_vel = -c1 * sig_pow(b @ z1, alpha1) - c2 * sig_pow(b @ z2, alpha2)
        return f_pos, f_vel

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        z1 = rng.standard_normal((n, m))
        z2 = rng.standard_normal((n, m))
        f_pos, f_vel = field(z1, z2)
        for eps in epsilons:
            if not eps > 0:
                raise ValidationError(f"epsilons must be positive, got {eps}")
            s_pos, s_vel = field(eps**g_pos * z1, eps**g_vel * z2)
            for lhs, ref, gamma in (
                (s_pos, f_pos, g_pos),
                (s_vel, f_vel, g_vel),
            ):
                rhs = eps ** (degree + gamma) * ref
                rel = np.abs(lhs - rhs) / np.maximum(np.abs(ref), 1e-300)
                worst = max(worst, float(rel.max()))
    return HomogeneityReport(residual=worst, degree=degree, dilation=(g_pos, g_vel))


def necessity_check(scenario: Scenario, tol: float, horizon: float) -> bool:
    """Run a deliberately unreachable scenario and ask whether tracking failed.

    The isolated subset is read off the topology active at the horizon:
    agents in components with no pinned member. Returns True iff some
    isolated agent's position error exceeds tol at the horizon end.
    Requires the faithfulness flag off, a genuinely isolated subset, and a
    leader that actually accelerates (a resting leader can be tracked by
    coincidence).
    """
    if scenario.faithful:
        raise ValidationError(
            "necessity check needs flags.faithful off; a faithful scenario "
            "satisfies the reachability hypothesis by construction"
        )
    topo = topology_at(scenario.topologies, horizon)
    labels = _components(topo.weights)
    isolated = np.zeros(topo.n, dtype=bool)
    for root in np.unique(labels):
        members = labels == root
        if not np.any(topo.pinning[members] > 0):
            isolated |= members
    if not np.any(isolated):
        raise ValidationError(
            "every component is pinned; the scenario satisfies the "
            "reachability hypothesis and the check is vacuous"
        )
    if scenario.leader.kind == "circle":
        accel_peak = scenario.leader.radius * scenario.leader.omega**2
    else:
        ts = np.linspace(scenario.t0, horizon, 1001)
        accel_peak = max(
            float(np.linalg.norm(leader_state(scenario.leader, t)[2])) for t in ts
        )
    if not accel_peak > 0:
        raise ValidationError(
            "leader acceleration is identically zero; an isolated subset can "
            "track it by coincidence, so the check is inconclusive"
        )

    if horizon != scenario.t_end:
        scenario = replace(scenario, t_end=horizon)
    log = run(scenario)
    es = error_series(log, scenario.formations, scenario.leader)
    return bool(np.any(es.eq[-1, isolated] > tol))


def linearization_residual(log: TrajectoryLog) -> float:
    """Max over logged samples and agents of |forward dynamics of the logged
    torque minus the logged commanded acceleration| (max component).

    Replays every logged (q, qdot, tau) through the manipulator model, so a
    defect anywhere in the inertia/Coriolis/gravity terms or in the torque
    assembly shows up here.
    """
    agents = log.scenario.effective_agents
    worst = 0.0
    for s in range(log.samples):
        for i, p in enumerate(agents):
            qdd = forward_dynamics(p, log.q[s, i], log.qdot[s, i], log.tau[s, i])
            worst = max(worst, float(np.max(np.abs(qdd - log.qdd_cmd[s, i]))))
    return worst
