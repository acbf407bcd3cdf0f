"""Distributed control and estimation laws.

Each agent runs three coupled pieces of local computation:

  reference acceleration
      qdd_r = a_i - phi(sig(pos consensus sum)^alpha1)
                  - psi(sig(vel consensus sum)^alpha2)
      where the consensus sums combine offset-corrected differences to
      neighbors plus, for pinned agents, the difference to the leader;

  computed torque
      tau = H(q) qdd_r + C(q, qd) qd + g(q),
      which cancels the manipulator nonlinearities exactly so the joint
      acceleration equals qdd_r;

  sliding-mode estimator
      da_i/dt = -beta sgn(sum_j w_ij (a_i - a_j) + p_i (a_i - a_0)),
      driving every agent's leader-acceleration estimate a_i to a_0 in
      finite time provided beta exceeds the leader's jerk bound.

The fractional sig powers (0 < alpha1 < 1, alpha2 = 2 alpha1/(alpha1+1))
make the consensus error dynamics homogeneous of negative degree, which
upgrades asymptotic convergence to finite-time convergence.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ManipulatorParams, coriolis_matrix, gravity_vector, mass_matrix
from .errors import ValidationError

__all__ = [
    "ShapingFunction",
    "Gains",
    "NeighborInfo",
    "NeighborView",
    "sig_pow",
    "derive_alpha2",
    "reference_accel",
    "inverse_dynamics_torque",
    "estimator_rhs",
    "estimator_settle_bound",
    "views_from_state",
]

SHAPING_KINDS = ("linear", "sat", "tanh")


@dataclass(frozen=True)
class ShapingFunction:
    """Odd scalar field applied component-wise, with origin slope c.

    linear: c z
    sat:    c delta sat(z / delta)   (clamped linear, saturates at c delta)
    tanh:   c delta tanh(z / delta)  (smooth saturation at c delta)

    All three satisfy f(-z) = -f(z), z f(z) > 0 for z != 0, and
    f(z) = c z + o(z) near the origin; the origin slope is what the local
    homogeneity analysis of the closed loop depends on.
    """

    kind: str = "linear"
    c: float = 100.0
    delta: float = 1.0

    def __post_init__(self):
        if self.kind not in SHAPING_KINDS:
            raise ValidationError(
                f"unknown shaping kind {self.kind!r} (expected one of {SHAPING_KINDS})",
                path="kind",
            )
        if not self.c > 0:
            raise ValidationError("gain must be positive", path="c")
        if not self.delta > 0:
            raise ValidationError("scale must be positive", path="delta")

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "linear":
            return self.c * z
        if self.kind == "sat":
            return self.c * np.clip(z, -self.delta, self.delta)
        return self.c * self.delta * np.tanh(z / self.delta)


def derive_alpha2(alpha1: float) -> float:
    """The paired velocity exponent 2 alpha1 / (alpha1 + 1), always in (0, 1).

    This exact pairing is what makes the consensus error field homogeneous
    (degree alpha1 - 1 < 0 under the position/velocity dilation (2, alpha1+1)),
    so it is derived, never configured.
    """
    if not 0 < alpha1 < 1:
        raise ValidationError(
            f"alpha1 must lie in (0, 1), got {alpha1}", path="alpha1"
        )
    return 2.0 * alpha1 / (alpha1 + 1.0)


@dataclass(frozen=True)
class Gains:
    """Control gains; alpha2 is derived from alpha1 on construction."""

    alpha1: float
    beta: float
    phi: ShapingFunction
    psi: ShapingFunction
    alpha2: float = None  # type: ignore[assignment]  # always overwritten below

    def __post_init__(self):
        object.__setattr__(self, "alpha2", derive_alpha2(self.alpha1))
        if not self.beta > 0:
            raise ValidationError("must be positive", path="beta")


@dataclass(frozen=True)
class NeighborInfo:
    """What agent i knows about one neighbor j: edge weight and j's state."""

    weight: float
    q: np.ndarray
    qdot: np.ndarray
    a_est: np.ndarray
    eta: np.ndarray


@dataclass(frozen=True)
class NeighborView:
    """Exactly the information one agent's laws may read at one instant.

    Own state (q, qdot, a_est), own formation offset eta, the pinning
    weight, the neighbor states with edge weights, and - only when the
    agent is pinned - the leader triple (x0, v0, a0).
    """

    q: np.ndarray
    qdot: np.ndarray
    a_est: np.ndarray
    eta: np.ndarray
    pin: float
    neighbors: tuple[NeighborInfo, ...]
    leader: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        if self.pin > 0 and self.leader is None:
            raise ValidationError("pinned agent needs the leader state", path="leader")


def sig_pow(z, kappa: float) -> np.ndarray:
    """Component-wise |z_k|^kappa sign(z_k); continuous and odd for kappa > 0."""
    if not kappa > 0:
        raise ValidationError(f"exponent must be positive, got {kappa}", path="kappa")
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.abs(z) ** kappa


def _consensus_sums(view: NeighborView) -> tuple[np.ndarray, np.ndarray]:
    """Position and velocity consensus sums for one agent.

    pos = sum_j w_ij ((q_i - q_j) - (eta_i - eta_j)) + p_i (q_i - eta_i - x0)
    vel = sum_j w_ij (qd_i - qd_j) + p_i (qd_i - v0)
    """
    pos = np.zeros_like(view.q)
    vel = np.zeros_like(view.qdot)
    for nb in view.neighbors:
        pos = pos + nb.weight * ((view.q - nb.q) - (view.eta - nb.eta))
        vel = vel + nb.weight * (view.qdot - nb.qdot)
    if view.pin > 0:
        x0, v0, _ = view.leader
        pos = pos + view.pin * (view.q - view.eta - x0)
        vel = vel + view.pin * (view.qdot - v0)
    return pos, vel


def reference_accel(view: NeighborView, g: Gains) -> np.ndarray:
    """Commanded joint acceleration for one agent.

    a_i minus the shaped fractional powers of the position and velocity
    consensus sums. Zero consensus errors with a_i = a0 give exactly a0,
    i.e. the formation rides along with the leader.
    """
    m = view.q.shape[0]
    for nb in view.neighbors:
        if nb.q.shape != (m,):
            raise ValidationError(
                f"neighbor state has dimension {nb.q.shape}, expected ({m},)"
            )
    pos, vel = _consensus_sums(view)
    return view.a_est - g.phi(sig_pow(pos, g.alpha1)) - g.psi(sig_pow(vel, g.alpha2))


def inverse_dynamics_torque(p: ManipulatorParams, q, qdot, qddot_r) -> np.ndarray:
    """Computed-torque law tau = H(q) qdd_r + C(q, qd) qd + g(q).

    Feeding this torque back through the forward dynamics returns qdd_r
    identically; the manipulator then behaves as a double integrator
    commanded by qdd_r.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    qddot_r = np.asarray(qddot_r, dtype=float)
    return (
        mass_matrix(p, q) @ qddot_r
        + coriolis_matrix(p, q, qdot) @ qdot
        + gravity_vector(p, q)
    )


def estimator_rhs(view: NeighborView, g: Gains) -> np.ndarray:
    """Sliding-mode estimator derivative -beta sgn(acceleration consensus sum).

    sgn acts component-wise with sgn(0) = 0, so exact consensus is a fixed
    point of the discrete update as well.
    """
    s = np.zeros_like(view.a_est)
    for nb in view.neighbors:
        s = s + nb.weight * (view.a_est - nb.a_est)
    if view.pin > 0:
        _, _, a0 = view.leader
        s = s + view.pin * (view.a_est - a0)
    return -g.beta * np.sign(s)


def estimator_settle_bound(
    t0: float, coupling: np.ndarray, abar0: np.ndarray, beta: float, jerk_bound: float
) -> float:
    """Upper bound on the time by which every estimate reaches the leader acceleration.

        T_f = t0 + sqrt(2 lambda_max V0) / (lambda_min (beta - jerk_bound)),
        V0 = 1/2 abar0^T (B (x) I_m) abar0,

    where abar0 stacks the initial estimate errors a_i - a0 and lambda are the
    extreme eigenvalues of the coupling matrix B. Requires beta above the
    leader's jerk bound; otherwise the sliding surface need not be reached and
    the bound is undefined.
    """
    if not beta > jerk_bound:
        raise ValidationError(
            f"beta={beta} must exceed the leader jerk bound {jerk_bound}", path="beta"
        )
    b = np.asarray(coupling, dtype=float)
    n = b.shape[0]
    abar = np.asarray(abar0, dtype=float).reshape(n, -1)
    eigs = np.linalg.eigvalsh(b)
    lam_min, lam_max = float(eigs[0]), float(eigs[-1])
    if not lam_min > 0:
        raise ValidationError(
            "coupling matrix is not positive definite (topology not leader-reachable)"
        )
    # Blockwise quadratic form: abar^T (B (x) I_m) abar = sum_c abar[:,c]^T B abar[:,c].
    v0 = 0.5 * float(np.sum(abar * (b @ abar)))
    return t0 + np.sqrt(2.0 * lam_max * v0) / (lam_min * (beta - jerk_bound))


def views_from_state(
    topology,
    offsets: np.ndarray,
    leader_triple: tuple[np.ndarray, np.ndarray, np.ndarray],
    q: np.ndarray,
    qdot: np.ndarray,
    a_est: np.ndarray,
) -> list[NeighborView]:
    """Assemble every agent's NeighborView from global (n, m) state arrays.

    Convenience glue for tests and offline checks; the leader triple is
    attached only to pinned agents.
    """
    n = topology.n
    views = []
    for i in range(n):
        neighbors = tuple(
            NeighborInfo(
                weight=float(topology.weights[i, j]),
                q=q[j],
                qdot=qdot[j],
                a_est=a_est[j],
                eta=offsets[j],
            )
            for j in range(n)
            if topology.weights[i, j] > 0
        )
        pin = float(topology.pinning[i])
        views.append(
            NeighborView(
                q=q[i],
                qdot=qdot[i],
                a_est=a_est[i],
                eta=offsets[i],
                pin=pin,
                neighbors=neighbors,
                leader=leader_triple if pin > 0 else None,
            )
        )
    return views
