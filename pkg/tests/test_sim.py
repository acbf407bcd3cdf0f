"""Scenario validation, integration loop, and determinism mechanics."""
import numpy as np
import pytest
from dataclasses import replace

from formation_sim import (
    DEFAULT_PARAMS,
    DivergenceError,
    Formation,
    FormationSchedule,
    Gains,
    InitSpec,
    LeaderSpec,
    Scenario,
    ShapingFunction,
    TopologySchedule,
    ValidationError,
    build_topology,
    estimator_rhs,
    initial_state,
    inverse_dynamics_torque,
    reference_accel,
    run,
    sig_pow,
    step,
    views_from_state,
)
from formation_sim.control import NeighborView


def _gains(alpha1=0.2, beta=4.0, c=100.0):
    return Gains(alpha1=alpha1, beta=beta,
                 phi=ShapingFunction(c=c), psi=ShapingFunction(c=c))


def _scenario(n=1, t_end=0.5, dt=1e-3, sample_every=1, seed=1, switch_times=(),
              n_formations=1, **kw):
    w = np.zeros((n, n))
    for i in range(n - 1):
        w[i, i + 1] = w[i + 1, i] = 1.0
    pins = np.zeros(n)
    pins[0] = 1.0
    topo = build_topology(w, pins)
    forms = tuple(
        Formation(np.zeros((n, 2))) if n == 1
        else Formation((k + 1.0) * _ring(n)) for k in range(n_formations)
    )
    defaults = dict(
        agents=tuple(DEFAULT_PARAMS for _ in range(n)),
        topologies=TopologySchedule(((0.0, topo),)),
        formations=FormationSchedule(forms, tuple(switch_times)),
        leader=LeaderSpec(),
        gains=_gains(),
        t0=0.0,
        t_end=t_end,
        dt=dt,
        sample_every=sample_every,
        seed=seed,
        init=InitSpec(),
    )
    defaults.update(kw)
    return Scenario(**defaults)


def _ring(n):
    ang = 2 * np.pi * np.arange(n) / n
    out = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return out - out.mean(axis=0)


def test_scenario_grid_validation():
    with pytest.raises(ValidationError, match="whole number"):
        _scenario(t_end=0.5005)
    with pytest.raises(ValidationError, match="sample_every"):
        _scenario(t_end=0.5, sample_every=7)  # 500 % 7 != 0
    with pytest.raises(ValidationError, match="grid"):
        _scenario(n=2, t_end=1.0, switch_times=(0.50037,), n_formations=2)
    with pytest.raises(ValidationError, match="strictly inside"):
        _scenario(n=2, t_end=1.0, switch_times=(1.0,), n_formations=2)
    with pytest.raises(ValidationError, match="dt"):
        _scenario(dt=-1e-3)


def test_scenario_cross_validation():
    with pytest.raises(ValidationError, match="topology has"):
        _scenario(n=2, topologies=TopologySchedule(
            ((0.0, build_topology(np.zeros((3, 3)), [1.0, 0, 0])),)))
    sc = _scenario()
    with pytest.raises(ValidationError, match="beta"):
        replace(sc, gains=_gains(beta=0.05))  # below the leader jerk bound
    with pytest.raises(ValidationError, match="init.q"):
        replace(sc, init=InitSpec(kind="explicit", q=np.zeros((3, 2)),
                                  qdot=np.zeros((1, 2)), a_est=np.zeros((1, 2))))
    with pytest.raises(ValidationError, match="seed"):
        replace(sc, seed=-1)


def test_faithful_flag_gates_reachability():
    topo = build_topology(np.zeros((2, 2)), [1.0, 0.0])  # agent 1 unreachable
    kw = dict(
        n=2,
        topologies=TopologySchedule(((0.0, topo),)),
        formations=FormationSchedule((Formation(_ring(2)),), ()),
    )
    with pytest.raises(ValidationError, match="faithful"):
        _scenario(**kw)
    sc = _scenario(**kw, faithful=False)
    assert not sc.faithful


def test_initial_state_seeded_draws():
    """Uniform init draws q, then qdot, then a_est as (n, 2) blocks from
    default_rng(seed); the draw order is part of the determinism contract."""
    sc = _scenario(n=3, t_end=0.1)
    st = initial_state(sc)
    rng = np.random.default_rng(sc.seed)
    assert np.array_equal(st.q, rng.uniform(-6.0, 6.0, (3, 2)))
    assert np.array_equal(st.qdot, rng.uniform(-6.0, 6.0, (3, 2)))
    assert np.array_equal(st.a_est, rng.uniform(-6.0, 6.0, (3, 2)))
    st2 = initial_state(sc)
    assert np.array_equal(st.q, st2.q)
    assert np.all((st.q >= -6.0) & (st.q <= 6.0))


def test_initial_state_explicit_passthrough():
    q = np.array([[0.1, 0.2]])
    qd = np.array([[0.3, 0.4]])
    a = np.array([[0.5, 0.6]])
    sc = _scenario(init=InitSpec(kind="explicit", q=q, qdot=qd, a_est=a))
    st = initial_state(sc)
    assert np.array_equal(st.q, q)
    assert np.array_equal(st.qdot, qd)
    assert np.array_equal(st.a_est, a)


def test_step_matches_run_samples_bitwise():
    sc = _scenario(n=2, t_end=0.05, sample_every=1)
    log = run(sc)
    state = initial_state(sc)
    for k in range(sc.steps + 1):
        assert np.array_equal(log.q[k], state.q)
        assert np.array_equal(log.qdot[k], state.qdot)
        assert np.array_equal(log.a_est[k], state.a_est)
        if k < sc.steps:
            state = step(sc, state, sc.t0 + k * sc.dt)


def test_log_shapes_and_grid():
    sc = _scenario(n=2, t_end=0.5, sample_every=10)
    log = run(sc)
    assert log.samples == 51
    assert log.q.shape == (51, 2, 2)
    assert np.allclose(log.t, np.arange(51) * 0.01, atol=1e-12)
    with pytest.raises(ValueError):
        log.q[0, 0, 0] = 1.0


def test_schedule_indices_flip_on_exact_sample_boundaries():
    topo_a = build_topology(np.zeros((1, 1)), [1.0])
    topo_b = build_topology(np.zeros((1, 1)), [2.0])
    sc = _scenario(
        t_end=0.4,
        sample_every=1,
        switch_times=(0.2,),
        n_formations=2,
        formations=FormationSchedule(
            (Formation(np.zeros((1, 2))), Formation(np.zeros((1, 2)))), (0.2,)
        ),
        topologies=TopologySchedule(((0.0, topo_a), (0.1, topo_b))),
    )
    log = run(sc)
    assert np.array_equal(np.unique(log.formation_idx[log.t < 0.2 - 1e-12]), [0])
    assert np.array_equal(np.unique(log.formation_idx[log.t >= 0.2 - 1e-12]), [1])
    k_topo = np.searchsorted(log.topology_idx, 1)
    assert log.t[k_topo] == pytest.approx(0.1, abs=1e-12)


def test_gravity_invariance_short():
    """The gravity flag changes logged torques but not the motion: the
    computed-torque law cancels gravity exactly."""
    sc = _scenario(n=2, t_end=0.5, sample_every=10)
    log_on = run(sc)
    log_off = run(replace(sc, gravity=False))
    assert np.array_equal(log_on.q, log_off.q)
    assert np.array_equal(log_on.qdot, log_off.qdot)
    assert np.array_equal(log_on.a_est, log_off.a_est)
    assert not np.array_equal(log_on.tau, log_off.tau)


def test_logged_torque_matches_public_law(rng):
    """The vectorized torque kernel agrees with the per-agent computed-torque
    operation at every logged sample."""
    sc = _scenario(n=3, t_end=0.2, sample_every=10,
                   agents=(DEFAULT_PARAMS,
                           replace(DEFAULT_PARAMS, m2=2.0, lc2=0.3),
                           replace(DEFAULT_PARAMS, m1=0.7, i1=0.2)))
    log = run(sc)
    for k in range(0, log.samples, 4):
        for i, p in enumerate(sc.effective_agents):
            want = inverse_dynamics_torque(p, log.q[k, i], log.qdot[k, i],
                                           log.qdd_cmd[k, i])
            assert np.max(np.abs(log.tau[k, i] - want)) < 1e-12


def test_logged_command_matches_per_agent_law():
    """The vectorized consensus kernel agrees with the per-agent reference
    acceleration assembled from neighbor views."""
    sc = _scenario(n=4, t_end=0.2, sample_every=20)
    log = run(sc)
    topo = sc.topologies.entries[0][1]
    eta = sc.formations.formations[0].offsets
    for k in range(log.samples):
        views = views_from_state(
            topo, eta, (log.x0[k], log.v0[k], log.a0[k]),
            log.q[k], log.qdot[k], log.a_est[k],
        )
        got = np.stack([reference_accel(v, sc.gains) for v in views])
        assert np.max(np.abs(got - log.qdd_cmd[k])) < 1e-12


def test_divergence_detected_with_diagnostics():
    sc = _scenario(t_end=1.0, dt=0.1, sample_every=1, gains=_gains(c=1e12))
    with pytest.raises(DivergenceError, match="diverged") as exc:
        run(sc)
    assert 0.0 < exc.value.t <= 1.0
    assert exc.value.agent == 0
    assert exc.value.value > 1e9 or not np.isfinite(exc.value.value)


def test_estimator_scalar_hand_case():
    """Single pinned agent, initial estimate error 2, beta = 4, constant
    leader acceleration: the discrete estimator reaches the target exactly
    at t = 0.5 (within one step) and then freezes there since sgn(0) = 0."""
    g = _gains(beta=4.0)
    dt = 1e-3
    a0 = np.array([0.0])
    a = np.array([2.0])
    t_settle = None
    for k in range(1000):
        view = NeighborView(q=a0, qdot=a0, a_est=a, eta=a0, pin=1.0, neighbors=(),
                            leader=(a0, a0, a0))
        a = a + dt * estimator_rhs(view, g)
        t = (k + 1) * dt
        if t_settle is None and abs(a[0]) < g.beta * dt:
            t_settle = t
    # accumulated rounding can land the crossing one step early, so the
    # +/- dt window is inclusive at its boundary
    assert abs(t_settle - 0.5) <= dt + 1e-12
    # once inside the band |a| < beta dt the discrete update stays there
    assert abs(a[0]) <= g.beta * dt


def test_halving_dt_gives_modest_refinement(bundled):
    """Fixed-step refinement study on the first five seconds of the
    six-agent benchmark (single formation active there; reference dt=1e-5).
    The sliding-mode estimator is first order, so halving dt must improve
    the final state but by far less than the fourth-order factor 16.
    Measured: err(1e-3) = 2.43e-3, err(5e-4) = 9.62e-4, ratio 2.53."""
    sc = bundled["paper-fig3"]
    base = replace(
        sc,
        formations=FormationSchedule((sc.formations.formations[0],), (), t_start=0.0),
        t_end=5.0,
        sample_every=1000,
    )
    ref = run(replace(base, dt=1e-5))
    errs = {}
    for dt in (1e-3, 5e-4):
        log = run(replace(base, dt=dt))
        errs[dt] = float(np.linalg.norm(log.q[-1] - ref.q[-1]))
    assert errs[1e-3] < 1e-2
    ratio = errs[1e-3] / errs[5e-4]
    assert 1.2 < ratio < 16.0


def test_sig_pow_preserved_under_kernel_vectorization(rng):
    """Spot check that the stacked consensus path equals coupling @ errors."""
    from formation_sim.sim import _ref_accel

    n = 5
    w = np.zeros((n, n))
    for i in range(n - 1):
        w[i, i + 1] = w[i + 1, i] = rng.uniform(0.5, 2.0)
    topo = build_topology(w, rng.uniform(0.0, 1.0, n))
    g = _gains()
    q = rng.uniform(-5, 5, (n, 2))
    qd = rng.uniform(-5, 5, (n, 2))
    a = rng.uniform(-5, 5, (n, 2))
    eta = rng.uniform(-1, 1, (n, 2))
    x0 = rng.uniform(-3, 3, 2)
    v0 = rng.uniform(-3, 3, 2)
    got = _ref_accel((x0, v0), q, qd, a, topo.coupling, eta, g)
    pos = topo.coupling @ (q - eta - x0)
    vel = topo.coupling @ (qd - v0)
    want = a - g.phi(sig_pow(pos, g.alpha1)) - g.psi(sig_pow(vel, g.alpha2))
    assert np.array_equal(got, want)
