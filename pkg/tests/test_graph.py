"""Topology construction, reachability, and spectral properties."""
import itertools

import numpy as np
import pytest

from formation_sim import (
    Topology,
    TopologySchedule,
    ValidationError,
    build_topology,
    leader_reachable,
    spectral_bounds,
    topology_at,
)

from oracles import eig_by_bisection, reachable_bruteforce


def _random_topology(rng, n, p_edge=0.5, ensure_reachable=True):
    """Random undirected graph with continuous weights (a.s. simple spectrum)."""
    while True:
        w = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < p_edge:
                    w[i, j] = w[j, i] = rng.uniform(0.5, 2.0)
        pins = np.where(rng.random(n) < 0.4, rng.uniform(0.5, 2.0, n), 0.0)
        t = build_topology(w, pins)
        if not ensure_reachable or leader_reachable(t):
            return t


def test_build_derives_laplacian_and_coupling():
    w = np.array([[0.0, 2.0], [2.0, 0.0]])
    t = build_topology(w, [1.0, 0.0])
    assert np.array_equal(t.laplacian, [[2.0, -2.0], [-2.0, 2.0]])
    assert np.array_equal(t.coupling, [[3.0, -2.0], [-2.0, 2.0]])
    assert t.n == 2
    # rows of the Laplacian sum to zero by construction
    assert np.array_equal(t.laplacian.sum(axis=1), [0.0, 0.0])


def test_build_rejects_bad_inputs():
    with pytest.raises(ValidationError, match="square"):
        build_topology(np.zeros((2, 3)), [0.0, 0.0])
    with pytest.raises(ValidationError, match=r"weights\[0\]\[1\]"):
        build_topology([[0.0, -1.0], [-1.0, 0.0]], [1.0, 0.0])
    with pytest.raises(ValidationError, match="self-edges"):
        build_topology([[1.0, 0.0], [0.0, 0.0]], [1.0, 0.0])
    with pytest.raises(ValidationError, match="symmetric"):
        build_topology([[0.0, 1.0], [2.0, 0.0]], [1.0, 0.0])
    with pytest.raises(ValidationError, match=r"pinning\[1\]"):
        build_topology(np.zeros((2, 2)), [1.0, -0.5])
    with pytest.raises(ValidationError, match="length 2"):
        build_topology(np.zeros((2, 2)), [1.0])
    with pytest.raises(ValidationError, match="not finite"):
        build_topology([[0.0, np.inf], [np.inf, 0.0]], [1.0, 0.0])


def test_arrays_are_immutable():
    t = build_topology(np.zeros((2, 2)), [1.0, 1.0])
    with pytest.raises(ValueError):
        t.weights[0, 1] = 5.0
    with pytest.raises(ValueError):
        t.coupling[0, 0] = 5.0


def test_bundled_six_agent_spectrum_matches_closed_form():
    """The bundled benchmark coupling matrix has a block structure whose
    eigenvalues work out by hand: the pinned 3-chain gives {1, 2 +- sqrt 3},
    the isolated pinned agent gives {1}, the pinned pair gives
    {(3 +- sqrt 5)/2}."""
    w = np.zeros((6, 6))
    for i, j in [(0, 2), (0, 3), (4, 5)]:
        w[i, j] = w[j, i] = 1.0
    t = build_topology(w, [1.0, 1.0, 0.0, 0.0, 1.0, 0.0])
    expected = np.sort(
        [2.0 - np.sqrt(3.0), (3.0 - np.sqrt(5.0)) / 2.0, 1.0, 1.0,
         (3.0 + np.sqrt(5.0)) / 2.0, 2.0 + np.sqrt(3.0)]
    )
    got = np.sort(np.linalg.eigvalsh(t.coupling))
    assert np.max(np.abs(got - expected)) < 1e-9
    lo, hi = spectral_bounds(t)
    assert lo == pytest.approx(2.0 - np.sqrt(3.0), abs=1e-9)
    assert hi == pytest.approx(2.0 + np.sqrt(3.0), abs=1e-9)


def test_reachability_matches_bruteforce_on_all_small_graphs():
    """Exhaustive check on every undirected binary graph with n <= 5 nodes
    and every pinning subset."""
    total = 0
    for n in range(1, 6):
        pairs = list(itertools.combinations(range(n), 2))
        for edge_bits in range(2 ** len(pairs)):
            w = np.zeros((n, n))
            for b, (i, j) in enumerate(pairs):
                if edge_bits >> b & 1:
                    w[i, j] = w[j, i] = 1.0
            for pin_bits in range(2**n):
                pins = np.array([(pin_bits >> i) & 1 for i in range(n)], dtype=float)
                t = Topology(
                    n=n, weights=w.copy(), pinning=pins,
                    laplacian=np.diag(w.sum(axis=1)) - w,
                    coupling=np.diag(w.sum(axis=1)) - w + np.diag(pins),
                )
                assert leader_reachable(t) == reachable_bruteforce(w, pins)
                total += 1
    assert total == sum(2 ** (n * (n - 1) // 2) * 2**n for n in range(1, 6))


def test_positive_definite_iff_reachable(rng):
    """The coupling matrix is positive definite exactly when every component
    is pinned, across random weighted graphs."""
    for _ in range(200):
        n = int(rng.integers(1, 7))
        t = _random_topology(rng, n, p_edge=0.4, ensure_reachable=False)
        lam_min = float(np.linalg.eigvalsh(t.coupling)[0])
        if leader_reachable(t):
            assert lam_min > 1e-12
        else:
            assert lam_min < 1e-8


def test_spectral_bounds_against_charpoly_bisection(rng):
    """Production eigensolver vs the characteristic-polynomial bisection
    oracle on random reachable topologies."""
    for _ in range(25):
        n = int(rng.integers(2, 7))
        t = _random_topology(rng, n)
        got = np.sort(np.linalg.eigvalsh(t.coupling))
        want = np.sort(eig_by_bisection(t.coupling))
        assert np.max(np.abs(got - want)) < 1e-9
        lo, hi = spectral_bounds(t)
        assert lo == pytest.approx(want[0], abs=1e-9)
        assert hi == pytest.approx(want[-1], abs=1e-9)


def test_spectral_bounds_requires_reachability():
    t = build_topology(np.zeros((2, 2)), [1.0, 0.0])
    assert not leader_reachable(t)
    with pytest.raises(ValidationError, match="reachable"):
        spectral_bounds(t)


def test_schedule_validation():
    t = build_topology(np.zeros((1, 1)), [1.0])
    with pytest.raises(ValidationError, match="at least one"):
        TopologySchedule(())
    with pytest.raises(ValidationError, match="strictly increasing"):
        TopologySchedule(((0.0, t), (0.0, t)))
    t2 = build_topology(np.zeros((2, 2)), [1.0, 1.0])
    with pytest.raises(ValidationError, match="agent count"):
        TopologySchedule(((0.0, t), (1.0, t2)))


def test_topology_at_is_right_continuous():
    ta = build_topology(np.zeros((1, 1)), [1.0])
    tb = build_topology(np.zeros((1, 1)), [2.0])
    s = TopologySchedule(((0.0, ta), (5.0, tb)))
    assert topology_at(s, 0.0) is ta
    assert topology_at(s, 4.999) is ta
    assert topology_at(s, 5.0) is tb
    assert topology_at(s, 100.0) is tb
    with pytest.raises(ValidationError, match="precedes"):
        topology_at(s, -0.1)
