"""Shared fixtures: bundled scenarios and cached benchmark runs.

The heavy 50 s runs are session-scoped so the acceptance criteria that all
consume them (settle thresholds, estimator bound, linearization, Lyapunov
monotonicity) pay for each seed once.
"""
from __future__ import annotations

import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from formation_sim import error_series, run
from formation_sim.cli import bundled_scenarios, parse_scenario


@pytest.fixture(scope="session")
def bundled():
    return {name: parse_scenario(path) for name, path in bundled_scenarios().items()}


def _seed_runs(scenario, seeds):
    out = {}
    for seed in seeds:
        sc = replace(scenario, seed=seed)
        t0 = time.perf_counter()
        log = run(sc)
        wall = time.perf_counter() - t0
        es = error_series(log, sc.formations, sc.leader)
        out[seed] = (sc, log, es, wall)
    return out


@pytest.fixture(scope="session")
def paper_runs(bundled):
    """Six-agent benchmark scenario over seeds 1..5: (scenario, log, errors, wall)."""
    return _seed_runs(bundled["paper-fig3"], range(1, 6))


@pytest.fixture(scope="session")
def broken_runs(bundled):
    """Unpinned-component counterexample over seeds 1..5."""
    return _seed_runs(bundled["corollary1-broken"], range(1, 6))


@pytest.fixture(scope="session")
def switching_runs(bundled):
    """Alternating-topology scenario over seeds 1..5."""
    return _seed_runs(bundled["corollary2-switching"], range(1, 6))


@pytest.fixture(scope="session")
def gravity_off_log(bundled):
    """Seed-1 benchmark run with gravity disabled (for the invariance check)."""
    sc = replace(bundled["paper-fig3"], seed=1, gravity=False)
    return run(sc)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
