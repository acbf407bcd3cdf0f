"""Interaction topology with leader pinning.

Agents communicate over a weighted undirected graph; a subset of them
("pinned" agents) additionally receives the leader's state. The derived
objects are the graph Laplacian L and the coupling matrix B = L + diag(P).
B is symmetric positive definite exactly when every connected component
of the graph contains at least one pinned agent, which is the condition
under which consensus toward the leader can propagate everywhere.

All consensus sums used by the control laws act on stacked per-agent
vectors through B applied blockwise per coordinate; the mn-by-mn
Kronecker product B (x) I_m is never materialized since it has the same
spectrum and its action factors through B.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "Topology",
    "TopologySchedule",
    "build_topology",
    "leader_reachable",
    "spectral_bounds",
    "topology_at",
]


@dataclass(frozen=True)
class Topology:
    """Immutable weighted undirected graph with leader pinning.

    weights   n-by-n symmetric nonnegative adjacency matrix, zero diagonal
    pinning   length-n nonnegative leader-access weights
    laplacian l_ii = sum_j w_ij, l_ij = -w_ij (zero row sums)
    coupling  B = laplacian + diag(pinning)
    """

    n: int
    weights: np.ndarray
    pinning: np.ndarray
    laplacian: np.ndarray = field(repr=False)
    coupling: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.weights, self.pinning, self.laplacian, self.coupling):
            arr.setflags(write=False)


@dataclass(frozen=True)
class TopologySchedule:
    """Ordered (start time, Topology) entries; the first start is the scenario start.

    Entries are right-continuous: entry s is active on [start_s, start_{s+1}).
    Start times must be strictly increasing. Reachability of each entry is a
    hypothesis of the switching-topology sufficiency result and is enforced at
    scenario level when the faithfulness flag is on (the broken-pinning
    counterexample scenario needs a non-reachable entry with the flag off).
    """

    entries: tuple[tuple[float, Topology], ...]

    def __post_init__(self):
        if not self.entries:
            raise ValidationError("schedule needs at least one entry", path="entries")
        starts = [s for s, _ in self.entries]
        for k in range(1, len(starts)):
            if not starts[k] > starts[k - 1]:
                raise ValidationError(
                    f"start times must be strictly increasing, got {starts[k - 1]} then {starts[k]}",
                    path=f"entries[{k}]",
                )
        n0 = self.entries[0][1].n
        for k, (_, topo) in enumerate(self.entries):
            if topo.n != n0:
                raise ValidationError(
                    f"all entries must share the agent count, got {topo.n} != {n0}",
                    path=f"entries[{k}]",
                )


def build_topology(weights, pinning) -> Topology:
    """Validate adjacency/pinning data and derive the Laplacian and coupling matrix.

    weights must be square, symmetric, and nonnegative with a zero diagonal;
    pinning must be a nonnegative vector of matching length. Violations raise
    ValidationError naming the offending entry.
    """
    w = np.asarray(weights, dtype=float)
    p = np.asarray(pinning, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValidationError(f"weights must be square, got shape {w.shape}", path="weights")
    n = w.shape[0]
    if n < 1:
        raise ValidationError("need at least one agent", path="weights")
    if p.shape != (n,):
        raise ValidationError(
            f"pinning must have length {n}, got shape {p.shape}", path="pinning"
        )
    if not np.all(np.isfinite(w)):
        i, j = np.argwhere(~np.isfinite(w))[0]
        raise ValidationError("entry is not finite", path=f"weights[{i}][{j}]")
    if not np.all(np.isfinite(p)):
        (i,) = np.argwhere(~np.isfinite(p))[0]
        raise ValidationError("entry is not finite", path=f"pinning[{i}]")
    neg = np.argwhere(w < 0)
    if neg.size:
        i, j = neg[0]
        raise ValidationError(f"negative weight {w[i, j]}", path=f"weights[{i}][{j}]")
    diag = np.argwhere(np.diagonal(w) != 0)
    if diag.size:
        (i,) = diag[0]
        raise ValidationError("self-edges are not allowed", path=f"weights[{i}][{i}]")
    asym = np.argwhere(w != w.T)
    if asym.size:
        i, j = asym[0]
        raise ValidationError(
            f"weights must be symmetric, w[{i}][{j}]={w[i, j]} != w[{j}][{i}]={w[j, i]}",
            path=f"weights[{i}][{j}]",
        )
    negp = np.argwhere(p < 0)
    if negp.size:
        (i,) = negp[0]
        raise ValidationError(f"negative pinning weight {p[i]}", path=f"pinning[{i}]")

    lap = np.diag(w.sum(axis=1)) - w
    coupling = lap + np.diag(p)
    return Topology(n=n, weights=w, pinning=p, laplacian=lap, coupling=coupling)


def _components(weights: np.ndarray) -> np.ndarray:
    """Connected-component label per node, via union-find over positive-weight edges."""
    n = weights.shape[0]
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if weights[i, j] > 0:
                ra, rb = find(i), find(j)
                if ra != rb:
                    parent[ra] = rb
    return np.array([find(i) for i in range(n)])


def leader_reachable(t: Topology) -> bool:
    """True iff every connected component contains a pinned node.

    For an undirected graph this is equivalent to the leader having a path
    to every agent, and hence (by the standard pinned-Laplacian lemma) to
    the coupling matrix being positive definite.
    """
    labels = _components(t.weights)
    for root in np.unique(labels):
        if not np.any(t.pinning[labels == root] > 0):
            return False
    return True


def spectral_bounds(t: Topology) -> tuple[float, float]:
    """Extreme eigenvalues (lambda_min, lambda_max) of the coupling matrix B.

    These equal the extreme eigenvalues of the blockwise-applied
    B (x) I_m for any coordinate dimension m. Requires a leader-reachable
    topology so that lambda_min > 0; otherwise B is merely positive
    semidefinite and the settle-time bound that consumes these values is
    undefined.
    """
    if not leader_reachable(t):
        raise ValidationError(
            "topology is not leader-reachable; coupling matrix may be singular"
        )
    eigs = np.linalg.eigvalsh(t.coupling)
    return float(eigs[0]), float(eigs[-1])


def topology_at(s: TopologySchedule, t: float) -> Topology:
    """Topology active at time t: the last entry with start <= t (right-continuous)."""
    if t < s.entries[0][0]:
        raise ValidationError(
            f"t={t} precedes the first schedule entry at {s.entries[0][0]}"
        )
    active = s.entries[0][1]
    for start, topo in s.entries:
        if start <= t:
            active = topo
        else:
            break
    return active
