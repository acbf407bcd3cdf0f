"""Desired formations and the switching signal that selects them.

A formation is a set of per-agent offsets eta_i in R^m expressed in a
frame attached to the leader. Offsets must sum to zero ("closed"
formation) so that driving every agent to leader + eta_i makes the group
centroid coincide with the leader. A schedule holds a finite list of
formations plus strictly increasing switch times; the active formation
is piecewise constant and right-continuous.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "Formation",
    "FormationSchedule",
    "ClosednessReport",
    "validate_formation",
    "center_formation",
    "formation_at",
]

# Absolute per-component tolerance on the offset centroid.
CLOSEDNESS_TOL = 1e-12


@dataclass(frozen=True)
class Formation:
    """Per-agent offsets, shape (n, m), required to sum to zero per component."""

    offsets: np.ndarray

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=float)
        if off.ndim != 2 or off.shape[0] < 1:
            raise ValidationError(
                f"offsets must be an (n, m) array with n >= 1, got shape {off.shape}",
                path="offsets",
            )
        if not np.all(np.isfinite(off)):
            raise ValidationError("offsets must be finite", path="offsets")
        object.__setattr__(self, "offsets", off)
        off.setflags(write=False)
        report = validate_formation(self)
        if not report.ok:
            raise ValidationError(
                f"formation is not closed: centroid {report.centroid.tolist()} "
                f"exceeds {CLOSEDNESS_TOL} (use center_formation to recenter)",
                path="offsets",
            )

    @property
    def n(self) -> int:
        return self.offsets.shape[0]

    @property
    def m(self) -> int:
        return self.offsets.shape[1]


@dataclass(frozen=True)
class ClosednessReport:
    """Outcome of the closedness check; centroid is reported either way."""

    ok: bool
    centroid: np.ndarray


def validate_formation(f) -> ClosednessReport:
    """Check that the offsets sum to zero within tolerance per component.

    Accepts a Formation or a raw (n, m) array so candidate offsets can be
    checked before construction (Formation itself enforces closedness).
    """
    off = np.asarray(getattr(f, "offsets", f), dtype=float)
    centroid = off.mean(axis=0)
    ok = bool(np.all(np.abs(centroid) <= CLOSEDNESS_TOL))
    return ClosednessReport(ok=ok, centroid=centroid)


def center_formation(offsets) -> Formation:
    """Subtract the centroid from raw offsets, yielding a closed Formation.

    Idempotent on already-closed input (the subtracted centroid is then
    exactly representable as ~0 and the offsets are unchanged up to it).
    """
    off = np.asarray(offsets, dtype=float)
    if off.ndim != 2 or off.shape[0] < 1:
        raise ValidationError(
            f"offsets must be an (n, m) array with n >= 1, got shape {off.shape}",
            path="offsets",
        )
    return Formation(offsets=off - off.mean(axis=0))


@dataclass(frozen=True)
class FormationSchedule:
    """Finite formation list plus strictly increasing switch times.

    formations[s] is active on [switch point s, switch point s+1), where the
    implicit zeroth switch point is the scenario start time: index 0 runs
    from the start until switch_times[0], index 1 until switch_times[1], and
    the last formation runs to the horizon end. len(switch_times) must be
    len(formations) - 1.
    """

    formations: tuple[Formation, ...]
    switch_times: tuple[float, ...]
    t_start: float = 0.0

    def __post_init__(self):
        if not self.formations:
            raise ValidationError("need at least one formation", path="formations")
        n, m = self.formations[0].n, self.formations[0].m
        for s, f in enumerate(self.formations):
            if (f.n, f.m) != (n, m):
                raise ValidationError(
                    f"formation {s} has shape ({f.n}, {f.m}), expected ({n}, {m})",
                    path=f"formations[{s}]",
                )
        if len(self.switch_times) != len(self.formations) - 1:
            raise ValidationError(
                f"{len(self.formations)} formations need {len(self.formations) - 1} "
                f"switch times, got {len(self.switch_times)}",
                path="switch_times",
            )
        prev = self.t_start
        for k, ts in enumerate(self.switch_times):
            if not ts > prev:
                raise ValidationError(
                    f"switch times must be strictly increasing and after the start, "
                    f"got {ts} following {prev}",
                    path=f"switch_times[{k}]",
                )
            prev = ts

    @property
    def n(self) -> int:
        return self.formations[0].n

    @property
    def m(self) -> int:
        return self.formations[0].m

    def dwell_intervals(self, t_end: float) -> list[tuple[float, float]]:
        """Half-open [t_s, t_{s+1}) spans, the last one closed by t_end."""
        bounds = [self.t_start, *self.switch_times, t_end]
        return [(bounds[k], bounds[k + 1]) for k in range(len(self.formations))]


def formation_at(s: FormationSchedule, t: float) -> tuple[int, Formation]:
    """(index sigma(t), formation) active at time t; right-continuous at switches."""
    if t < s.t_start:
        raise ValidationError(f"t={t} precedes the schedule start {s.t_start}")
    idx = 0
    for ts in s.switch_times:
        if t >= ts:
            idx += 1
        else:
            break
    return idx, s.formations[idx]
