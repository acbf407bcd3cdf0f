"""Command line front end: run, validate, sweep, demo.

Scenario files are strict JSON: unknown keys are rejected and every
complaint names the offending JSON path, so a typo like "alpha" for
"alpha1" fails loudly instead of silently running defaults.

    formation-sim run scenario.json --out out/
    formation-sim validate scenario.json
    formation-sim sweep scenario.json --param alpha1=0.2,0.4 --param seed=1,2,3
    formation-sim demo paper-fig3

Exit codes: 0 success, 1 bad input or hypotheses not satisfied,
2 divergence at runtime, 3 run completed but a post-run check failed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from .control import Gains, ShapingFunction, SHAPING_KINDS, estimator_settle_bound
from .dynamics import DEFAULT_PARAMS, LeaderSpec, ManipulatorParams, leader_state
from .errors import DivergenceError, ValidationError
from .formation import Formation, FormationSchedule, center_formation
from .graph import TopologySchedule, build_topology, leader_reachable, spectral_bounds
from .metrics import error_series, linearization_residual, settle_report
from .sim import InitSpec, Scenario, run
from .svgplot import Curve, Marker, line_chart

__all__ = ["parse_scenario", "parse_scenario_dict", "scenario_to_dict", "main"]

WORKERS_ENV = "FORMATION_SIM_WORKERS"
SWEEP_PARAMS = ("alpha1", "beta", "dt", "seed")


# ---------------------------------------------------------------- parsing

def _check_keys(obj: dict, allowed: set[str], path: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ValidationError(f"unknown keys {sorted(unknown)}", path=path)


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ValidationError(f"missing required key '{key}'", path=path)
    return obj[key]


def _as_float(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"expected a number, got {v!r}", path=path)
    return float(v)


def _as_int(v, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(f"expected an integer, got {v!r}", path=path)
    return v


def _as_bool(v, path: str) -> bool:
    if not isinstance(v, bool):
        raise ValidationError(f"expected true/false, got {v!r}", path=path)
    return v


def _as_array(v, path: str) -> np.ndarray:
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError("expected a numeric array", path=path) from None
    return arr


def _parse_shaping(obj, path: str) -> ShapingFunction:
    if not isinstance(obj, dict):
        raise ValidationError("expected an object with a 'kind' key", path=path)
    _check_keys(obj, {"kind", "c", "delta"}, path)
    kind = _require(obj, "kind", path)
    if kind not in SHAPING_KINDS:
        raise ValidationError(
            f"unknown kind {kind!r}, expected one of {list(SHAPING_KINDS)}",
            path=f"{path}.kind",
        )
    c = _as_float(obj.get("c", 100.0), f"{path}.c")
    delta = _as_float(obj.get("delta", 1.0), f"{path}.delta")
    return ShapingFunction(kind=kind, c=c, delta=delta)


_AGENT_KEYS = {"m1", "m2", "l1", "l2", "lc1", "lc2", "i1", "i2", "gravity"}


def _parse_agent(obj, path: str) -> ManipulatorParams:
    if not isinstance(obj, dict):
        raise ValidationError("expected an object of manipulator parameters", path=path)
    _check_keys(obj, _AGENT_KEYS, path)
    kwargs = {k: _as_float(v, f"{path}.{k}") for k, v in obj.items()}
    return replace(DEFAULT_PARAMS, **kwargs)


def _parse_leader(obj, path: str) -> LeaderSpec:
    if not isinstance(obj, dict):
        raise ValidationError("expected an object with a 'kind' key", path=path)
    kind = _require(obj, "kind", path)
    if kind == "circle":
        _check_keys(obj, {"kind", "center", "radius", "omega"}, path)
        center = _as_array(obj.get("center", [0.0, 0.0]), f"{path}.center")
        return LeaderSpec(
            kind="circle",
            center=center,
            radius=_as_float(obj.get("radius", 30.0), f"{path}.radius"),
            omega=_as_float(obj.get("omega", 0.05 * np.pi), f"{path}.omega"),
        )
    if kind == "sampled":
        _check_keys(obj, {"kind", "sample_times", "sample_positions"}, path)
        return LeaderSpec(
            kind="sampled",
            sample_times=_as_array(
                _require(obj, "sample_times", path), f"{path}.sample_times"
            ),
            sample_positions=_as_array(
                _require(obj, "sample_positions", path), f"{path}.sample_positions"
            ),
        )
    raise ValidationError(
        f"unknown kind {kind!r}, expected 'circle' or 'sampled'", path=f"{path}.kind"
    )


def parse_scenario_dict(data: dict, name: str = "") -> Scenario:
    """Build a Scenario from an already-decoded JSON object."""
    if not isinstance(data, dict):
        raise ValidationError("scenario root must be a JSON object")
    _check_keys(
        data,
        {
            "agents", "topology", "topology_schedule", "formations",
            "switch_times", "leader", "gains", "integration", "init",
            "seed", "flags",
        },
        "scenario",
    )

    flags = data.get("flags", {})
    if not isinstance(flags, dict):
        raise ValidationError("expected an object", path="flags")
    _check_keys(flags, {"faithful", "gravity", "expect_failure", "auto_center"}, "flags")
    faithful = _as_bool(flags.get("faithful", True), "flags.faithful")
    gravity = _as_bool(flags.get("gravity", True), "flags.gravity")
    expect_failure = _as_bool(flags.get("expect_failure", False), "flags.expect_failure")
    auto_center = _as_bool(flags.get("auto_center", False), "flags.auto_center")

    agents_raw = _require(data, "agents", "scenario")
    if not isinstance(agents_raw, list) or not agents_raw:
        raise ValidationError("expected a non-empty list", path="agents")
    agents = tuple(
        _parse_agent(a, f"agents[{i}]") for i, a in enumerate(agents_raw)
    )

    if ("topology" in data) == ("topology_schedule" in data):
        raise ValidationError(
            "provide exactly one of 'topology' or 'topology_schedule'", path="scenario"
        )
    integration = _require(data, "integration", "scenario")
    if not isinstance(integration, dict):
        raise ValidationError("expected an object", path="integration")
    _check_keys(integration, {"dt", "t0", "t_end", "sample_every"}, "integration")
    t0 = _as_float(integration.get("t0", 0.0), "integration.t0")
    dt = _as_float(_require(integration, "dt", "integration"), "integration.dt")
    t_end = _as_float(_require(integration, "t_end", "integration"), "integration.t_end")
    sample_every = _as_int(integration.get("sample_every", 10), "integration.sample_every")

    if "topology" in data:
        tobj = data["topology"]
        if not isinstance(tobj, dict):
            raise ValidationError("expected an object", path="topology")
        _check_keys(tobj, {"weights", "pinning"}, "topology")
        topo = build_topology(
            _as_array(_require(tobj, "weights", "topology"), "topology.weights"),
            _as_array(_require(tobj, "pinning", "topology"), "topology.pinning"),
        )
        topologies = TopologySchedule(((t0, topo),))
    else:
        entries_raw = data["topology_schedule"]
        if not isinstance(entries_raw, list) or not entries_raw:
            raise ValidationError("expected a non-empty list", path="topology_schedule")
        entries = []
        for i, e in enumerate(entries_raw):
            p = f"topology_schedule[{i}]"
            if not isinstance(e, dict):
                raise ValidationError("expected an object", path=p)
            _check_keys(e, {"start", "weights", "pinning"}, p)
            entries.append(
                (
                    _as_float(_require(e, "start", p), f"{p}.start"),
                    build_topology(
                        _as_array(_require(e, "weights", p), f"{p}.weights"),
                        _as_array(_require(e, "pinning", p), f"{p}.pinning"),
                    ),
                )
            )
        topologies = TopologySchedule(tuple(entries))

    forms_raw = _require(data, "formations", "scenario")
    if not isinstance(forms_raw, list) or not forms_raw:
        raise ValidationError("expected a non-empty list of offset arrays", path="formations")
    formations = []
    for i, f in enumerate(forms_raw):
        offs = _as_array(f, f"formations[{i}]")
        if auto_center and offs.ndim == 2:
            offs = center_formation(offs).offsets
        try:
            formations.append(Formation(offs))
        except ValidationError as e:
            raise ValidationError(str(e), path=f"formations[{i}]") from None
    switch_raw = data.get("switch_times", [])
    if not isinstance(switch_raw, list):
        raise ValidationError("expected a list of times", path="switch_times")
    switch_times = tuple(
        _as_float(v, f"switch_times[{i}]") for i, v in enumerate(switch_raw)
    )
    fs = FormationSchedule(tuple(formations), switch_times, t_start=t0)

    leader = _parse_leader(_require(data, "leader", "scenario"), "leader")

    gobj = _require(data, "gains", "scenario")
    if not isinstance(gobj, dict):
        raise ValidationError("expected an object", path="gains")
    _check_keys(gobj, {"alpha1", "beta", "phi", "psi"}, "gains")
    gains = Gains(
        alpha1=_as_float(_require(gobj, "alpha1", "gains"), "gains.alpha1"),
        beta=_as_float(_require(gobj, "beta", "gains"), "gains.beta"),
        phi=_parse_shaping(gobj.get("phi", {"kind": "linear"}), "gains.phi"),
        psi=_parse_shaping(gobj.get("psi", {"kind": "linear"}), "gains.psi"),
    )

    iobj = data.get("init", {"kind": "uniform"})
    if not isinstance(iobj, dict):
        raise ValidationError("expected an object", path="init")
    kind = iobj.get("kind", "uniform")
    if kind == "uniform":
        _check_keys(iobj, {"kind", "lo", "hi"}, "init")
        lo = _as_float(iobj.get("lo", -6.0), "init.lo")
        hi = _as_float(iobj.get("hi", 6.0), "init.hi")
        if not hi > lo:
            raise ValidationError(f"need hi > lo, got [{lo}, {hi}]", path="init")
        init = InitSpec(kind="uniform", lo=lo, hi=hi)
    elif kind == "explicit":
        _check_keys(iobj, {"kind", "q", "qdot", "a_est"}, "init")
        init = InitSpec(
            kind="explicit",
            q=_as_array(_require(iobj, "q", "init"), "init.q"),
            qdot=_as_array(_require(iobj, "qdot", "init"), "init.qdot"),
            a_est=_as_array(_require(iobj, "a_est", "init"), "init.a_est"),
        )
    else:
        raise ValidationError(
            f"unknown kind {kind!r}, expected 'uniform' or 'explicit'", path="init.kind"
        )

    seed = _as_int(data.get("seed", 0), "seed")

    return Scenario(
        agents=agents,
        topologies=topologies,
        formations=fs,
        leader=leader,
        gains=gains,
        t0=t0,
        t_end=t_end,
        dt=dt,
        sample_every=sample_every,
        seed=seed,
        init=init,
        faithful=faithful,
        gravity=gravity,
        expect_failure=expect_failure,
        name=name,
    )


def parse_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ValidationError(f"cannot read scenario file: {e}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid JSON: {e}", path=str(path)) from None
    return parse_scenario_dict(data, name=path.stem)


def scenario_to_dict(s: Scenario) -> dict:
    """Serialize a Scenario back to the JSON schema (round-trips exactly)."""
    data: dict = {
        "agents": [
            {
                "m1": p.m1, "m2": p.m2, "l1": p.l1, "l2": p.l2,
                "lc1": p.lc1, "lc2": p.lc2, "i1": p.i1, "i2": p.i2,
                "gravity": p.gravity,
            }
            for p in s.agents
        ]
    }
    entries = s.topologies.entries
    if len(entries) == 1:
        data["topology"] = {
            "weights": entries[0][1].weights.tolist(),
            "pinning": entries[0][1].pinning.tolist(),
        }
    else:
        data["topology_schedule"] = [
            {
                "start": start,
                "weights": topo.weights.tolist(),
                "pinning": topo.pinning.tolist(),
            }
            for start, topo in entries
        ]
    data["formations"] = [f.offsets.tolist() for f in s.formations.formations]
    data["switch_times"] = list(s.formations.switch_times)
    if s.leader.kind == "circle":
        data["leader"] = {
            "kind": "circle",
            "center": s.leader.center.tolist(),
            "radius": s.leader.radius,
            "omega": s.leader.omega,
        }
    else:
        data["leader"] = {
            "kind": "sampled",
            "sample_times": s.leader.sample_times.tolist(),
            "sample_positions": s.leader.sample_positions.tolist(),
        }
    data["gains"] = {
        "alpha1": s.gains.alpha1,
        "beta": s.gains.beta,
        "phi": {"kind": s.gains.phi.kind, "c": s.gains.phi.c, "delta": s.gains.phi.delta},
        "psi": {"kind": s.gains.psi.kind, "c": s.gains.psi.c, "delta": s.gains.psi.delta},
    }
    data["integration"] = {
        "dt": s.dt, "t0": s.t0, "t_end": s.t_end, "sample_every": s.sample_every,
    }
    if s.init.kind == "uniform":
        data["init"] = {"kind": "uniform", "lo": s.init.lo, "hi": s.init.hi}
    else:
        data["init"] = {
            "kind": "explicit",
            "q": s.init.q.tolist(),
            "qdot": s.init.qdot.tolist(),
            "a_est": s.init.a_est.tolist(),
        }
    data["seed"] = s.seed
    data["flags"] = {
        "faithful": s.faithful,
        "gravity": s.gravity,
        "expect_failure": s.expect_failure,
    }
    return data


# ---------------------------------------------------------------- artifacts

def _g(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(path: Path, log) -> None:
    rows = ["t,agent,q1,q2,qd1,qd2,a1,a2,tau1,tau2"]
    for k in range(log.samples):
        t = _g(log.t[k])
        for i in range(log.q.shape[1]):
            rows.append(
                f"{t},{i + 1},{_g(log.q[k, i, 0])},{_g(log.q[k, i, 1])},"
                f"{_g(log.qdot[k, i, 0])},{_g(log.qdot[k, i, 1])},"
                f"{_g(log.a_est[k, i, 0])},{_g(log.a_est[k, i, 1])},"
                f"{_g(log.tau[k, i, 0])},{_g(log.tau[k, i, 1])}"
            )
    path.write_text("\n".join(rows) + "\n", newline="\n")


def write_leader_csv(path: Path, log) -> None:
    rows = ["t,x1,x2,v1,v2,a1,a2"]
    for k in range(log.samples):
        rows.append(
            f"{_g(log.t[k])},{_g(log.x0[k, 0])},{_g(log.x0[k, 1])},"
            f"{_g(log.v0[k, 0])},{_g(log.v0[k, 1])},"
            f"{_g(log.a0[k, 0])},{_g(log.a0[k, 1])}"
        )
    path.write_text("\n".join(rows) + "\n", newline="\n")


def write_errors_csv(path: Path, es) -> None:
    rows = ["t,agent,eq,eqd,ea,centroid,maxpair,formation_idx,topology_idx"]
    n = es.eq.shape[1]
    for k in range(es.t.size):
        t = _g(es.t[k])
        cen, mp = _g(es.centroid[k]), _g(es.maxpair[k])
        fi, ti = int(es.formation_idx[k]), int(es.topology_idx[k])
        for i in range(n):
            rows.append(
                f"{t},{i + 1},{_g(es.eq[k, i])},{_g(es.eqd[k, i])},"
                f"{_g(es.ea[k, i])},{cen},{mp},{fi},{ti}"
            )
    path.write_text("\n".join(rows) + "\n", newline="\n")


def _errors_svg(es, switch_times) -> str:
    curves = []
    n = es.eq.shape[1]
    for i in range(n):
        curves.append(Curve(label=f"|qbar| agent {i + 1}", x=es.t, y=es.eq[:, i]))
    for i in range(n):
        curves.append(
            Curve(label=f"|qdbar| agent {i + 1}", x=es.t, y=es.eqd[:, i], dash="4,3")
        )
    return line_chart(
        curves,
        title="Tracking error norms",
        xlabel="t [s]",
        ylabel="error norm",
        vlines=tuple(switch_times),
        size=(940, 520),
    )


def _formation_svg(log, scenario) -> str:
    n = log.q.shape[1]
    curves = [
        Curve(label="leader", x=log.x0[:, 0], y=log.x0[:, 1], color="#000000", width=1.0,
              dash="2,3")
    ]
    for i in range(n):
        curves.append(Curve(label=f"agent {i + 1}", x=log.q[:, i, 0], y=log.q[:, i, 1]))
    markers = []
    # snapshot polygon at the last sample of each dwell interval
    idx = log.formation_idx
    ends = list(np.nonzero(np.diff(idx) != 0)[0]) + [log.samples - 1]
    for k in ends:
        pts = log.q[k]
        curves.append(
            Curve(label="", x=pts[:, 0], y=pts[:, 1], color="#444444", width=0.8,
                  closed=True)
        )
        for i in range(n):
            markers.append(Marker(x=pts[i, 0], y=pts[i, 1], color="#444444", radius=2.2))
        markers.append(
            Marker(x=log.x0[k, 0], y=log.x0[k, 1], color="#000000", radius=3.0,
                   label=f"t={log.t[k]:.0f}")
        )
    return line_chart(
        curves,
        title=f"Planar trajectories: {scenario.name or 'scenario'}",
        xlabel="x",
        ylabel="y",
        equal_aspect=True,
        markers=tuple(markers),
        size=(760, 760),
    )


def _run_and_report(scenario: Scenario, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    lines = [
        f"scenario={scenario.name or '(unnamed)'}",
        f"agents={scenario.n}",
        f"seed={scenario.seed}",
        f"dt={_g(scenario.dt)}",
        f"horizon=[{_g(scenario.t0)},{_g(scenario.t_end)}]",
        f"gravity={str(scenario.gravity).lower()}",
        f"faithful={str(scenario.faithful).lower()}",
        f"expect_failure={str(scenario.expect_failure).lower()}",
    ]

    for k, (start, topo) in enumerate(scenario.topologies.entries):
        if leader_reachable(topo):
            lo, hi = spectral_bounds(topo)
            lines.append(
                f"topology[{k}]: start={_g(start)} lambda_min={_g(lo)} lambda_max={_g(hi)}"
            )
        else:
            lines.append(f"topology[{k}]: start={_g(start)} leader unreachable")

    try:
        log = run(scenario)
    except DivergenceError as e:
        lines += ["completed=false", f"divergence: {e}", "exit_status=2"]
        (out / "report.txt").write_text("\n".join(lines) + "\n", newline="\n")
        print("\n".join(lines[-3:]), file=sys.stderr)
        return 2
    lines.append("completed=true")

    es = error_series(log, scenario.formations, scenario.leader)
    topo0 = scenario.topologies.entries[0][1]
    tf = None
    if leader_reachable(topo0):
        abar0 = log.a_est[0] - log.a0[0]
        tf = estimator_settle_bound(
            scenario.t0, topo0.coupling, abar0, scenario.gains.beta,
            scenario.leader.jerk_bound,
        )
    rep = settle_report(
        es,
        scenario.formations,
        tol=1e-2,
        est_tol=10.0 * scenario.gains.beta * scenario.dt,
        tf_bound=tf,
    )
    lin = linearization_residual(log)

    write_trajectory_csv(out / "trajectory.csv", log)
    write_leader_csv(out / "leader.csv", log)
    write_errors_csv(out / "errors.csv", es)
    (out / "errors_t.svg").write_text(
        _errors_svg(es, scenario.formations.switch_times), newline="\n"
    )
    (out / "formation_xy.svg").write_text(_formation_svg(log, scenario), newline="\n")

    for iv in rep.intervals:
        verdict = f"settle_time={_g(iv.settle_time)}" if iv.settled else "did-not-settle"
        lines.append(
            f"interval[{iv.index}]: [{_g(iv.t_start)},{_g(iv.t_end)}) {verdict}"
        )
    lines.append(
        "estimator_settle="
        + (_g(rep.estimator_settle) if rep.estimator_settle is not None else "never")
    )
    if tf is not None:
        lines.append(f"estimator_settle_bound={_g(tf)}")
    lines.append(f"linearization_residual={_g(lin)}")

    checks: list[tuple[str, bool]] = [("exact_linearization", lin <= 1e-10)]
    if scenario.expect_failure:
        checks.append(("tracking_failed_as_expected", not rep.intervals[-1].settled))
    elif scenario.faithful:
        checks.append(("all_intervals_settled", rep.all_settled))
        if tf is not None and rep.estimator_settle is not None:
            checks.append(("estimator_within_bound", rep.estimator_settle <= tf))
    for name, ok in checks:
        lines.append(f"check {name}={str(ok).lower()}")
    status = 0 if all(ok for _, ok in checks) else 3
    lines.append(f"exit_status={status}")
    (out / "report.txt").write_text("\n".join(lines) + "\n", newline="\n")
    print("\n".join(lines))
    return status


# ---------------------------------------------------------------- commands

def _apply_overrides(scenario: Scenario, args) -> Scenario:
    if getattr(args, "seed", None) is not None:
        scenario = replace(scenario, seed=args.seed)
    if getattr(args, "dt", None) is not None:
        scenario = replace(scenario, dt=args.dt)
    return scenario


def cmd_run(args) -> int:
    scenario = _apply_overrides(parse_scenario(args.scenario), args)
    return _run_and_report(scenario, Path(args.out))


def cmd_validate(args) -> int:
    scenario = parse_scenario(args.scenario)
    ok = True
    lines = [f"scenario={scenario.name}"]
    jerk = scenario.leader.jerk_bound
    lines.append(f"leader_jerk_bound={_g(jerk)}")
    margin = scenario.gains.beta - jerk
    lines.append(f"estimator_margin=beta-jerk={_g(margin)}")
    if not margin > 0:
        ok = False
    lines.append(f"alpha1={_g(scenario.gains.alpha1)} alpha2={_g(scenario.gains.alpha2)}")

    tf_worst = None
    for k, (start, topo) in enumerate(scenario.topologies.entries):
        if not leader_reachable(topo):
            lines.append(f"topology[{k}]: start={_g(start)} leader unreachable FAIL")
            ok = False
            continue
        lo, hi = spectral_bounds(topo)
        lines.append(
            f"topology[{k}]: start={_g(start)} lambda_min={_g(lo)} lambda_max={_g(hi)}"
        )
        if k == 0 and margin > 0:
            a0 = leader_state(scenario.leader, scenario.t0)[2]
            if scenario.init.kind == "explicit":
                abar = scenario.init.a_est - a0
                v0 = 0.5 * float(np.sum(abar * (topo.coupling @ abar)))
                label = "tf_bound_exact"
            else:
                w = np.maximum(
                    np.abs(scenario.init.lo - a0), np.abs(scenario.init.hi - a0)
                )
                v0 = 0.5 * hi * scenario.n * float(np.sum(w**2))
                label = "tf_bound_worst_case"
            tf_worst = scenario.t0 + np.sqrt(2.0 * hi * v0) / (lo * margin)
            lines.append(f"{label}={_g(tf_worst)}")
    lines.append(f"hypotheses={'ok' if ok else 'FAIL'}")
    print("\n".join(lines))
    return 0 if ok else 1


def _sweep_eval(task):
    scenario, names, values = task
    row = {n: v for n, v in zip(names, values)}
    try:
        for n, v in zip(names, values):
            if n == "alpha1":
                scenario = replace(
                    scenario,
                    gains=Gains(alpha1=float(v), beta=scenario.gains.beta,
                                phi=scenario.gains.phi, psi=scenario.gains.psi),
                )
            elif n == "beta":
                scenario = replace(
                    scenario,
                    gains=Gains(alpha1=scenario.gains.alpha1, beta=float(v),
                                phi=scenario.gains.phi, psi=scenario.gains.psi),
                )
            elif n == "dt":
                scenario = replace(scenario, dt=float(v))
            elif n == "seed":
                scenario = replace(scenario, seed=int(v))
        log = run(scenario)
        es = error_series(log, scenario.formations, scenario.leader)
        topo0 = scenario.topologies.entries[0][1]
        tf = None
        if leader_reachable(topo0):
            tf = estimator_settle_bound(
                scenario.t0, topo0.coupling, log.a_est[0] - log.a0[0],
                scenario.gains.beta, scenario.leader.jerk_bound,
            )
        rep = settle_report(
            es, scenario.formations, tol=1e-2,
            est_tol=10.0 * scenario.gains.beta * scenario.dt, tf_bound=tf,
        )
        row.update(
            status="ok",
            settled=str(rep.all_settled).lower(),
            settle_times=";".join(
                _g(iv.settle_time) if iv.settled else "never" for iv in rep.intervals
            ),
            estimator_settle=(
                _g(rep.estimator_settle) if rep.estimator_settle is not None else "never"
            ),
            tf_bound=_g(tf) if tf is not None else "",
            max_eq_final=_g(float(es.eq[-1].max())),
            max_ea_final=_g(float(es.ea[-1].max())),
        )
    except (ValidationError, DivergenceError) as e:
        row.update(
            status=f"error: {e}", settled="", settle_times="", estimator_settle="",
            tf_bound="", max_eq_final="", max_ea_final="",
        )
    return row


def cmd_sweep(args) -> int:
    scenario = parse_scenario(args.scenario)
    if not 1 <= len(args.param) <= 2:
        raise ValidationError("sweep takes one or two --param options")
    names, grids = [], []
    for spec in args.param:
        if "=" not in spec:
            raise ValidationError(f"--param must look like name=v1,v2,..., got {spec!r}")
        name, _, rest = spec.partition("=")
        name = name.strip()
        if name in names:
            raise ValidationError(f"duplicate --param {name}")
        if name not in SWEEP_PARAMS:
            raise ValidationError(
                f"unknown sweep parameter {name!r}, expected one of {list(SWEEP_PARAMS)}"
            )
        try:
            vals = [
                int(v) if name == "seed" else float(v)
                for v in rest.split(",") if v.strip()
            ]
        except ValueError:
            raise ValidationError(f"could not parse values for --param {name}") from None
        if not vals:
            raise ValidationError(f"--param {name} has no values")
        names.append(name)
        grids.append(vals)

    tasks = []
    if len(grids) == 1:
        for v in grids[0]:
            tasks.append((scenario, tuple(names), (v,)))
    else:
        for v1 in grids[0]:
            for v2 in grids[1]:
                tasks.append((scenario, tuple(names), (v1, v2)))

    workers = args.workers or int(os.environ.get(WORKERS_ENV, "0")) or os.cpu_count() or 1
    workers = max(1, min(workers, len(tasks)))
    if workers == 1:
        rows = [_sweep_eval(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_eval, tasks))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cols = list(names) + [
        "status", "settled", "settle_times", "estimator_settle", "tf_bound",
        "max_eq_final", "max_ea_final",
    ]
    lines = [",".join(cols)]
    for row in rows:
        cells = []
        for c in cols:
            v = row[c]
            v = _g(v) if isinstance(v, float) else str(v)
            cells.append('"' + v.replace('"', '""') + '"' if "," in v else v)
        lines.append(",".join(cells))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", newline="\n")
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows, {workers} workers)")
    return 0


def bundled_scenarios() -> dict[str, Path]:
    root = resources.files("formation_sim") / "scenarios"
    return {p.name[: -len(".json")]: Path(str(p)) for p in root.iterdir()
            if p.name.endswith(".json")}


def cmd_demo(args) -> int:
    names = bundled_scenarios()
    if args.name not in names:
        raise ValidationError(
            f"unknown demo {args.name!r}; bundled scenarios: {sorted(names)}"
        )
    scenario = _apply_overrides(parse_scenario(names[args.name]), args)
    return _run_and_report(scenario, Path(args.out))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="formation-sim",
        description="Finite-time formation tracking of networked two-link "
        "manipulators: simulate, validate, sweep.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario file and write artifacts")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--dt", type=float, default=None)
    p_run.set_defaults(fn=cmd_run)

    p_val = sub.add_parser(
        "validate", help="check scenario hypotheses and print spectral bounds"
    )
    p_val.add_argument("scenario")
    p_val.set_defaults(fn=cmd_validate)

    p_sweep = sub.add_parser("sweep", help="grid over one or two scalar parameters")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument(
        "--param", action="append", required=True,
        help="name=v1,v2,... with name one of alpha1|beta|dt|seed (repeat for a grid)",
    )
    p_sweep.add_argument("--out", default="out")
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_demo = sub.add_parser("demo", help="run a bundled scenario")
    p_demo.add_argument("name")
    p_demo.add_argument("--out", default="out")
    p_demo.add_argument("--seed", type=int, default=None)
    p_demo.add_argument("--dt", type=float, default=None)
    p_demo.set_defaults(fn=cmd_demo)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
