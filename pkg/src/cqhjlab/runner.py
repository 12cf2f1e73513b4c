"""Scenario execution and persisted run artifacts.

A run writes three files into its output directory:

- timeseries.csv  one row per snapshot (deterministic, byte-reproducible)
- summary.json    collapse report and invariant margins (no timings)
- manifest.json   resolved scenario echo, tool version, wall time

Snapshots can optionally be dumped as per-time CSV files. Sweeps fan out
over a process pool with no shared state; the result table preserves the
input order of the parameter values and records per-row failures without
aborting the remaining rows.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import CollapseReport, collapse_time, make_collapse_report
from .errors import CqhjError
from .evolve import Trajectory, collapsible_evolve
from .scenario import SCHEMA_VERSION, Scenario, apply_override, load_scenario

OUTPUT_ROOT_ENV = "CQHJLAB_OUTPUT_ROOT"

TIMESERIES_COLUMNS = [
    "t",
    "norm",
    "energy",
    "fidelity_target",
    "H_mean_re",
    "H_std",
    "gauge_log_magnitude",
    "gauge_phase",
]


def _fmt(x) -> str:
    """Shortest round-trip decimal representation; deterministic bytes."""
    if x is None:
        return "nan"
    return repr(float(x))


@dataclass
class RunResult:
    scenario: Scenario
    trajectory: Trajectory
    report: CollapseReport | None
    summary: dict


def execute(scenario: Scenario) -> RunResult:
    """Run a scenario through the collapsible propagator."""
    grid = scenario.build_grid()
    V = scenario.build_potential(grid)
    psi0 = scenario.build_initial_state(grid, V)
    force = scenario.build_force(grid, V)
    spec = scenario.build_integrator()
    target = scenario.build_fidelity_target(grid, V)
    run = scenario.resolved["run"]
    traj = collapsible_evolve(
        psi0,
        V,
        force,
        spec,
        run["t_final"],
        snapshot_stride=run["snapshot_stride"],
        node_threshold=run["node_threshold"],
        target=target,
    )
    report = None
    if target is not None:
        tau = collapse_time(traj, run["collapse_epsilon"])
        report = make_collapse_report(
            tau,
            run["collapse_epsilon"],
            psi0=psi0,
            V=V,
            units=scenario.build_units(),
        )
    obs = traj.observables
    dens0 = np.abs(traj.snapshots[0].values) ** 2
    max_density_drift = max(
        float(np.max(np.abs(np.abs(s.values) ** 2 - dens0))) for s in traj.snapshots
    )
    summary = {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario.resolved["name"],
        "snapshots": len(traj.snapshots),
        "t_final": float(traj.times[-1]),
        "final_norm": float(obs["norm"][-1]),
        "max_norm_deviation": float(np.max(np.abs(obs["norm"] - 1.0))),
        "final_energy": float(obs["energy"][-1]),
        "max_density_drift": max_density_drift,
        "final_fidelity_target": (
            float(obs["fidelity_target"][-1]) if "fidelity_target" in obs else None
        ),
        "collapse_report": report.as_dict() if report is not None else None,
    }
    return RunResult(scenario=scenario, trajectory=traj, report=report, summary=summary)


def resolve_output_dir(scenario: Scenario, override=None) -> Path:
    base = Path(override) if override else Path(scenario.resolved["output"]["directory"])
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not base.is_absolute():
        base = Path(root) / base
    return base


def _timeseries_rows(traj: Trajectory):
    obs = traj.observables
    n = len(traj.times)
    fid = obs.get("fidelity_target")
    glog = obs.get("gauge_log_magnitude", np.zeros(n))
    gphase = obs.get("gauge_phase", np.zeros(n))
    for i in range(n):
        yield [
            _fmt(traj.times[i]),
            _fmt(obs["norm"][i]),
            _fmt(obs["energy"][i]),
            _fmt(fid[i]) if fid is not None else "nan",
            _fmt(obs["H_mean_re"][i]),
            _fmt(obs["H_std"][i]),
            _fmt(glog[i]),
            _fmt(gphase[i]),
        ]


def write_artifacts(result: RunResult, out_dir: Path, wall_time_s: float) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "timeseries.csv", "w", newline="") as fh:
        fh.write(f"# cqhjlab timeseries schema_version={SCHEMA_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TIMESERIES_COLUMNS)
        writer.writerows(_timeseries_rows(result.trajectory))
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "scenario": result.scenario.resolved,
        "deterministic": True,
        "wall_time_s": wall_time_s,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if result.scenario.resolved["run"]["write_snapshots"]:
        snap_dir = out_dir / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        grid = result.trajectory.snapshots[0].grid
        for t, snap in zip(result.trajectory.times, result.trajectory.snapshots):
            path = snap_dir / f"t_{t:012.6f}.csv"
            with open(path, "w", newline="") as fh:
                fh.write(f"# cqhjlab snapshot schema_version={SCHEMA_VERSION} t={_fmt(t)}\n")
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["x", "re_psi", "im_psi"])
                for x, v in zip(grid.x, snap.values):
                    writer.writerow([_fmt(x), _fmt(v.real), _fmt(v.imag)])


def run_to_directory(scenario: Scenario, out_dir: Path) -> RunResult:
    started = time.perf_counter()
    result = execute(scenario)
    write_artifacts(result, out_dir, wall_time_s=time.perf_counter() - started)
    return result


# -- sweeps ----------------------------------------------------------------


def _sweep_row(args):
    """One sweep run; returns a plain dict (must stay picklable)."""
    resolved, param, value = args
    try:
        scenario = apply_override(Scenario(resolved=resolved), param, value)
        result = execute(scenario)
        rep = result.summary["collapse_report"] or {}
        return {
            "value": value,
            "status": "ok",
            "tau_internal": rep.get("tau_internal"),
            "tau_si": rep.get("tau_si"),
            "xi": rep.get("xi"),
            "final_fidelity": result.summary["final_fidelity_target"],
            "error": "",
        }
    except (CqhjError, ValueError) as exc:
        return {
            "value": value,
            "status": "failed",
            "tau_internal": None,
            "tau_si": None,
            "xi": None,
            "final_fidelity": None,
            "error": f"{type(exc).__name__}: {exc}",
        }


def sweep(scenario: Scenario, param: str, values, workers: int | None = None) -> list[dict]:
    """Run the scenario once per parameter value; rows keep input order."""
    values = list(values)
    # validate the override eagerly so a bad parameter fails before any run
    apply_override(scenario, param, values[0])
    tasks = [(scenario.resolved, param, v) for v in values]
    if workers is None:
        workers = min(len(values), os.cpu_count() or 1)
    if workers <= 1 or len(values) == 1:
        return [_sweep_row(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_row, tasks))


SWEEP_COLUMNS = ["value", "status", "tau_internal", "tau_si", "xi", "final_fidelity", "error"]


def write_sweep_table(rows: list[dict], param: str, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        fh.write(f"# cqhjlab sweep schema_version={SCHEMA_VERSION} param={param}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    _fmt(row["value"]),
                    row["status"],
                    _fmt(row["tau_internal"]) if row["tau_internal"] is not None else "",
                    _fmt(row["tau_si"]) if row["tau_si"] is not None else "",
                    _fmt(row["xi"]) if row["xi"] is not None else "",
                    _fmt(row["final_fidelity"]) if row["final_fidelity"] is not None else "",
                    row["error"],
                ]
            )
    with open(out_dir / "sweep.json", "w") as fh:
        json.dump(
            {"schema_version": SCHEMA_VERSION, "param": param, "rows": rows},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")


def bundled_scenario_names() -> list[str]:
    from importlib import resources

    return sorted(
        p.name[:-4]
        for p in (resources.files("cqhjlab") / "scenarios").iterdir()
        if p.name.endswith(".ini")
    )


def load_bundled_scenario(name: str) -> Scenario:
    """Scenario shipped with the package (name without .ini suffix)."""
    from importlib import resources

    from .errors import ConfigError
    from .scenario import parse_scenario

    ref = resources.files("cqhjlab") / "scenarios" / f"{name}.ini"
    if not ref.is_file():
        raise ConfigError(
            f"no bundled scenario {name!r}; available: {bundled_scenario_names()}"
        )
    return parse_scenario(ref.read_text(), name=name)


def load_scenario_or_bundled(path_or_name: str) -> Scenario:
    p = Path(path_or_name)
    if p.exists():
        return load_scenario(p)
    if "/" not in path_or_name and "\\" not in path_or_name and not path_or_name.endswith(".ini"):
        return load_bundled_scenario(path_or_name)
    return load_scenario(p)  # raises a readable ConfigError
