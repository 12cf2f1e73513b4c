"""Declarative run scenarios: a flat, sectioned key-value config format
(INI dialect) that parses into a fully validated Scenario object.

Every default is made explicit in the resolved echo that lands in the run
manifest, so a config plus its echo fully documents a run.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

from .diagnostics import UnitSystem
from .errors import ConfigError
from .evolve import IntegratorSpec, Method
from .forces import CollapseForce, kostin_friction, null_force, pinning_force
from .grid import Boundary, Field, Grid
from .states import (
    Potential,
    box_potential,
    double_well_potential,
    free_potential,
    gaussian_packet,
    harmonic_potential,
    ho_eigenstate,
    solve_eigenstates,
    superpose,
)

SCHEMA_VERSION = 1

_BOUNDARIES = {"box": Boundary.BOX, "periodic": Boundary.PERIODIC}
_METHODS = {
    "split_step": Method.SPLIT_STEP,
    "crank_nicolson": Method.CRANK_NICOLSON,
}


@dataclass(frozen=True)
class Scenario:
    """Validated scenario; `resolved` echoes every effective setting."""

    resolved: dict

    # -- builders ---------------------------------------------------------
    def build_grid(self) -> Grid:
        g = self.resolved["grid"]
        return Grid(g["x_min"], g["x_max"], g["n_points"], _BOUNDARIES[g["boundary"]])

    def build_potential(self, grid: Grid) -> Potential:
        p = self.resolved["potential"]
        kind = p["kind"]
        if kind == "free":
            return free_potential(grid)
        if kind == "harmonic":
            return harmonic_potential(grid, p["omega"])
        if kind == "box":
            return box_potential(grid)
        if kind == "double_well":
            return double_well_potential(grid, p["a"], p["b"])
        raise ConfigError(f"unknown potential kind {kind!r}")

    def _eigenstate(self, index: int, grid: Grid, V: Potential) -> Field:
        if self.resolved["potential"]["kind"] == "harmonic":
            return ho_eigenstate(index, self.resolved["potential"]["omega"], grid).state
        pairs = solve_eigenstates(V, index + 1, grid)
        return pairs[index].state

    def build_initial_state(self, grid: Grid, V: Potential) -> Field:
        s = self.resolved["initial_state"]
        kind = s["kind"]
        if kind == "packet":
            return gaussian_packet(grid, s["x0"], s["k0"], s["sigma"])
        if kind == "eigenstate":
            return self._eigenstate(s["index"], grid, V)
        if kind == "superposition":
            states = [self._eigenstate(i, grid, V) for i in s["indices"]]
            return superpose(s["coefficients"], states)
        raise ConfigError(f"unknown initial state kind {kind!r}")

    def build_force(self, grid: Grid, V: Potential) -> CollapseForce:
        f = self.resolved["force"]
        kind = f["kind"]
        if kind == "null":
            return null_force()
        if kind == "pinning":
            target = self._eigenstate(f["target_index"], grid, V)
            return pinning_force(
                target, f["kappa"], node_threshold=self.resolved["run"]["node_threshold"]
            )
        if kind == "kostin":
            return kostin_friction(f["gamma"])
        raise ConfigError(f"unknown force kind {kind!r}")

    def build_integrator(self) -> IntegratorSpec:
        i = self.resolved["integrator"]
        return IntegratorSpec(
            method=_METHODS[i["method"]],
            dt=i["dt"],
            renormalize_each_step=i["renormalize"],
        )

    def build_fidelity_target(self, grid: Grid, V: Potential) -> Field | None:
        idx = self.resolved["run"]["fidelity_target_index"]
        if idx is None:
            return None
        return self._eigenstate(idx, grid, V)

    def build_units(self) -> UnitSystem | None:
        u = self.resolved.get("units")
        if u is None:
            return None
        return UnitSystem(mass_kg=u["mass_kg"], length_m=u["length_m"])


_REQUIRED = object()


class _SectionReader:
    """Typed access to one config section with section.key error anchors."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        if not parser.has_section(name):
            raise ConfigError(f"missing required section [{name}]")
        self.section = parser[name]

    def _raw(self, key: str, default=_REQUIRED):
        if key not in self.section:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key {self.name}.{key}")
            return default
        return self.section[key].strip()

    def string(self, key, choices=None, default=_REQUIRED):
        v = self._raw(key, default)
        if not isinstance(v, str):
            return v
        v = v.lower()
        if choices and v not in choices:
            raise ConfigError(
                f"{self.name}.{key} must be one of {sorted(choices)}, got {v!r}"
            )
        return v

    def number(self, key, default=_REQUIRED, positive=False):
        v = self._raw(key, default)
        if isinstance(v, str):
            try:
                v = float(v)
            except ValueError as exc:
                raise ConfigError(f"{self.name}.{key} is not a number: {v!r}") from exc
        if v is not None and positive and not v > 0:
            raise ConfigError(f"{self.name}.{key} must be positive, got {v}")
        return v

    def integer(self, key, default=_REQUIRED, minimum=None):
        v = self._raw(key, default)
        if isinstance(v, str):
            try:
                v = int(v)
            except ValueError as exc:
                raise ConfigError(f"{self.name}.{key} is not an integer: {v!r}") from exc
        if v is not None and minimum is not None and v < minimum:
            raise ConfigError(f"{self.name}.{key} must be >= {minimum}, got {v}")
        return v

    def boolean(self, key, default=_REQUIRED):
        v = self._raw(key, default)
        if isinstance(v, str):
            if v.lower() in ("true", "yes", "1", "on"):
                return True
            if v.lower() in ("false", "no", "0", "off"):
                return False
            raise ConfigError(f"{self.name}.{key} is not a boolean: {v!r}")
        return v

    def int_list(self, key):
        raw = self._raw(key)
        try:
            return [int(t.strip()) for t in raw.split(",") if t.strip()]
        except ValueError as exc:
            raise ConfigError(f"{self.name}.{key} is not an integer list: {raw!r}") from exc

    def complex_list(self, key):
        raw = self._raw(key)
        try:
            return [complex(t.strip().replace(" ", "")) for t in raw.split(",") if t.strip()]
        except ValueError as exc:
            raise ConfigError(f"{self.name}.{key} is not a complex list: {raw!r}") from exc


def _parse_target(reader: _SectionReader, key: str) -> int:
    raw = reader._raw(key)
    if not raw.startswith("eigenstate:"):
        raise ConfigError(
            f"{reader.name}.{key} must look like 'eigenstate:<index>', got {raw!r}"
        )
    try:
        return int(raw.split(":", 1)[1])
    except ValueError as exc:
        raise ConfigError(f"{reader.name}.{key} has a non-integer index: {raw!r}") from exc


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    """Parse and validate a scenario config; raises ConfigError with the
    offending section.key (or the parser's line-numbered message)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=name)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc

    grid = _SectionReader(parser, "grid")
    resolved_grid = {
        "x_min": grid.number("x_min"),
        "x_max": grid.number("x_max"),
        "n_points": grid.integer("n_points", minimum=16),
        "boundary": grid.string("boundary", choices=set(_BOUNDARIES)),
    }
    if not resolved_grid["x_max"] > resolved_grid["x_min"]:
        raise ConfigError("grid.x_max must exceed grid.x_min")

    pot = _SectionReader(parser, "potential")
    kind = pot.string("kind", choices={"free", "harmonic", "box", "double_well"})
    resolved_pot: dict = {"kind": kind}
    if kind == "harmonic":
        resolved_pot["omega"] = pot.number("omega", positive=True)
    elif kind == "double_well":
        resolved_pot["a"] = pot.number("a", positive=True)
        resolved_pot["b"] = pot.number("b", positive=True)
    if kind == "box" and resolved_grid["boundary"] != "box":
        raise ConfigError("potential.kind box requires grid.boundary = box")

    init = _SectionReader(parser, "initial_state")
    ikind = init.string("kind", choices={"packet", "eigenstate", "superposition"})
    resolved_init: dict = {"kind": ikind}
    if ikind == "packet":
        resolved_init.update(
            x0=init.number("x0"),
            k0=init.number("k0"),
            sigma=init.number("sigma", positive=True),
        )
    elif ikind == "eigenstate":
        resolved_init["index"] = init.integer("index", minimum=0)
    else:
        indices = init.int_list("indices")
        coefficients = init.complex_list("coefficients")
        if len(indices) != len(coefficients) or not indices:
            raise ConfigError(
                "initial_state.indices and initial_state.coefficients must have "
                "equal nonzero length"
            )
        resolved_init["indices"] = indices
        resolved_init["coefficients"] = [str(c) for c in coefficients]

    force = _SectionReader(parser, "force")
    fkind = force.string("kind", choices={"null", "pinning", "kostin"})
    resolved_force: dict = {"kind": fkind}
    if fkind == "pinning":
        resolved_force["kappa"] = force.number("kappa", positive=True)
        resolved_force["target_index"] = _parse_target(force, "target")
    elif fkind == "kostin":
        resolved_force["gamma"] = force.number("gamma", positive=True)

    integ = _SectionReader(parser, "integrator")
    resolved_integ = {
        "method": integ.string("method", choices=set(_METHODS)),
        "dt": integ.number("dt", positive=True),
        "renormalize": integ.boolean("renormalize", default=True),
    }
    if resolved_integ["method"] == "split_step" and resolved_grid["boundary"] != "periodic":
        raise ConfigError("integrator.method split_step requires grid.boundary = periodic")

    run = _SectionReader(parser, "run")
    resolved_run = {
        "t_final": run.number("t_final", positive=True),
        "snapshot_stride": run.integer("snapshot_stride", default=10, minimum=1),
        "collapse_epsilon": run.number("collapse_epsilon", default=1e-3),
        "node_threshold": run.number("node_threshold", default=1e-6, positive=True),
        "write_snapshots": run.boolean("write_snapshots", default=False),
    }
    eps = resolved_run["collapse_epsilon"]
    if not 0.0 < eps < 0.5:
        raise ConfigError(f"run.collapse_epsilon must lie in (0, 0.5), got {eps}")
    if "fidelity_target" in parser["run"]:
        resolved_run["fidelity_target_index"] = _parse_target(run, "fidelity_target")
    elif fkind == "pinning":
        resolved_run["fidelity_target_index"] = resolved_force["target_index"]
    else:
        resolved_run["fidelity_target_index"] = None

    resolved: dict = {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "grid": resolved_grid,
        "potential": resolved_pot,
        "initial_state": resolved_init,
        "force": resolved_force,
        "integrator": resolved_integ,
        "run": resolved_run,
    }

    if parser.has_section("units"):
        units = _SectionReader(parser, "units")
        resolved["units"] = {
            "mass_kg": units.number("mass_kg", positive=True),
            "length_m": units.number("length_m", positive=True),
        }

    out = _SectionReader(parser, "output") if parser.has_section("output") else None
    resolved["output"] = {
        "directory": (out._raw("directory", "runs") if out else "runs"),
    }

    known = {"grid", "potential", "initial_state", "force", "integrator", "run", "units", "output"}
    extra = set(parser.sections()) - known
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")

    return Scenario(resolved=resolved)


def load_scenario(path) -> Scenario:
    from pathlib import Path

    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {p}: {exc}") from exc
    return parse_scenario(text, name=p.stem)


def apply_override(scenario: Scenario, param: str, value: float) -> Scenario:
    """New scenario with one dotted numeric field replaced (e.g. force.kappa)."""
    parts = param.split(".")
    if len(parts) != 2:
        raise ConfigError(f"sweep parameter must look like section.key, got {param!r}")
    section, key = parts
    resolved = {k: (dict(v) if isinstance(v, dict) else v) for k, v in scenario.resolved.items()}
    if section not in resolved or not isinstance(resolved[section], dict):
        raise ConfigError(f"unknown scenario section {section!r}")
    if key not in resolved[section]:
        raise ConfigError(f"unknown scenario key {param!r}")
    old = resolved[section][key]
    if not isinstance(old, (int, float)) or isinstance(old, bool):
        raise ConfigError(f"sweep parameter {param!r} is not numeric")
    resolved[section][key] = type(old)(value) if isinstance(old, int) else float(value)
    return Scenario(resolved=resolved)
