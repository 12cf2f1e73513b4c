"""Observables, collapse-time extraction, the dimensionless collapse
measure, and conversion between internal units (hbar = m = 1) and SI.

The dimensionless measure reported here is tau * DeltaE / hbar, the natural
time-energy-uncertainty scale of the initial state. It is an artifact-defined
stand-in chosen by this package, not a published definition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroSpread, ZeroState
from .grid import (
    Boundary,
    DerivativeScheme,
    Field,
    norm,
    require_same_grid,
    symmetric_second_derivative,
)
from .states import Potential, apply_hamiltonian, overlap

HBAR_SI = 1.054571817e-34  # J s
ELECTRON_MASS_KG = 9.1093837015e-31

# reported experimental window for the collapse time, in seconds
BRACKET_MIN_S = 1e-13
BRACKET_MAX_S = 1e-4


def fidelity(a: Field, b: Field) -> float:
    """Squared normalized overlap |<a|b>|^2 / (<a|a><b|b>), in [0, 1]."""
    require_same_grid(a, b)
    na, nb = norm(a), norm(b)
    if na < 1e-150 or nb < 1e-150:
        raise ZeroState("fidelity of a zero state is undefined")
    val = abs(overlap(a, b)) ** 2 / (na**2 * nb**2)
    return float(min(val, 1.0))


def _apply_h_symmetric(psi: Field, V: Potential, scheme: DerivativeScheme | None):
    """H psi with an exactly symmetric discrete Hamiltonian.

    Box grids use the symmetric 4th-order kinetic matrix (one-sided edge
    stencils would break Hermiticity and leak imaginary parts into
    expectation values); periodic grids use the requested scheme, whose
    circulant/spectral operators are symmetric already.
    """
    if psi.grid.boundary is Boundary.BOX:
        L = symmetric_second_derivative(psi.grid)
        out = V.samples * psi.values
        out[1:-1] += -0.5 * (L @ psi.values[1:-1])
        return out
    scheme = scheme or psi.grid.best_scheme()
    return apply_hamiltonian(psi, V, scheme).values


def energy(psi: Field, V: Potential, scheme: DerivativeScheme | None = None) -> float:
    """Expectation of the linear Hamiltonian -1/2 lap + V, normalized.

    The imaginary residual must vanish (V real, symmetric operator); a
    residual above 1e-10 of the energy scale indicates a numerics bug.
    """
    require_same_grid(psi, V.grid)
    hvals = _apply_h_symmetric(psi, V, scheme)
    w = psi.grid.quadrature_weights
    num = complex(np.dot(w, np.conj(psi.values) * hvals))
    den = float(np.dot(w, np.abs(psi.values) ** 2).real)
    if den < 1e-300:
        raise ZeroState("energy of a zero state is undefined")
    val = num / den
    scale = max(1.0, abs(val))
    if abs(val.imag) > 1e-10 * scale:
        raise ValueError(
            f"energy expectation has imaginary residual {val.imag:.3e}"
        )
    return float(val.real)


def energy_spread(
    psi: Field, V: Potential, scheme: DerivativeScheme | None = None
) -> float:
    """Standard deviation of the linear Hamiltonian in the given state."""
    require_same_grid(psi, V.grid)
    hvals = _apply_h_symmetric(psi, V, scheme)
    w = psi.grid.quadrature_weights
    den = float(np.dot(w, np.abs(psi.values) ** 2).real)
    e1 = complex(np.dot(w, np.conj(psi.values) * hvals)) / den
    e2 = float(np.dot(w, np.abs(hvals) ** 2).real) / den
    var = e2 - abs(e1) ** 2
    return float(np.sqrt(max(var, 0.0)))


def collapse_time(traj, epsilon: float, target: Field | None = None):
    """First time the fidelity to the target reaches 1 - epsilon.

    Uses the trajectory's recorded fidelity series (or recomputes it from
    the snapshots when an explicit target is given), with linear
    interpolation between snapshots. Returns None when never attained.
    """
    if not 0.0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 0.5)")
    times = np.asarray(traj.times, dtype=float)
    if target is not None:
        fids = np.array([fidelity(s, target) for s in traj.snapshots])
    else:
        fids = np.asarray(traj.observables.get("fidelity_target"))
        if fids is None or fids.size != times.size:
            raise ValueError("trajectory carries no fidelity-to-target series")
    threshold = 1.0 - epsilon
    above = fids >= threshold
    if not above.any():
        return None
    i = int(np.argmax(above))
    if i == 0:
        return 0.0
    f0, f1 = fids[i - 1], fids[i]
    t0, t1 = times[i - 1], times[i]
    if f1 == f0:
        return float(t1)
    return float(t0 + (threshold - f0) * (t1 - t0) / (f1 - f0))


def dimensionless_measure(
    tau: float, psi0: Field, V: Potential, scheme: DerivativeScheme | None = None
) -> float:
    """Collapse time in units of the initial state's energy-uncertainty
    time: xi = tau * DeltaE (hbar = 1). Artifact-defined stand-in."""
    dE = energy_spread(psi0, V, scheme)
    e0 = abs(energy(psi0, V, scheme))
    if dE <= 1e-6 * max(1.0, e0):
        raise ZeroSpread(
            f"energy spread {dE:.3e} is numerically zero; the measure is undefined"
        )
    return float(tau * dE)


@dataclass(frozen=True)
class UnitSystem:
    """Maps internal units (hbar = m = 1) to SI via a mass and a length scale."""

    mass_kg: float
    length_m: float

    def __post_init__(self):
        if self.mass_kg <= 0 or self.length_m <= 0:
            raise ValueError("unit scales must be positive")

    @property
    def time_scale_s(self) -> float:
        return self.mass_kg * self.length_m**2 / HBAR_SI

    @property
    def energy_scale_j(self) -> float:
        return HBAR_SI / self.time_scale_s

    def to_si(self, tau_internal: float) -> float:
        return tau_internal * self.time_scale_s

    def from_si(self, tau_seconds: float) -> float:
        return tau_seconds / self.time_scale_s


@dataclass(frozen=True)
class CollapseReport:
    """Summary record for one collapse run."""

    tau_internal: float | None
    tau_si: float | None
    epsilon: float
    xi: float | None
    in_experimental_bracket: bool

    def as_dict(self) -> dict:
        return {
            "tau_internal": self.tau_internal,
            "tau_si": self.tau_si,
            "epsilon": self.epsilon,
            "xi": self.xi,
            "xi_definition": "tau * DeltaE / hbar (artifact-defined stand-in)",
            "in_experimental_bracket": self.in_experimental_bracket,
            "bracket_seconds": [BRACKET_MIN_S, BRACKET_MAX_S],
        }


def make_collapse_report(
    tau_internal: float | None,
    epsilon: float,
    psi0: Field | None = None,
    V: Potential | None = None,
    units: UnitSystem | None = None,
) -> CollapseReport:
    """Assemble the collapse report; absent pieces stay None/False."""
    tau_si = None
    xi = None
    bracket = False
    if tau_internal is not None:
        if units is not None:
            tau_si = units.to_si(tau_internal)
            bracket = bool(BRACKET_MIN_S <= tau_si <= BRACKET_MAX_S)
        if psi0 is not None and V is not None:
            try:
                xi = dimensionless_measure(tau_internal, psi0, V)
            except ZeroSpread:
                xi = None
    return CollapseReport(
        tau_internal=tau_internal,
        tau_si=tau_si,
        epsilon=epsilon,
        xi=xi,
        in_experimental_bracket=bracket,
    )
