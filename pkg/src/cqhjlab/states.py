"""Reference wave functions and potentials: Gaussian packets, harmonic
oscillator eigenstates from the stable Hermite-function recurrence, a
brute-force grid eigensolver, and superpositions.

These are the oracles the dynamical solvers are validated against.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from .errors import (
    ConvergenceFailure,
    DomainOverflow,
    GridMismatch,
    UnresolvedState,
    ZeroState,
)
from .grid import (
    Boundary,
    DerivativeScheme,
    Field,
    Grid,
    _readonly,
    integrate,
    laplacian,
    make_field,
    norm,
    require_same_grid,
)


class PotentialKind(Enum):
    FREE = "free"
    HARMONIC = "harmonic"
    BOX = "box"
    DOUBLE_WELL = "double_well"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Potential:
    """Real potential sampled on a grid, tagged with its analytic kind."""

    kind: PotentialKind
    grid: Grid
    samples: np.ndarray
    omega: float | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.shape != (self.grid.n_points,):
            raise ValueError("potential samples do not match the grid")
        if not np.all(np.isfinite(s)):
            raise ValueError("potential samples must be finite")
        object.__setattr__(self, "samples", _readonly(s))


def free_potential(grid: Grid) -> Potential:
    return Potential(PotentialKind.FREE, grid, np.zeros(grid.n_points))


def harmonic_potential(grid: Grid, omega: float) -> Potential:
    if omega <= 0:
        raise ValueError("omega must be positive")
    return Potential(PotentialKind.HARMONIC, grid, 0.5 * omega**2 * grid.x**2, omega=omega)


def box_potential(grid: Grid) -> Potential:
    """Particle in a box: zero potential, hard walls from the Box boundary."""
    if grid.boundary is not Boundary.BOX:
        raise ValueError("box potential requires a Box grid")
    return Potential(PotentialKind.BOX, grid, np.zeros(grid.n_points))


def double_well_potential(grid: Grid, a: float, b: float) -> Potential:
    """Quartic double well V(x) = a (x^2 - b^2)^2 with minima at +-b."""
    if a <= 0 or b <= 0:
        raise ValueError("double-well shape parameters must be positive")
    return Potential(PotentialKind.DOUBLE_WELL, grid, a * (grid.x**2 - b**2) ** 2)


def custom_potential(grid: Grid, samples) -> Potential:
    return Potential(PotentialKind.CUSTOM, grid, samples)


@dataclass(frozen=True)
class EigenPair:
    """Normalized bound state with its energy (internal units)."""

    energy: float
    state: Field


def _normalize(grid: Grid, values: np.ndarray) -> np.ndarray:
    n = np.sqrt(np.dot(grid.quadrature_weights, np.abs(values) ** 2).real)
    if n < 1e-300:
        raise ZeroState("cannot normalize a zero field")
    return values / n


def apply_hamiltonian(psi: Field, V: Potential, scheme: DerivativeScheme) -> Field:
    """H0 psi = -1/2 psi'' + V psi with the given derivative scheme."""
    require_same_grid(psi, V.grid)
    return Field(psi.grid, -0.5 * laplacian(psi, scheme).values + V.samples * psi.values)


def hamiltonian_residual(pair: EigenPair, V: Potential, scheme: DerivativeScheme) -> float:
    """Relative residual |H0 psi - E psi| / |psi| of a candidate eigenpair."""
    hp = apply_hamiltonian(pair.state, V, scheme)
    return norm(hp - pair.energy * pair.state) / norm(pair.state)


def gaussian_packet(grid: Grid, x0: float, k0: float, sigma: float) -> Field:
    """Normalized Gaussian packet exp(-(x-x0)^2/(2 sigma^2) + i k0 x)."""
    if sigma < 4.0 * grid.dx:
        raise UnresolvedState(
            f"sigma = {sigma} is below 4 dx = {4*grid.dx:.3g}; the packet is unresolved"
        )
    envelope_edges = np.exp(
        -((np.array([grid.x_min, grid.x_max]) - x0) ** 2) / (2.0 * sigma**2)
    )
    if np.max(envelope_edges) >= 1e-10:
        raise DomainOverflow("packet support reaches the domain edge above 1e-10 of peak")
    v = np.exp(-((grid.x - x0) ** 2) / (2.0 * sigma**2) + 1j * k0 * grid.x)
    return make_field(grid, _normalize(grid, v))


def ho_eigenstate(n: int, omega: float, grid: Grid, residual_tol: float = 1e-6) -> EigenPair:
    """Harmonic-oscillator eigenstate via the normalized Hermite-function
    three-term recurrence; energy (n + 1/2) omega."""
    if n < 0 or n > 20:
        raise ValueError("eigenstate index must be in 0..20")
    if omega <= 0:
        raise ValueError("omega must be positive")
    xi = np.sqrt(omega) * grid.x
    phi_prev = np.zeros(grid.n_points)
    phi = (omega / np.pi) ** 0.25 * np.exp(-0.5 * xi**2)
    for m in range(1, n + 1):
        phi, phi_prev = (
            np.sqrt(2.0 / m) * xi * phi - np.sqrt((m - 1) / m) * phi_prev,
            phi,
        )
    state = make_field(grid, _normalize(grid, phi.astype(np.complex128)))
    pair = EigenPair(energy=(n + 0.5) * omega, state=state)
    V = harmonic_potential(grid, omega)
    res = hamiltonian_residual(pair, V, grid.best_scheme())
    if res > residual_tol:
        raise UnresolvedState(
            f"oscillator state n={n} is not resolved: residual {res:.3e} > {residual_tol:.1e}"
        )
    return pair


def solve_eigenstates(V: Potential, count: int, grid: Grid) -> list[EigenPair]:
    """Lowest `count` bound states by direct diagonalization of the
    second-order finite-difference Hamiltonian.

    Box grids clamp the wave function to zero at the walls; periodic grids
    wrap the kinetic stencil. Returned states are grid-normalized,
    mutually orthogonal and sign-fixed for reproducibility.
    """
    require_same_grid(V.grid, grid)
    if count < 1:
        raise ValueError("count must be >= 1")
    if count > grid.n_points // 8:
        raise ValueError(f"count must be <= n_points/8 = {grid.n_points // 8}")
    dx = grid.dx
    inv = 1.0 / dx**2
    try:
        if grid.boundary is Boundary.BOX:
            m = grid.n_points - 2
            diag = inv + V.samples[1:-1]
            off = np.full(m - 1, -0.5 * inv)
            energies, vecs = eigh_tridiagonal(
                diag, off, select="i", select_range=(0, count - 1)
            )
            full = np.zeros((grid.n_points, count))
            full[1:-1, :] = vecs
        else:
            H = np.diag(inv + V.samples)
            idx = np.arange(grid.n_points)
            H[idx, (idx + 1) % grid.n_points] -= 0.5 * inv
            H[idx, (idx - 1) % grid.n_points] -= 0.5 * inv
            energies, full = eigh(H, subset_by_index=(0, count - 1))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceFailure(f"eigensolver failed: {exc}") from exc
    pairs = []
    for j in range(count):
        v = full[:, j]
        peak = np.argmax(np.abs(v))
        if v[peak] < 0:
            v = -v
        pairs.append(
            EigenPair(energy=float(energies[j]), state=make_field(grid, _normalize(grid, v.astype(np.complex128))))
        )
    return pairs


def superpose(coefficients, states) -> Field:
    """Normalized linear combination of wave functions on a common grid."""
    states = list(states)
    coefficients = [complex(c) for c in coefficients]
    if len(coefficients) != len(states) or not states:
        raise ValueError("need equally many coefficients and states, at least one")
    if all(abs(c) == 0.0 for c in coefficients):
        raise ZeroState("all superposition coefficients vanish")
    g = states[0].grid
    acc = np.zeros(g.n_points, dtype=np.complex128)
    for c, s in zip(coefficients, states):
        require_same_grid(states[0], s)
        acc += c * s.values
    if norm(Field(g, acc)) < 1e-12:
        raise ZeroState("superposition cancels to numerical zero")
    return make_field(g, _normalize(g, acc))


def position_expectation(psi: Field) -> float:
    dens = np.abs(psi.values) ** 2
    w = psi.grid.quadrature_weights
    return float(np.dot(w, psi.grid.x * dens) / np.dot(w, dens))


def position_variance(psi: Field) -> float:
    dens = np.abs(psi.values) ** 2
    w = psi.grid.quadrature_weights
    mass = np.dot(w, dens)
    mean = np.dot(w, psi.grid.x * dens) / mass
    return float(np.dot(w, (psi.grid.x - mean) ** 2 * dens) / mass)


def overlap(a: Field, b: Field) -> complex:
    require_same_grid(a, b)
    return complex(np.dot(a.grid.quadrature_weights, np.conj(a.values) * b.values))
