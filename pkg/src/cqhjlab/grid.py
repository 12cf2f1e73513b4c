"""Spatial grid, complex scalar fields and the 1-D differential/integral
operators that every field equation in this package is evaluated on.

Internal units use hbar = m = 1 throughout; physical units enter only in
the diagnostics layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from enum import Enum
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid

from .errors import GridMismatch, NonFiniteField, PeriodicityViolation, SchemeMismatch


class Boundary(Enum):
    PERIODIC = "periodic"
    BOX = "box"


class DerivativeScheme(Enum):
    SPECTRAL = "spectral"  # FFT-based, periodic grids only
    CENTRAL4 = "central4"  # 4th-order finite differences, either boundary


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a)  # always copy; never freeze a caller-owned buffer
    a.flags.writeable = False
    return a


@lru_cache(maxsize=None)
def _fd_weights(offsets: tuple[int, ...], order: int) -> np.ndarray:
    """Finite-difference weights (in units of dx**-order) for the given
    integer stencil offsets, solved from the moment conditions."""
    n = len(offsets)
    A = np.vander(np.asarray(offsets, dtype=float), n, increasing=True).T
    b = np.zeros(n)
    b[order] = float(math.factorial(order))
    w = np.linalg.solve(A, b)
    w[np.abs(w) < 1e-14] = 0.0
    return _readonly(w)


# 4th-order stencils: central interior, one-sided rows at box edges.
_C4_D1 = (-2, -1, 0, 1, 2)
_C4_D2 = (-2, -1, 0, 1, 2)
_EDGE_D1 = [(0, 1, 2, 3, 4), (-1, 0, 1, 2, 3)]
_EDGE_D2 = [(0, 1, 2, 3, 4, 5), (-1, 0, 1, 2, 3, 4)]


@dataclass(frozen=True)
class Grid:
    """Uniform 1-D grid with a boundary kind.

    Periodic grids sample [x_min, x_max) with dx = L/n; box grids sample
    [x_min, x_max] inclusive with dx = L/(n-1) and implicit hard walls.
    """

    x_min: float
    x_max: float
    n_points: int
    boundary: Boundary
    _x: np.ndarray = dc_field(init=False, repr=False, compare=False)
    _weights: np.ndarray = dc_field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")
        if self.n_points < 16:
            raise ValueError(f"n_points must be >= 16, got {self.n_points}")
        length = self.x_max - self.x_min
        if self.boundary is Boundary.PERIODIC:
            x = self.x_min + self.dx * np.arange(self.n_points)
            w = np.full(self.n_points, self.dx)
        else:
            x = np.linspace(self.x_min, self.x_max, self.n_points)
            w = np.full(self.n_points, self.dx)
            w[0] = w[-1] = 0.5 * self.dx
        del length
        object.__setattr__(self, "_x", _readonly(x))
        object.__setattr__(self, "_weights", _readonly(w))

    @property
    def dx(self) -> float:
        span = self.x_max - self.x_min
        if self.boundary is Boundary.PERIODIC:
            return span / self.n_points
        return span / (self.n_points - 1)

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def x(self) -> np.ndarray:
        return self._x

    @property
    def quadrature_weights(self) -> np.ndarray:
        return self._weights

    @property
    def wavenumbers(self) -> np.ndarray:
        """FFT-ordered angular wavenumbers (periodic grids)."""
        if self.boundary is not Boundary.PERIODIC:
            raise SchemeMismatch("wavenumbers are defined for periodic grids only")
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    def best_scheme(self) -> DerivativeScheme:
        if self.boundary is Boundary.PERIODIC:
            return DerivativeScheme.SPECTRAL
        return DerivativeScheme.CENTRAL4


def require_same_grid(a: "Field | Grid", b: "Field | Grid") -> Grid:
    ga = a if isinstance(a, Grid) else a.grid
    gb = b if isinstance(b, Grid) else b.grid
    if ga != gb:
        raise GridMismatch(f"grids differ: {ga} vs {gb}")
    return ga


@dataclass(frozen=True)
class Field:
    """Complex scalar field sampled on a grid. Immutable value object."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != (self.grid.n_points,):
            raise ValueError(
                f"field length {v.shape} does not match grid ({self.grid.n_points},)"
            )
        object.__setattr__(self, "values", _readonly(v))

    def check_finite(self) -> "Field":
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteField("field contains NaN or Inf entries")
        return self

    # -- light arithmetic so field equations read like the math ---------
    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Field):
            require_same_grid(self, other)
            return other.values
        return np.asarray(other, dtype=np.complex128)

    def __add__(self, other):
        return Field(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return Field(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._coerce(other))

    def __neg__(self):
        return Field(self.grid, -self.values)

    def conj(self) -> "Field":
        return Field(self.grid, np.conj(self.values))

    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    @property
    def imag(self) -> np.ndarray:
        return self.values.imag


def make_field(grid: Grid, values) -> Field:
    return Field(grid, values).check_finite()


def _check_scheme(grid: Grid, scheme: DerivativeScheme) -> None:
    if scheme is DerivativeScheme.SPECTRAL and grid.boundary is not Boundary.PERIODIC:
        raise SchemeMismatch("spectral differentiation requires a periodic grid")


def _spectral_derivative(grid: Grid, v: np.ndarray, order: int) -> np.ndarray:
    k = grid.wavenumbers
    mult = (1j * k) ** order
    if order % 2 == 1 and grid.n_points % 2 == 0:
        # the unpaired Nyquist mode has no well-defined odd derivative
        mult = mult.copy()
        mult[grid.n_points // 2] = 0.0
    return np.fft.ifft(mult * np.fft.fft(v))


def _stencil_apply_periodic(v, offsets, weights, dx, order):
    out = np.zeros_like(v)
    for off, w in zip(offsets, weights):
        if w != 0.0:
            out += w * np.roll(v, -off)
    return out / dx**order


def _stencil_apply_box(v, dx, order):
    central = _C4_D1 if order == 1 else _C4_D2
    edges = _EDGE_D1 if order == 1 else _EDGE_D2
    wc = _fd_weights(central, order)
    n = len(v)
    out = np.empty_like(v)
    half = 2
    acc = np.zeros_like(v[half : n - half])
    for off, w in zip(central, wc):
        if w != 0.0:
            acc = acc + w * v[half + off : n - half + off]
    out[half : n - half] = acc
    for row, offs in enumerate(edges):
        w = _fd_weights(offs, order)
        out[row] = np.dot(w, v[[row + o for o in offs]])
        out[n - 1 - row] = np.dot(w * (-1.0) ** order, v[[n - 1 - row - o for o in offs]])
    return out / dx**order


def _derivative(f: Field, scheme: DerivativeScheme, order: int) -> Field:
    f.check_finite()
    _check_scheme(f.grid, scheme)
    if scheme is DerivativeScheme.SPECTRAL:
        return Field(f.grid, _spectral_derivative(f.grid, f.values, order))
    if f.grid.boundary is Boundary.PERIODIC:
        offsets = _C4_D1 if order == 1 else _C4_D2
        w = _fd_weights(offsets, order)
        return Field(f.grid, _stencil_apply_periodic(f.values, offsets, w, f.grid.dx, order))
    return Field(f.grid, _stencil_apply_box(f.values, f.grid.dx, order))


def gradient(f: Field, scheme: DerivativeScheme) -> Field:
    """First spatial derivative of a complex field."""
    return _derivative(f, scheme, 1)


def laplacian(f: Field, scheme: DerivativeScheme) -> Field:
    """Second spatial derivative of a complex field."""
    return _derivative(f, scheme, 2)


def integrate(f: Field) -> complex:
    """Quadrature of f over the domain: rectangle rule on periodic grids,
    trapezoid on box grids."""
    f.check_finite()
    return complex(np.dot(f.grid.quadrature_weights, f.values))


def norm(f: Field) -> float:
    return float(np.sqrt(np.dot(f.grid.quadrature_weights, np.abs(f.values) ** 2).real))


def cumulative_integral(
    f: Field, *, periodic_tolerance: float = 1e-8
) -> Field:
    """Antiderivative F(x)anchored at the left edge, F(x_min) = 0.

    Periodic grids use the exact spectral antiderivative and demand a
    (numerically) zero mean, otherwise the result would be multi-valued.
    Box grids use trapezoid summation with an endpoint-derivative
    correction, giving 4th-order global accuracy so that the discrete
    gradient inverts this operation to discretization tolerance.
    """
    f.check_finite()
    g = f.grid
    v = f.values
    if g.boundary is Boundary.PERIODIC:
        total = abs(integrate(f))
        # relative criterion with an absolute floor: near-zero fields have a
        # harmless (tiny) multivaluedness that must not trip the check
        scale = max(g.length * float(np.max(np.abs(v))), 1.0)
        if total > periodic_tolerance * scale:
            raise PeriodicityViolation(
                f"cumulative integral on periodic grid is multi-valued: "
                f"|integral| = {total:.3e} exceeds {periodic_tolerance:.1e} * max(L max|f|, 1)"
            )
        fhat = np.fft.fft(v)
        k = g.wavenumbers
        mean = fhat[0] / g.n_points
        with np.errstate(divide="ignore", invalid="ignore"):
            Fhat = np.where(k != 0.0, fhat / (1j * k), 0.0)
        F = np.fft.ifft(Fhat) + mean * (g.x - g.x_min)
        F = F - F[0]
        return Field(g, F)
    F = cumulative_trapezoid(v, dx=g.dx, initial=0.0)
    fp = gradient(f, DerivativeScheme.CENTRAL4).values
    F = F - (g.dx**2 / 12.0) * (fp - fp[0])
    return Field(g, F)


@lru_cache(maxsize=32)
def symmetric_second_derivative(grid: Grid) -> sp.spmatrix:
    """Symmetric 4th-order second-derivative operator D2 - dx^2/12 D2^2,
    with D2 the three-point stencil (Dirichlet-clipped to the interior on
    box grids, wrapped on periodic ones).

    Exact symmetry is what makes Cayley time stepping norm-preserving and
    expectation values of the kinetic term exactly real; accuracy is 4th
    order in the interior.
    """
    n = grid.n_points if grid.boundary is Boundary.PERIODIC else grid.n_points - 2
    inv = 1.0 / grid.dx**2
    if grid.boundary is Boundary.PERIODIC:
        D2 = sp.diags_array(
            [np.full(n, -2.0 * inv), np.full(n - 1, inv), np.full(n - 1, inv), [inv], [inv]],
            offsets=[0, 1, -1, n - 1, -(n - 1)],
            format="csr",
        )
    else:
        D2 = sp.diags_array(
            [np.full(n, -2.0 * inv), np.full(n - 1, inv), np.full(n - 1, inv)],
            offsets=[0, 1, -1],
            format="csr",
        )
    return (D2 - (grid.dx**2 / 12.0) * (D2 @ D2)).tocsr()
