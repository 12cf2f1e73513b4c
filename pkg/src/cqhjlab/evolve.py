"""Time evolution engines.

Three integrators:

- split-step Fourier (Strang splitting, periodic grids): unitary up to
  roundoff, used for high-accuracy spectral runs;
- Crank-Nicolson with a symmetric 4th-order spatial operator: exactly
  norm-preserving Cayley stepping, works with hard walls;
- classical RK4 on the momentum-field equation for direct evolution in
  the momentum representation.

The nonlinear (collapsible) evolution integrates the wave-function form
i psi_t = H0 psi - Phi psi with grad Phi = F(p): a Strang step whose
nonlinear gauge phase is solved by implicit-midpoint fixed-point
iteration. The state is renormalized every step and the applied scale
factor is logged, which keeps the homogeneous dynamics auditable.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from .cqhj import (
    GaugeFactor,
    MomentumField,
    cqhj_rhs,
    hamiltonian_field_from_state,
    masked_stats,
    psi_to_p,
    p_to_psi,
)
from .errors import (
    AllMasked,
    FixedPointDivergence,
    NodeApproach,
    NodeBlowup,
    PeriodicityViolation,
    SchemeMismatch,
    StabilityViolation,
)
from .forces import CollapseForce, ForceKind, evaluate as evaluate_force, gauge_potential
from .grid import (
    Boundary,
    DerivativeScheme,
    Field,
    Grid,
    cumulative_integral,
    gradient,
    make_field,
    norm,
    symmetric_second_derivative,
)
from .states import Potential

OBSERVABLE_NODE_THRESHOLD = 1e-5


class Method(Enum):
    SPLIT_STEP = "split_step"
    CRANK_NICOLSON = "crank_nicolson"
    RK4 = "rk4"


@dataclass(frozen=True)
class IntegratorSpec:
    method: Method
    dt: float
    renormalize_each_step: bool = True

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass
class Trajectory:
    """Recorded time series of an evolution run."""

    times: np.ndarray
    snapshots: list
    gauge_log: list[GaugeFactor] = dc_field(default_factory=list)
    observables: dict[str, np.ndarray] = dc_field(default_factory=dict)

    @property
    def final_state(self):
        return self.snapshots[-1]


# --------------------------------------------------------------------------
# linear kernels


class _SplitStepKernel:
    """One Strang step exp(-iV dt/2) exp(-iK dt) exp(-iV dt/2) via FFT."""

    def __init__(self, grid: Grid, V: Potential, dt: float):
        if grid.boundary is not Boundary.PERIODIC:
            raise SchemeMismatch("split-step requires a periodic grid")
        k = grid.wavenumbers
        e_max = 0.5 * np.max(k) ** 2
        if dt * e_max > 0.1:
            raise StabilityViolation(
                f"split-step needs dt * E_max <= 0.1; got {dt * e_max:.3g} "
                f"(dt={dt:.3g}, kinetic cutoff E_max={e_max:.3g})"
            )
        self.half_v = np.exp(-0.5j * dt * V.samples)
        self.kinetic = np.exp(-0.5j * dt * k**2)

    def step(self, values: np.ndarray) -> np.ndarray:
        v = values * self.half_v
        v = np.fft.ifft(self.kinetic * np.fft.fft(v))
        return v * self.half_v


class _CrankNicolsonKernel:
    """Cayley step (1 + i dt H / 2)^-1 (1 - i dt H / 2) with H built from
    the symmetric 4th-order kinetic operator. Box grids hold the walls at
    zero; periodic grids use a prefactored sparse LU."""

    def __init__(self, grid: Grid, V: Potential, dt: float):
        self.grid = grid
        self.box = grid.boundary is Boundary.BOX
        L = symmetric_second_derivative(grid)
        v = V.samples[1:-1] if self.box else V.samples
        H = (-0.5 * L + sp.diags_array(v.astype(np.complex128))).tocsc()
        n = H.shape[0]
        eye = sp.identity(n, dtype=np.complex128, format="csc")
        A = (eye + 0.5j * dt * H).tocsc()
        self.B = (eye - 0.5j * dt * H).tocsr()
        if self.box:
            # pentadiagonal banded solve
            ab = np.zeros((5, n), dtype=np.complex128)
            Ad = A.todia()
            for off, row in zip(Ad.offsets, Ad.data):
                ab[2 - off, :] = row
            self._ab = ab
            self._solve = lambda rhs: solve_banded((2, 2), self._ab, rhs)
        else:
            lu = splu(A)
            self._solve = lu.solve

    def step(self, values: np.ndarray) -> np.ndarray:
        if self.box:
            inner = self._solve(self.B @ values[1:-1])
            out = np.zeros_like(values)
            out[1:-1] = inner
            return out
        return self._solve(self.B @ values)


def _make_kernel(grid: Grid, V: Potential, dt: float, method: Method):
    if method is Method.SPLIT_STEP:
        return _SplitStepKernel(grid, V, dt)
    if method is Method.CRANK_NICOLSON:
        return _CrankNicolsonKernel(grid, V, dt)
    raise ValueError(f"{method} is not a wave-function propagation method")


# --------------------------------------------------------------------------
# observables


def _record_psi_observables(
    store: dict,
    psi: Field,
    V: Potential,
    target: Field | None,
    gauge_log_magnitude: float = 0.0,
    gauge_phase: float = 0.0,
) -> None:
    from .diagnostics import energy, fidelity

    scheme = psi.grid.best_scheme()
    store.setdefault("norm", []).append(norm(psi))
    store.setdefault("energy", []).append(energy(psi, V, scheme))
    if target is not None:
        store.setdefault("fidelity_target", []).append(fidelity(psi, target))
    H, mask = hamiltonian_field_from_state(
        psi, V, scheme, node_threshold=OBSERVABLE_NODE_THRESHOLD
    )
    mean, std = masked_stats(H, mask)
    store.setdefault("H_mean_re", []).append(mean.real)
    store.setdefault("H_std", []).append(std)
    store.setdefault("gauge_log_magnitude", []).append(gauge_log_magnitude)
    store.setdefault("gauge_phase", []).append(gauge_phase)


def _finalize_observables(store: dict) -> dict[str, np.ndarray]:
    return {k: np.asarray(v) for k, v in store.items()}


# --------------------------------------------------------------------------
# propagators


def schrodinger_evolve(
    psi0: Field,
    V: Potential,
    spec: IntegratorSpec,
    t_final: float,
    *,
    snapshot_stride: int = 1,
    target: Field | None = None,
) -> Trajectory:
    """Linear Schroedinger evolution of a wave function to t_final.

    Split-step requires dt * E_max <= 0.1 with E_max the kinetic cutoff
    (enforced, StabilityViolation otherwise). Crank-Nicolson is
    unconditionally stable; dt only controls accuracy, with phase errors
    O(dt^2 E^3) per unit time for energy-E components.
    """
    if spec.method is Method.RK4:
        raise ValueError("RK4 integrates the momentum-field equation, not psi")
    kernel = _make_kernel(psi0.grid, V, spec.dt, spec.method)
    n_steps = max(1, int(round(t_final / spec.dt)))
    psi = psi0.values.copy()
    times = [0.0]
    snaps = [Field(psi0.grid, psi)]
    gauge: list[GaugeFactor] = []
    obs: dict = {}
    cum_log = 0.0
    _record_psi_observables(obs, snaps[0], V, target, cum_log)
    for step in range(1, n_steps + 1):
        psi = kernel.step(psi)
        if spec.renormalize_each_step:
            scale = norm(Field(psi0.grid, psi))
            psi = psi / scale
            cum_log += -float(np.log(scale))
            gauge.append(GaugeFactor(log_magnitude=-float(np.log(scale)), phase=0.0))
        if step % snapshot_stride == 0 or step == n_steps:
            f = make_field(psi0.grid, psi)
            times.append(step * spec.dt)
            snaps.append(f)
            _record_psi_observables(obs, f, V, target, cum_log)
    return Trajectory(
        times=np.asarray(times),
        snapshots=snaps,
        gauge_log=gauge,
        observables=_finalize_observables(obs),
    )


def _rk4_stability_limit(grid: Grid, scheme: DerivativeScheme) -> float:
    if scheme is DerivativeScheme.SPECTRAL:
        k2max = np.max(grid.wavenumbers) ** 2
    else:
        k2max = (16.0 / 3.0) / grid.dx**2
    return 2.8 / (0.5 * k2max)


def cqhj_evolve(
    p0: MomentumField,
    V: Potential,
    spec: IntegratorSpec,
    t_final: float,
    *,
    snapshot_stride: int = 1,
    scheme: DerivativeScheme | None = None,
    node_threshold: float = 1e-6,
    target: Field | None = None,
) -> Trajectory:
    """Direct momentum-space evolution p_t = rhs(p) by classical RK4.

    The reconstructed magnitude is monitored each step; if it dips below
    the node threshold the run aborts with the partial trajectory attached
    to the NodeApproach error.

    On box grids every step ends with the re-projection p -> grad(int p),
    the discrete form of the exact identity p = -i grad(psi)/psi for
    psi = exp(i int p). The momentum equation is well posed only in the
    |psi|^2-weighted geometry, so in unweighted floating point spurious
    modes localized where |psi| is tiny grow exponentially; the projection
    annihilates them (it is the identity on resolvable physical fields).
    On periodic grids the projection is the identity and is skipped.
    """
    if spec.method is not Method.RK4:
        raise ValueError("momentum-space evolution uses the RK4 method")
    p0.require_nodeless()
    grid = p0.grid
    scheme = scheme or grid.best_scheme()
    dt_max = _rk4_stability_limit(grid, scheme)
    if spec.dt > dt_max:
        raise StabilityViolation(
            f"RK4 needs dt <= {dt_max:.3e} for this grid/scheme, got {spec.dt:.3e}"
        )
    empty = np.zeros(grid.n_points, dtype=bool)
    project = grid.boundary is Boundary.BOX

    def rhs(vals: np.ndarray) -> np.ndarray:
        pf = MomentumField(Field(grid, vals), empty)
        return cqhj_rhs(pf, V, scheme).values

    def record(vals: np.ndarray, t: float):
        pf = MomentumField(Field(grid, vals), empty)
        times.append(t)
        snaps.append(pf)
        try:
            psi, gf = p_to_psi(pf)
            gauge.append(gf)
            _record_psi_observables(obs, psi, V, target, gf.log_magnitude, gf.phase)
        except PeriodicityViolation:
            # winding fields have no single-valued reconstruction; keep the
            # observable series aligned with the snapshot series
            keys = ["norm", "energy", "H_mean_re", "H_std", "gauge_log_magnitude", "gauge_phase"]
            if target is not None:
                keys.insert(2, "fidelity_target")
            for key in keys:
                store = obs.setdefault(key, [])
                store.append(np.nan)

    n_steps = max(1, int(round(t_final / spec.dt)))
    vals = p0.values.copy()
    times: list[float] = []
    snaps: list[MomentumField] = []
    gauge: list[GaugeFactor] = []
    obs: dict = {}
    record(vals, 0.0)
    dt = spec.dt
    for step in range(1, n_steps + 1):
        k1 = rhs(vals)
        k2 = rhs(vals + 0.5 * dt * k1)
        k3 = rhs(vals + 0.5 * dt * k2)
        k4 = rhs(vals + dt * k3)
        vals = vals + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if project:
            vals = gradient(cumulative_integral(Field(grid, vals)), scheme).values
        # node monitor: magnitude ~ exp(-cumulative Im p)
        c = np.cumsum(vals.imag) * grid.dx
        rel = np.exp(-(c - c.min()))
        if rel.min() / rel.max() < node_threshold or not np.all(np.isfinite(vals)):
            partial = Trajectory(
                times=np.asarray(times),
                snapshots=snaps,
                gauge_log=gauge,
                observables=_finalize_observables(obs),
            )
            raise NodeApproach(
                f"reconstructed magnitude fell below the node threshold at "
                f"t = {step * dt:.6g}",
                trajectory=partial,
            )
        if step % snapshot_stride == 0 or step == n_steps:
            record(vals, step * dt)
    return Trajectory(
        times=np.asarray(times),
        snapshots=snaps,
        gauge_log=gauge,
        observables=_finalize_observables(obs),
    )


def collapsible_evolve(
    psi0: Field,
    V: Potential,
    force: CollapseForce,
    spec: IntegratorSpec,
    t_final: float,
    *,
    snapshot_stride: int = 1,
    node_threshold: float = 1e-6,
    scheme: DerivativeScheme | None = None,
    fixed_point_tol: float = 1e-12,
    max_fixed_point_iter: int = 50,
    target: Field | None = None,
) -> Trajectory:
    """Nonlinear collapse evolution in the wave-function (gauge) form.

    Strang composition per step: linear half step, nonlinear gauge-phase
    step exp(i dt Phi) with Phi the line-integral lift of the force
    evaluated at the implicit midpoint, linear half step. Any nonzero
    input norm is accepted; the entry normalization and every per-step
    renormalization factor are recorded in the gauge log.
    """
    if spec.method is Method.RK4:
        raise ValueError("collapsible evolution integrates psi, not p")
    grid = psi0.grid
    scheme = scheme or grid.best_scheme()
    kernel = _make_kernel(grid, V, 0.5 * spec.dt, spec.method)
    gauge: list[GaugeFactor] = []

    psi = psi0.values.copy()
    scale = norm(Field(grid, psi))
    if scale == 0.0:
        raise AllMasked("initial state has zero norm")
    psi = psi / scale
    cum_log = -float(np.log(scale))
    gauge.append(GaugeFactor(log_magnitude=cum_log, phase=0.0))

    def phi_of(vals: np.ndarray, t: float) -> np.ndarray:
        try:
            p = psi_to_p(Field(grid, vals), scheme, node_threshold)
        except AllMasked as exc:
            raise NodeBlowup(
                "force evaluation has no unmasked momentum values left"
            ) from exc
        f = evaluate_force(force, p, t)
        if grid.boundary is Boundary.PERIODIC:
            # a small mean component is near-node regularization residue:
            # drop it (no single-valued lift exists for it) instead of
            # letting it tilt the domain; a genuinely winding force still
            # fails the lift below.
            mean = np.dot(grid.quadrature_weights, f.values) / grid.length
            if abs(mean) * grid.length <= 1e-4 * max(float(np.max(np.abs(f.values))), 1.0):
                f = Field(grid, f.values - mean)
        return gauge_potential(f).values

    dt = spec.dt
    n_steps = max(1, int(round(t_final / dt)))
    times = [0.0]
    snaps = [Field(grid, psi)]
    obs: dict = {}
    _record_psi_observables(obs, snaps[0], V, target, cum_log)
    is_null = force.kind is ForceKind.NULL
    for step in range(1, n_steps + 1):
        a = kernel.step(psi)
        if is_null:
            b = a
        else:
            t_mid = (step - 0.5) * dt
            phase = np.exp(1j * dt * phi_of(a, t_mid))
            guess = a * phase
            for _ in range(max_fixed_point_iter):
                mid = 0.5 * (a + guess)
                new = a * np.exp(1j * dt * phi_of(mid, t_mid))
                delta = norm(Field(grid, new - guess))
                guess = new
                if delta <= fixed_point_tol:
                    break
            else:
                raise FixedPointDivergence(
                    f"nonlinear midpoint iteration did not reach {fixed_point_tol:.1e} "
                    f"in {max_fixed_point_iter} iterations at t = {step * dt:.6g}"
                )
            b = guess
        psi = kernel.step(b)
        if spec.renormalize_each_step:
            scale = norm(Field(grid, psi))
            psi = psi / scale
            cum_log += -float(np.log(scale))
            gauge.append(GaugeFactor(log_magnitude=-float(np.log(scale)), phase=0.0))
        if step % snapshot_stride == 0 or step == n_steps:
            f = make_field(grid, psi)
            times.append(step * dt)
            snaps.append(f)
            _record_psi_observables(obs, f, V, target, cum_log)
    return Trajectory(
        times=np.asarray(times),
        snapshots=snaps,
        gauge_log=gauge,
        observables=_finalize_observables(obs),
    )
