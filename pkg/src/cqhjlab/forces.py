"""Pluggable non-potential collapse forces and their gauge-potential lift.

Every non-null force depends on the state only through the momentum field,
which makes it degree zero in the wave function (homogeneity is preserved)
and guarantees it is not the gradient of any function of position alone.
A position-only force would merely shift the potential and keep the
dynamics linear, so no such constructor exists here.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .cqhj import MomentumField, psi_to_p
from .errors import GridMismatch
from .grid import DerivativeScheme, Field, cumulative_integral
from .states import EigenPair


class ForceKind(Enum):
    NULL = "null"
    PINNING = "pinning"
    KOSTIN_FRICTION = "kostin_friction"


@dataclass(frozen=True)
class CollapseForce:
    """Descriptor of a collapse force F(x, p, t).

    kind          which member of the family
    kappa         pinning rate (PINNING only)
    gamma         friction rate (KOSTIN_FRICTION only)
    target        momentum field of the pointer state (PINNING only)
    depends_on_p  True for every non-null force (structural non-potentiality)
    """

    kind: ForceKind
    kappa: float = 0.0
    gamma: float = 0.0
    target: MomentumField | None = None

    @property
    def depends_on_p(self) -> bool:
        return self.kind is not ForceKind.NULL


def null_force() -> CollapseForce:
    return CollapseForce(kind=ForceKind.NULL)


def pinning_force(
    target: MomentumField | EigenPair | Field,
    kappa: float,
    scheme: DerivativeScheme | None = None,
    node_threshold: float = 1e-6,
) -> CollapseForce:
    """Force -kappa (p - p_target) pulling the momentum field onto that of
    the chosen pointer state. EigenPair / wave-function targets are
    converted with the grid's best derivative scheme unless one is given."""
    if kappa <= 0:
        raise ValueError("pinning rate kappa must be positive")
    if isinstance(target, EigenPair):
        target = target.state
    if isinstance(target, Field):
        target = psi_to_p(
            target, scheme or target.grid.best_scheme(), node_threshold
        )
    return CollapseForce(kind=ForceKind.PINNING, kappa=kappa, target=target)


def kostin_friction(gamma: float) -> CollapseForce:
    """Force -gamma Re(p): damps the classical momentum (phase gradient),
    relaxing the state toward the potential's ground state."""
    if gamma <= 0:
        raise ValueError("friction rate gamma must be positive")
    return CollapseForce(kind=ForceKind.KOSTIN_FRICTION, gamma=gamma)


def evaluate(force: CollapseForce, p: MomentumField, t: float) -> Field:
    """Force field at time t for the given momentum field.

    Masked points contribute zero force (documented regularization near
    nodes, where p itself is undefined).
    """
    if force.kind is ForceKind.NULL:
        return Field(p.grid, np.zeros(p.grid.n_points, dtype=np.complex128))
    if force.kind is ForceKind.PINNING:
        tgt = force.target
        if tgt.grid != p.grid:
            raise GridMismatch("pinning target lives on a different grid")
        vals = -force.kappa * (p.values - tgt.values)
        vals[p.node_mask | tgt.node_mask] = 0.0
        return Field(p.grid, vals)
    vals = -force.gamma * p.classical.astype(np.complex128)
    vals[p.node_mask] = 0.0
    return Field(p.grid, vals)


def gauge_potential(force_field: Field, periodic_tolerance: float = 1e-6) -> Field:
    """Line-integral lift Phi with dPhi/dx = F, anchored at the left edge.

    The free additive constant is physically irrelevant: it is absorbed by
    the time-dependent scale factor of the homogeneous dynamics. On
    periodic grids a genuinely winding force (integral O(1)) is rejected;
    the tolerance is loose enough that near-node regularization residues,
    whose per-step phase jump is dt * integral, pass through.
    """
    return cumulative_integral(force_field, periodic_tolerance=periodic_tolerance)
