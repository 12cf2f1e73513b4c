"""Exception hierarchy shared by all cqhjlab modules."""


class CqhjError(Exception):
    """Base class for all errors raised by this package."""


class GridMismatch(CqhjError):
    """Two fields (or a field and an operator) live on different grids."""


class SchemeMismatch(CqhjError):
    """Derivative scheme incompatible with the grid boundary (spectral needs periodic)."""


class NonFiniteField(CqhjError):
    """A field contains NaN or Inf entries."""


class PeriodicityViolation(CqhjError):
    """Cumulative integral on a periodic grid would be multi-valued (nonzero mean)."""


class UnresolvedState(CqhjError):
    """Requested state is not resolved by the grid (too narrow, too oscillatory)."""


class DomainOverflow(CqhjError):
    """Requested state does not decay inside the grid domain."""


class ConvergenceFailure(CqhjError):
    """An iterative or direct solver failed to produce a valid result."""


class ZeroState(CqhjError):
    """A wave function with (numerically) zero norm where a state is required."""


class NodePresent(CqhjError):
    """Momentum-field operation requested on a field with masked node points."""


class AllMasked(NodePresent):
    """The source wave function vanishes everywhere at the node threshold."""


class StabilityViolation(CqhjError):
    """Time step violates the documented stability/accuracy bound of the integrator."""


class FixedPointDivergence(CqhjError):
    """The implicit midpoint iteration of the nonlinear step did not converge."""


class NodeBlowup(CqhjError):
    """Force evaluation needed the momentum field where the state has collapsed to nodes."""


class NodeApproach(CqhjError):
    """Momentum-space evolution drove the reconstructed magnitude below the node
    threshold; carries the partial trajectory computed so far."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ZeroSpread(CqhjError):
    """Energy spread of the state is zero (eigenstate input where spread is needed)."""


class ConfigError(CqhjError):
    """Scenario configuration failed to parse or validate."""
