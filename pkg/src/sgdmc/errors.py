"""Exception types shared across the package."""


class SgdmcError(Exception):
    """Base class for all package-specific errors."""


class DegenerateDerivative(SgdmcError):
    """A nonzero component has an identically zero derivative."""


class NonCoercive(SgdmcError):
    """A component polynomial does not grow to +inf in both directions."""


class EmptyCriticalSet(SgdmcError):
    """A dimension has no critical points (no nonzero component)."""


class AssumptionA5Violated(SgdmcError):
    """Distinct components share a critical point (within tolerance)."""


class NoAbsorbingSet(SgdmcError):
    """No absorbing interval was found; the theory guarantees at least one."""


class InvarianceCheckFailed(SgdmcError):
    """A rectangle failed the positive-invariance corner check."""

    def __init__(self, map_index, rect_index, corner):
        self.map_index = map_index
        self.rect_index = rect_index
        self.corner = corner
        super().__init__(
            f"map {map_index} moves corner {corner} out of rectangle {rect_index}"
        )


class OutOfStateSpace(SgdmcError):
    """A point lies outside the state space beyond tolerance."""


class NotFound(SgdmcError):
    """No splitting certificate within the path-length budget."""

    def __init__(self, ell_max, gaps=None):
        self.ell_max = ell_max
        self.gaps = gaps if gaps is not None else {}
        super().__init__(f"no certificate with path length <= {ell_max}; gaps: {self.gaps}")


class NonTermination(SgdmcError):
    """A greedy escape walk exceeded the hard step cap."""


class DimensionMismatch(SgdmcError):
    """Operator and measure shapes do not match."""


class GridMismatch(SgdmcError):
    """Two measures live on different grids."""


class NoConvergence(SgdmcError):
    """An iteration hit max_iter before meeting its tolerance."""

    def __init__(self, max_iter, residual):
        self.max_iter = max_iter
        self.residual = residual
        super().__init__(f"no convergence after {max_iter} iterations (residual {residual:.3e})")


class SingularDiffusion(SgdmcError):
    """The diffusion coefficient vanishes somewhere on the state space."""

    def __init__(self, points):
        self.points = list(points)
        super().__init__(f"diffusion coefficient vanishes at {len(self.points)} grid point(s)")


class ConfigError(SgdmcError):
    """A run configuration failed to parse or validate."""
