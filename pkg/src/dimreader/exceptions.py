"""Exception and warning types raised across the package."""


class DimReaderError(Exception):
    """Base class for all package errors."""


class DomainError(DimReaderError, ValueError):
    """An elementary function was evaluated outside its real domain."""


class NoConvergence(DimReaderError, RuntimeError):
    """An iterative solver hit its iteration limit before meeting tolerance."""

    def __init__(self, message, max_iter=None, residual=None):
        super().__init__(message)
        self.max_iter = max_iter
        self.residual = residual


class SingularSystem(DimReaderError, RuntimeError):
    """Conjugate gradients broke down on a (numerically) singular system."""


class DisconnectedGraph(DimReaderError, ValueError):
    """The nearest-neighbour graph has more than one connected component."""

    def __init__(self, component_sizes):
        self.component_sizes = sorted(component_sizes, reverse=True)
        super().__init__(
            "neighbourhood graph is disconnected; component sizes "
            f"{self.component_sizes}. Increase k_neighbors or subset the data."
        )


class DegenerateCovariance(DimReaderError, ValueError):
    """The leading principal directions are not uniquely defined."""


class FixedPointMismatch(DimReaderError, RuntimeError):
    """A t-SNE replay moved too far from the captured fixed point."""


class RoundLimitExceeded(DimReaderError, RuntimeError):
    """Randomized-halves extraction needed more rounds than allowed."""


class EmptyDataset(DimReaderError, ValueError):
    pass


class ParseError(DimReaderError, ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class NonNumericCell(ParseError):
    pass


class ConfigError(DimReaderError, ValueError):
    pass


class NegativeSpectrum(UserWarning):
    """Classical MDS clamped a negative eigenvalue to zero."""


class NegativeObjective(UserWarning):
    """Smoothing dominates the per-point discovery objective."""


class EmptyConstraints(UserWarning):
    """All perturbation vectors are zero; a flat field was returned."""
