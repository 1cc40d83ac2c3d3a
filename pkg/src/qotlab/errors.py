"""Exception and warning types raised across the package."""


class QotlabError(Exception):
    """Base class for all package errors."""


class TailTruncation(QotlabError):
    """Mass outside the computational box exceeds the allowed tolerance."""


class GridMismatch(QotlabError):
    """Two objects live on incompatible grids."""


class NotPSD(QotlabError):
    """A matrix expected to be positive semidefinite has a large negative eigenvalue."""


class NegativeSymbol(QotlabError):
    """A symbol expected to be a probability density takes negative values."""


class ZeroSymbol(QotlabError):
    """A symbol vanishes identically."""


class NoBoundStates(QotlabError):
    """A spectral projection onto the nonpositive spectrum would be empty."""


class ResolutionError(QotlabError):
    """The grid does not resolve the relevant energy or length scale."""


class DimensionTooLarge(QotlabError):
    """A materialized object would be too large for dense storage."""


class NonzeroMeanForNegativeOrder(QotlabError):
    """Negative-order Sobolev norms need zero-mean input."""


class NonConvergence(QotlabError):
    """An iterative solver did not reach its tolerance."""


class Infeasible(QotlabError):
    """A transport problem has no feasible plan."""


class ConfigParse(QotlabError):
    """A configuration or state-spec file is malformed."""


class OffGridWarning(UserWarning):
    """A phase-space shift is not a lattice vector, so results are interpolated."""
