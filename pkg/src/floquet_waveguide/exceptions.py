"""Exception hierarchy for floquet_waveguide."""


class FloquetError(Exception):
    """Base class for all errors raised by this package."""


class SymmetryError(FloquetError):
    """Permittivity lacks the x2-mirror symmetry required for beta in {0, pi}."""


class ResolutionError(FloquetError):
    """Quadrature did not resolve the permittivity."""


class ContourError(FloquetError):
    """A contour passes too close to a characteristic value or is under-resolved."""


class MultiplicityError(FloquetError):
    """Jordan chain construction disagrees with the eigenvalue cluster size."""


class NotApplicableError(FloquetError):
    """An operation was called on a mode it is not defined for."""


class NearSingularError(FloquetError):
    """The truncated trace operator is numerically singular."""


class ConsistencyError(FloquetError):
    """Cross-checks between independently computed quantities failed."""


class ConfigError(FloquetError):
    """Invalid run configuration."""
