"""Exception hierarchy shared across the package."""


class TransportFilterError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(TransportFilterError):
    """Structural mismatch between an input and the expected shape."""


class NonMonotoneMapError(TransportFilterError):
    """A triangular map component has a non-positive diagonal weight."""


class EstimationError(TransportFilterError):
    """Map estimation failed (singular covariance or non-convergence)."""


class UndefinedAngleError(TransportFilterError):
    """Angle observation evaluated with both selected components at zero."""


class ScenarioError(TransportFilterError):
    """Scenario file failed to parse or validate."""


class SimulationError(TransportFilterError):
    """Runtime failure while integrating dynamics or running the filter."""
