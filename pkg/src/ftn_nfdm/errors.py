"""Exception types shared across the simulator."""


class FtnNfdmError(Exception):
    """Base class for all simulator errors."""


class ConfigError(FtnNfdmError, ValueError):
    """Invalid or inconsistent configuration.

    ``field`` and ``line`` locate the offending entry when known.
    """

    def __init__(self, message, field=None, line=None):
        self.message = message
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class BModAmplitudeError(FtnNfdmError, ValueError):
    """The b-coefficient reached or exceeded the unit-magnitude limit."""

    def __init__(self, message, max_abs_b=None):
        self.max_abs_b = max_abs_b
        super().__init__(message)


class EdgeEnergyError(FtnNfdmError):
    """Burst energy leaks into the boundary of the processing window."""

    def __init__(self, message, edge_fraction=None):
        self.edge_fraction = edge_fraction
        super().__init__(message)


class ConvergenceError(FtnNfdmError):
    """An iterative inverse-scattering solve missed its tolerance."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class StepSizeError(FtnNfdmError):
    """Split-step nonlinear phase per step exceeds the configured cap."""


class GridMismatchError(FtnNfdmError):
    """A required spectral point cannot be represented on the given grid."""


class IllConditionedError(FtnNfdmError):
    """ICI matrix condition number is above the detector's cap."""


class SphereTimeoutError(FtnNfdmError):
    """Sphere-decoder node budget exhausted; ``best`` holds the best leaf found."""

    def __init__(self, message, best=None):
        self.best = best
        super().__init__(message)
