"""Exception hierarchy shared across the package."""

import numpy as np


class CapaError(Exception):
    """Base class for all errors raised by capabf."""


class InvalidParameterError(CapaError, ValueError):
    pass


class DimensionError(CapaError, ValueError):
    pass


class SingularityError(CapaError, ValueError):
    """A Green's function was evaluated at coincident points."""


class BranchSingularityError(SingularityError):
    """A wavenumber landed on the |kappa| = kappa0 circle."""


class DegenerateError(CapaError, ValueError):
    """All-zero beamformer or receiver where a nonzero one is required."""


class IllConditionedError(CapaError, np.linalg.LinAlgError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConfigError(CapaError, ValueError):
    def __init__(self, message, section=None, field=None):
        super().__init__(message)
        self.section = section
        self.field = field
