"""Exception hierarchy shared by every module of the package."""


class DaorError(Exception):
    """Base class for all errors raised by :mod:`daor`."""


class LinAlgInputError(DaorError, ValueError):
    """Malformed input to one of the linear-algebra kernels."""


class NonSquare(LinAlgInputError):
    pass


class NotHermitian(LinAlgInputError):
    pass


class NonFinite(LinAlgInputError):
    pass


class DimensionMismatch(LinAlgInputError):
    pass


class NotPositiveDefinite(LinAlgInputError):
    pass


class InvalidGeometry(DaorError, ValueError):
    pass


class AngleOutOfRange(DaorError, ValueError):
    pass


class InvalidConfig(DaorError, ValueError):
    """A configuration value violates one of its documented invariants."""


class DegenerateAngles(DaorError, ValueError):
    """True and obfuscated angles are too close to be told apart."""


class InfeasiblePrivacy(DaorError):
    """The requested DAOR threshold exceeds the largest attainable value."""

    def __init__(self, gamma_th, lambda_max):
        super().__init__(
            f"gamma_th={gamma_th:.6g} exceeds the attainable maximum {lambda_max:.6g}")
        self.gamma_th = gamma_th
        self.lambda_max = lambda_max


class NoFeasibleSubset(DaorError):
    pass


class InfeasibleSubset(DaorError, ValueError):
    """Every privacy eigenvalue of the subset is negative."""
