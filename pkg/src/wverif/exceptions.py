"""Exception types shared across the package."""


class VerifError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(VerifError, ValueError):
    """An argument violates a documented precondition."""


class DimensionMismatch(ContractViolation):
    """Vector or ensemble dimensions do not line up."""


class WeightedMassZero(VerifError):
    """The forecast puts (numerically) no mass on the weighted region."""


class DegenerateConditional(VerifError):
    """A conditional distribution cannot be formed because the
    conditioning event has (numerically) zero forecast probability."""


class InsufficientData(VerifError):
    """Too few cases to fit or summarise anything meaningful."""


class UnsupportedInput(VerifError):
    """The operation is not defined for this input representation.

    The message always names a supported remedy.
    """


class NumericalError(VerifError):
    """Quadrature or optimisation failed beyond recovery."""


class DataError(VerifError):
    """An archive or configuration file is malformed."""
