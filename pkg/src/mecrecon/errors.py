"""Exception and warning types shared across the package."""


class MecReconError(Exception):
    """Base class for all package errors."""


class ConfigError(MecReconError, ValueError):
    """Invalid experiment configuration."""


class NumericalError(MecReconError, ArithmeticError):
    """A numerical stage could not produce a usable result."""


class SolverFailure(NumericalError):
    pass


class DegenerateCovariance(NumericalError):
    pass


class NonPositiveLineVariance(NumericalError):
    pass


class NonPositiveValue(NumericalError):
    pass


class NonConcaveFit(NumericalError):
    pass


class InsufficientPoints(NumericalError):
    pass


class VanishingComponent(NumericalError):
    pass


class InconsistentComponents(NumericalError):
    pass


class BothDenominatorsVanish(NumericalError):
    pass


class NoBandwidth(NumericalError):
    pass


class EmptySpectrum(NumericalError):
    pass


class GridTooCoarse(NumericalError):
    pass


class PilotTooSparse(NumericalError):
    pass


class UnknownCharacteristicFunction(MecReconError, ValueError):
    pass


class UncertaintyViolation(UserWarning):
    """Second cumulants breach the Schrodinger-Robertson bound.

    Emitted as a warning: on reconstructed data it usually flags statistical
    noise, on simulated data an unphysical set of coefficients.
    """


class StageError(MecReconError):
    """Wraps a failure inside the pipeline and names the stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
