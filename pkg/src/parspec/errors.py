"""Exception types shared across the package."""


class ParspecError(Exception):
    """Base class for all contract violations raised by this package."""


class DegenerateFrequency(ParspecError):
    """Frequency too close to 0 or to the eigenvalue-crossing magnitude."""


class OnSpectrum(ParspecError):
    """Resolvent parameter coincides with an eigenvalue of the symbol."""


class RegimeViolation(ParspecError):
    """Coefficients violate the strong-viscosity / strong-damping regime."""


class NyquistViolation(ParspecError):
    """Grid Nyquist frequency does not cover the requested cutoff."""


class ZeroModeSingularity(ParspecError):
    """Negative-order multiplier applied to a field with nonzero mean."""


class NoContraction(ParspecError):
    """Neumann series terms stopped contracting."""


class MaxTermsExceeded(ParspecError):
    """Neumann series did not converge within the term budget."""


class TruncationTooSmall(ParspecError):
    """Contour branch truncated before the integrand is damped out."""


class QuadratureNotConverged(ParspecError):
    """Doubling the contour nodes still changes the result too much."""


class CFLViolation(ParspecError):
    """Time step too large for the stiffest retained mode."""


class BlowupDetected(ParspecError):
    """Evolved norms grew beyond the blowup guard."""


class WindowTooNarrow(ParspecError):
    """Decay-fit window contains too few samples."""


class BoxTooSmall(ParspecError):
    """Grid box cannot accommodate the requested bump arrangement."""


class ConfigError(ParspecError):
    """Run configuration is missing, malformed, or has unknown keys."""


class MuConditionWarning(UserWarning):
    """Damping coefficient below the measured absorption threshold."""
