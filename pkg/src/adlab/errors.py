"""Exception types shared across the package."""


class AdlabError(Exception):
    """Base class for all package-specific failures."""


class NearSingular(AdlabError):
    """Resolvent requested too close to the spectrum."""


class ContourTooClose(AdlabError):
    """An eigenvalue lies inside the exclusion band of a quadrature circle."""


class NoConvergence(AdlabError):
    """Node doubling exceeded the cap without meeting the Cauchy tolerance."""


class GapViolation(AdlabError):
    """Two eigenvalue clusters are closer than the declared gap floor."""


class GapClosed(AdlabError):
    """The perturbed generator H^q lost its spectral gap at some grid time."""

    def __init__(self, q, t, message=None):
        self.q = q
        self.t = t
        super().__init__(message or f"spectral gap closed at level q={q}, t={t:.6g}")


class GridTooCoarse(AdlabError):
    """A grid-sampled quantity is not resolved by the collocation grid."""


class DimensionMismatch(AdlabError):
    """Matrix operands have incompatible shapes."""


class StepUnderflow(AdlabError):
    """Adaptive integrator needs a step below the hard floor."""


class NonFinite(AdlabError):
    """State blew up to inf/nan during integration."""


class OrderTooHigh(AdlabError):
    """Requested expansion order above the supported cap."""


class InsufficientData(AdlabError):
    """Too few data points for the requested fit."""


class DegenerateData(AdlabError):
    """All data points coincide; the fit is meaningless."""


class DegenerateParams(AdlabError):
    """Closed-form denominators vanish for these parameters."""


class WrongSignParams(AdlabError):
    """Closed-form transition formula requires ak < 0."""


class NotNilpotent(AdlabError):
    """Matrix is not nilpotent to working precision."""


class VerdictConflict(AdlabError):
    """Numerical boundedness scan disagrees with the N≡0 test."""


class PhaseOverflow(AdlabError):
    """A raw exponential magnitude cannot be materialized in double precision."""


class TrackingAmbiguity(AdlabError):
    """Two eigenvalue branches are indistinguishable between adjacent nodes."""


class ConfigError(AdlabError):
    """Invalid experiment configuration."""
