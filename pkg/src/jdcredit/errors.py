"""Exception hierarchy for the jdcredit package."""


class JdCreditError(Exception):
    """Base class for all package-specific errors."""


class PoleAtEta(JdCreditError):
    """q is within the pole guard of the jump parameter eta; caller must bracket away."""


class DegenerateJumpless(JdCreditError):
    """lambda is at or below the jumpless floor; price through the diffusion formulas."""


class NoConvergence(JdCreditError):
    """Iterative solver exhausted its budget without meeting tolerance."""


class ZeroRateUnsupported(JdCreditError):
    """|r| is below the zero-rate guard and the analytic r->0 branch is disabled."""


class OrderTooLarge(JdCreditError):
    """Requested inversion half-order exceeds the stable maximum."""


class TransformEvaluationFailed(JdCreditError):
    """A transform raised while being evaluated at an inversion node."""


class ContourFailure(JdCreditError):
    """Contour inversion diverged (oscillation-dominated or non-finite terms)."""


class NearDefaultIllConditioned(JdCreditError):
    """Premium-leg inverse is vanishing; the CDS spread ratio is ill-conditioned."""


class QuadratureFailure(JdCreditError):
    """Adaptive quadrature exceeded its refinement budget."""


class GridTooCoarse(JdCreditError):
    """FDM error estimate exceeds the requested tolerance on the given grid."""


class GridMismatch(JdCreditError):
    """Market and model term structures are not on the same maturity grid."""


class AllStartsFailed(JdCreditError):
    """Every calibration start failed to produce a finite objective."""


class NonPositivePrice(JdCreditError):
    """Stock price series contains a non-positive value."""


class WindowTooLong(JdCreditError):
    """Rolling window exceeds the series length."""


class TooFewFirms(JdCreditError):
    """Not enough firms for a meaningful tercile classification."""


class EmptyGroup(JdCreditError):
    """A spread group needed for a distance factor is empty."""


class EmptyBucket(JdCreditError):
    """A rating bucket contains no firms on the requested date."""


class RankDeficient(JdCreditError):
    """Design matrix is rank deficient."""


class Unbounded(JdCreditError):
    """Quantile-regression LP is unbounded (malformed input)."""


class FirmTooShort(JdCreditError):
    """A firm has too few observations for a per-firm fit."""


class PerfectCollinearity(JdCreditError):
    """A regressor is an exact linear combination of the others."""


class ZeroVariance(JdCreditError):
    """Paired differences have zero sample variance."""


class SchemaMismatch(JdCreditError):
    """An input file or spec does not match the expected schema."""


class IntegrityViolation(JdCreditError):
    """Referential-integrity or duplicate-key violation in a dataset."""


class PricingError(JdCreditError):
    """A term-structure point failed to price; carries the failing maturity."""

    def __init__(self, message, maturity=None):
        super().__init__(message)
        self.maturity = maturity
