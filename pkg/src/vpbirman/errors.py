"""Exception and warning types raised across the toolkit."""


class VPBirmanError(Exception):
    """Base class for all toolkit errors."""


class NoCutoffFound(VPBirmanError, ValueError):
    """The Lane-Emden type integration never reached z = 0 before r_max."""


class IntegratorFailure(VPBirmanError):
    """The ODE integrator stopped without reaching the cutoff event."""


class BracketFailure(VPBirmanError):
    """A root could not be bracketed on the requested interval."""


class RootNotBracketed(BracketFailure):
    """Raised by beta_star when e_min(beta) - e0 does not change sign."""


class QuadratureNotConverged(VPBirmanError):
    """Doubling the number of quadrature nodes kept changing the result."""


class OutOfRange(VPBirmanError):
    """A radius outside [r_minus, r_plus] was passed to an orbit map."""


class SpectrumHit(VPBirmanError):
    """A resolvent denominator k^2 omega_1^2 - lambda was not positive."""


class EigenFailure(VPBirmanError):
    """The symmetric eigensolver or its power-method check failed."""


class StepRejected(VPBirmanError):
    """The gradient flow could not find an acceptable step size."""


class SingularWeight(UserWarning):
    """|Q'(e)| is singular near e0 (k < 1); use a weighted quadrature."""


class DegenerateOrbit(UserWarning):
    """Turning points have (numerically) merged into a circular orbit."""


class MonotonicityViolation(UserWarning):
    """A computed mu-curve broke monotonicity or convexity beyond tolerance."""
