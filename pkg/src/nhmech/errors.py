"""Exception hierarchy shared across the package."""


class NhmechError(Exception):
    """Base class for all package-specific errors."""


class EvaluationDomainError(NhmechError):
    """A map was evaluated outside its valid domain (non-finite result,
    negative discriminant, coordinate singularity, ...)."""


class DegenerateConstraintsError(NhmechError):
    """Constraint matrix A(q) is rank-deficient at the requested tolerance."""


class MetricDegeneracyError(NhmechError):
    """Metric g(q) is singular or too ill-conditioned to invert reliably."""


class RegularityError(NhmechError):
    """The multiplier matrix A g^{-1} A^T is singular; the multiplier solve
    has no unique solution."""


class ConstraintViolationError(NhmechError):
    """A momentum that was required to lie in the constrained momentum
    space does not, beyond the configured tolerance."""


class IntegrationError(NhmechError):
    """The integrator produced a non-finite state or was otherwise unable
    to continue."""
