"""Exception hierarchy.

Every error carries a stable machine-readable ``code`` so the CLI can emit
structured JSON on stderr.
"""


class OrbispecError(Exception):
    code = "Error"

    def __init__(self, message=""):
        super().__init__(message)
        self.message = message


class NotHyperbolic(OrbispecError):
    """Object has no hyperbolic structure (or element is not hyperbolic)."""

    code = "NotHyperbolic"


class NotHyperbolicTriangle(OrbispecError):
    """Angle sum of the requested triangle is >= pi."""

    code = "NotHyperbolicTriangle"


class NonConvergence(OrbispecError):
    """Adaptive quadrature exceeded its refinement depth."""

    code = "NonConvergence"


class ParabolicClassError(OrbispecError):
    """A parabolic conjugacy class turned up in a cocompact enumeration."""

    code = "ParabolicClass"


class NonIntegerMultiplicity(OrbispecError):
    code = "NonIntegerMultiplicity"


class BisectionFailure(OrbispecError):
    code = "BisectionFailure"


class AreaNotPositive(OrbispecError):
    code = "AreaNotPositive"


class GridTooShort(OrbispecError):
    code = "GridTooShort"


class NoHyperbolicGenerator(OrbispecError):
    code = "NoHyperbolicGenerator"


class OffDiagonalVanishes(OrbispecError):
    code = "OffDiagonalVanishes"


class InconsistentRatios(OrbispecError):
    code = "InconsistentRatios"


class NotCertified(OrbispecError):
    code = "NotCertified"


class Unbounded(OrbispecError):
    code = "Unbounded"


class GenerationUnverified(OrbispecError):
    code = "GenerationUnverified"


class BoundViolated(OrbispecError):
    """A cosh trace bound failed; carries the offending report rows."""

    code = "BoundViolated"

    def __init__(self, message="", report=None):
        super().__init__(message)
        self.report = report
