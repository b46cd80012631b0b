"""Exception hierarchy.

Every numerical failure mode has its own class so that callers (and the CLI
exit-code mapping) can tell misuse apart from honest numerical failure.
"""


class MaxsurfError(Exception):
    """Base class for all library errors."""


class InputError(MaxsurfError, ValueError):
    """Malformed input: wrong shapes, dimension mismatch, bad parameters."""


class DimensionError(InputError):
    pass


class NotTangentError(InputError):
    pass


class DegeneracyError(MaxsurfError, ArithmeticError):
    """A span, plane or triangle is degenerate at the working tolerance."""


class SignatureError(MaxsurfError, ValueError):
    pass


class NoLogarithmError(MaxsurfError, ArithmeticError):
    """Lightlike or antipodal chord: no geodesic joins the points."""


class BranchError(NoLogarithmError):
    """Spacelike chord reaching the opposite sheet of the quadric."""


class CausalityError(MaxsurfError, ArithmeticError):
    pass


class InjectivityError(MaxsurfError, ArithmeticError):
    """Matrix logarithm outside the principal branch."""


class RelatorError(MaxsurfError, ValueError):
    pass


class NumericalLiftError(MaxsurfError, ArithmeticError):
    pass


class AccuracyError(MaxsurfError, ArithmeticError):
    """Quadrature or fit did not reach the requested accuracy."""


class CalibrationError(MaxsurfError, ArithmeticError):
    pass


class ChordError(MaxsurfError, ArithmeticError):
    """Non-space-like chord inside a mesh triangle or star."""


class FitError(MaxsurfError, ArithmeticError):
    pass


class RefinementNeededError(MaxsurfError, ArithmeticError):
    pass


class SolverStallError(MaxsurfError, ArithmeticError):
    pass


class WindowError(MaxsurfError, ArithmeticError):
    """Maximizer found on the boundary of the deck-translate window."""


class StencilError(MaxsurfError, ArithmeticError):
    pass


class ConfigError(InputError):
    """Schema or bounds violation in a run configuration."""
