"""Exception hierarchy shared by the anisoswarm modules.

Solver failures (missing roots, brackets, quadrature trouble) derive from
:class:`SolverError` so front ends can map them to a dedicated exit code.
"""


class AnisoswarmError(Exception):
    """Base class for all package-specific errors."""


class InvalidConfig(AnisoswarmError):
    """A configuration value violates its documented constraints."""


class FileError(AnisoswarmError):
    """An input file is missing, unreadable, or malformed."""


class SolverError(AnisoswarmError):
    """Base class for numerical-solver failures."""


class NoSignChange(SolverError):
    """The total force coefficient does not cross zero on (0, cutoff)."""


class NoRoot(SolverError):
    """A bracketing search found no sign change for the requested root."""


class NoBracket(SolverError):
    """The endpoints of a bisection do not straddle the target."""


class QuadratureNotConverged(SolverError):
    """Panel doubling changed an integral by more than the tolerance."""


class DegenerateDenominator(SolverError):
    """The attraction-weighted integral is too small to divide by."""


class NotUnit(AnisoswarmError):
    """A direction vector failed its unit-norm check."""


class StepSizeUnderflow(SolverError):
    """The adaptive step controller drove the substep below 1e-14."""


class PairAtCutoff(SolverError):
    """Some particle pair sits at the cutoff where the force is not C1."""


class ResidualTooLarge(SolverError):
    """An ansatz is not close enough to an equilibrium to linearize at."""


class NotDivisibleBy4(AnisoswarmError):
    """The discrete ellipse solve needs a particle count divisible by 4."""


class Degenerate(AnisoswarmError):
    """The point set has no spatial extent to fit an ellipse to."""
