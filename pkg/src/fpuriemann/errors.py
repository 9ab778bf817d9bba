"""Exception hierarchy shared by all modules.

The command line maps the three broad groups (configuration, numeric,
domain) to distinct exit codes, so every error raised by the library
derives from one of them.
"""


class RiemannLabError(Exception):
    """Base class of all library errors."""

    exit_code = 1


class ConfigError(RiemannLabError, ValueError):
    """Malformed configuration, unknown keys or bad command-line usage."""

    exit_code = 2


class UsageError(ConfigError):
    """Invalid argument, e.g. an unsupported derivative order."""


class NumericError(RiemannLabError, ArithmeticError):
    """A numerical procedure failed to deliver a trustworthy result."""

    exit_code = 3


class DomainError(RiemannLabError, ValueError):
    """An abscissa left the interval on which a potential is trusted."""

    exit_code = 4


class ConvexityError(DomainError):
    """Phi'' is not positive where strict hyperbolicity is required."""


class DegenerateJumpError(NumericError):
    """Shock speed requested for a jump of zero strength."""


class NoSolutionError(NumericError):
    """Scalar root solve could not bracket a solution inside the domain."""


class NoConjugateError(NumericError):
    """No off-diagonal zero of J inside the supplied bracket."""


class AmbiguousBracketError(NumericError):
    """Several off-diagonal zeros of J inside the supplied bracket."""


class NotConservativeError(NumericError):
    """A distance pair does not satisfy J = 0 to tolerance."""


class BifurcationAbsentError(NumericError):
    """No branch of D found near a turning point (or it is degenerate)."""


class AnchorUndefinedError(NumericError):
    """A nonclassical solver anchor has no root in its bracket."""


class UndefinedRescaleError(NumericError):
    """Self-similar rescaling requested at macroscopic time zero."""


class UnmatchedWaveError(NumericError):
    """A wave could not be identified consistently across snapshots."""


class NonclassicalRegimeError(DomainError):
    """Phi''' changes sign on the range spanned by a classical wave."""


class UnsupportedRegimeError(DomainError):
    """Data span more turning points than the nonclassical solvers handle."""
