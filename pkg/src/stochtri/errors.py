"""Exception taxonomy.

Numerical failures (degenerate geometry, ambiguous decompositions, ...)
derive from NumericalError; misuse of an API contract derives from
ContractError. The CLI maps these onto process exit codes.
"""


class StochtriError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(StochtriError):
    """A computation failed for numerical/geometric reasons (CLI exit 4)."""


class PointBehindCamera(NumericalError):
    """Projection requested for a point at or behind the principal plane."""


class InsufficientViews(NumericalError):
    """Fewer observations than the solver's minimum."""


class DegenerateGeometry(NumericalError):
    """Triangulation system is rank deficient (e.g. coincident centres)."""


class DegenerateConfiguration(NumericalError):
    """Correspondence set does not determine a fundamental matrix."""


class CheiralityAmbiguous(NumericalError):
    """No decomposition candidate puts a strict majority of probes in front."""


class ZeroNorm(NumericalError):
    """A vector that must be normalized has (near-)zero norm."""


class NoValidPair(NumericalError):
    """A joint is observed by fewer than two valid views."""


class TooManyDegenerate(NumericalError):
    """Resampling budget exhausted while building a hypothesis pool."""


class DegenerateTorso(NumericalError):
    """Shoulders and pelvis are collinear; torso plane undefined."""


class ZeroLimb(NumericalError):
    """A symmetry ratio's denominator bone has (near-)zero length."""


class UnrenderableFrame(NumericalError):
    """A joint is in front of fewer than two cameras; rig cannot cover it."""


class ContractError(StochtriError):
    """An API precondition was violated by the caller."""


class WidthMismatch(ContractError):
    """Feature width does not match the network's input layer."""


class NoCachedForward(ContractError):
    """backward() called without a cached forward pass."""


class ShapeMismatch(ContractError):
    """Array arguments have inconsistent shapes."""


class MissingErrors(ContractError):
    """An oracle selection strategy needs per-hypothesis errors."""


class LengthMismatch(ContractError):
    """Paired sequences differ in length."""


class TaskMismatch(ContractError):
    """Loaded weights belong to the other task (pose vs camera)."""


class ConfigError(StochtriError):
    """Bad or unknown configuration (CLI exit 2)."""


class DatasetError(StochtriError):
    """Dataset file missing, malformed, or inconsistent (CLI exit 3)."""
