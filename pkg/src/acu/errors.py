"""Exception hierarchy.

Every failure raised by the package derives from :class:`AcuError`.  The
subset that signals a violated mathematical precondition (as opposed to bad
input or a numerical breakdown) also derives from :class:`PreconditionError`;
the command line maps those to exit status 2.
"""

from __future__ import annotations


class AcuError(Exception):
    """Base class for all package errors."""


class PreconditionError(AcuError):
    """A measured quantity violates the hypothesis of a construction."""

    def __init__(self, message: str, measured: float | None = None):
        super().__init__(message)
        self.measured = measured


class InvalidInput(AcuError, ValueError):
    """Malformed matrix data: wrong shape, non-finite entries, size mismatch."""


class NumericalFailure(AcuError):
    """A decomposition did not reproduce its input to the required accuracy."""


class DimensionCap(AcuError):
    """A construction would exceed the configured maximal matrix side."""

    def __init__(self, requested: int, cap: int):
        super().__init__(f"dimension {requested} exceeds cap {cap} (set ACU_MAX_DIM to raise it)")
        self.requested = requested
        self.cap = cap


class SingularInput(PreconditionError):
    """Matrix too close to singular for a polar decomposition."""


class NotAlmostUnitary(PreconditionError):
    """``||w*w - 1||`` is too large for the unitary correction."""


class BoundaryEigenvalue(PreconditionError):
    """An eigenvalue sits on (or too close to) an arc endpoint."""

    def __init__(self, message: str, measured: float | None = None, angle: float | None = None):
        super().__init__(message, measured)
        self.angle = angle


class NotAlmostProjection(PreconditionError):
    """``||t0^2 - t0||`` is too large for sharpening."""


class ProjectionsTooFar(PreconditionError):
    """``||p - q|| >= 1``: no Kato intertwiner exists."""


class NotAlmostOrthogonal(PreconditionError):
    """``||pq||`` is too large for the disjoining correction."""


class StageFailure(PreconditionError):
    """A stage of the family refinement violated its own hypothesis."""

    def __init__(self, stage: str, measured: float, bound: float | None = None):
        msg = f"stage {stage!r} failed: measured {measured:.3e}"
        if bound is not None:
            msg += f" (allowed {bound:.3e})"
        super().__init__(msg, measured)
        self.stage = stage
        self.bound = bound


class CommutatorTooLarge(PreconditionError):
    """The commutator norm is outside the regime where an invariant is defined."""


class CurveNearZero(NumericalFailure):
    """The determinant curve came too close to the origin to track its phase."""


class PreconditionUnsatisfiable(PreconditionError):
    """No admissible pair of arcs exists under the requested mode."""


class Undefined(PreconditionError):
    """An invariant needed for a comparison is not defined."""


class ObstructionNonzero(PreconditionError):
    """The isospectral invariant is nonzero, so no homotopy to 1 exists."""

    def __init__(self, value: int):
        super().__init__(f"isospectral invariant is {value}, expected 0", float(value))
        self.value = value


class RankMismatch(PreconditionError):
    """Two subspaces that must be unitarily matched have different dimensions."""


class OracleDidNotConverge(NumericalFailure):
    """Joint diagonalisation stopped at the sweep limit."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class OutOfAnnulus(PreconditionError):
    """Singular values fall outside the annulus allowed for the radial clamp."""


class NoSpectralGap(PreconditionError):
    """The claimed spectral gap is not present."""


class InvalidEpsilon(PreconditionError):
    """The rotation parameter is outside (0, 1/10)."""


class PathNotAdmissible(PreconditionError):
    """A sampled path violates the commutator or step-size requirement."""


class StagePreconditionFailed(PreconditionError):
    """A reduction stage's measured hypothesis failed in certified mode."""

    def __init__(self, stage: str, measured: float, bound: float):
        super().__init__(f"stage {stage!r}: measured {measured:.3e} >= {bound:.3e}", measured)
        self.stage = stage
        self.bound = bound


class ArcsTooClose(PreconditionError):
    """Plateau arcs are closer than the requested transition width."""
