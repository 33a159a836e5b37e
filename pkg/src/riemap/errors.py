"""Exception types shared across the package."""


class RiemapError(Exception):
    """Base class for all package errors."""


class TruncationOverflowError(RiemapError):
    """A bidegree/mode operation would exceed the configured caps."""


class NearVanishingLoopError(RiemapError):
    """A loop passed below the nonvanishing threshold (winding undefined)."""


class SingularLoopMatrixError(RiemapError):
    """A matrix loop is (near-)singular on the circle grid."""


class DegenerateFibrationError(RiemapError):
    """Fibration gradients are rank-deficient / fiber carries a complex tangent."""


class RankGapError(RiemapError):
    """Singular-value gap too small to certify a numerical rank decision."""


class IndexWindowError(RiemapError):
    """Toeplitz index probe window too small or inconsistent phi profile."""


class IndexChangeError(RiemapError):
    """Partial indices degenerated (below -1) along a continuation path."""


class NonContractionError(RiemapError):
    """Fixed-point extension failed to contract (deformation too large)."""


class NewtonFailureError(RiemapError):
    """Newton iteration for the boundary problem did not converge."""


class ContinuationStallError(RiemapError):
    """Continuation in lambda reached the minimum step without converging."""


class NormalizationError(RiemapError):
    """Normalization constraints fail to cut the solution kernel transversally."""


class StructureDomainError(RiemapError):
    """Structure field outside the perturbative regime / invalid input."""


class SchemaError(RiemapError):
    """Malformed input file (reported with path and field)."""
