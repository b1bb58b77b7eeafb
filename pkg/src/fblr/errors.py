"""Exception types shared across the package."""


class FblrError(Exception):
    """Base class for all model/library failures."""


class DimensionError(FblrError, ValueError):
    """Operands live on incompatible grids or have mismatched shapes."""


class PreconditionError(FblrError, ValueError):
    """An operation was called on data violating its stated precondition."""


class UnsupportedSpecError(FblrError, ValueError):
    """The requested kernel / setting / mode is not supported."""


class NumericError(FblrError, ArithmeticError):
    """A numerical quantity left its valid range (non-finite, indefinite...)."""


class DegenerateFormError(FblrError):
    """A quadratic form required to have nontrivial range is (numerically) zero."""


class IllPosedError(FblrError):
    """A linear system is singular beyond the condition threshold."""


class DegenerateGcvError(FblrError, ValueError):
    """GCV denominator collapsed (effective degrees of freedom >= n)."""


class NoValidLambdaError(FblrError):
    """Every candidate on the tuning grid produced an ill-posed fit."""


class DegenerateStepNormError(FblrError):
    """The merged half-step penalty vanished; the step norm is not a norm."""


class DegenerateIterateError(FblrError):
    """A block-descent iterate collapsed to (numerically) zero."""


class InternalError(FblrError):
    """A correctness guard failed (e.g. the descent objective increased)."""


class InsufficientSampleError(FblrError):
    """Too few samples for the unpenalized bilinear fit."""


class DataError(FblrError):
    """On-disk data does not match its declared layout."""
