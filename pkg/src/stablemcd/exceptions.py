"""Exception types raised by stablemcd."""


class StableMCDError(Exception):
    """Base class for package errors."""


class RankDeficientScatterError(StableMCDError, ValueError):
    """A scatter matrix is singular, so distances cannot be formed.

    Attributes
    ----------
    deficient : int
        Number of (numerically) zero eigenvalues.
    dim : int
        Dimension of the scatter matrix.
    """

    def __init__(self, deficient, dim, hint=""):
        self.deficient = int(deficient)
        self.dim = int(dim)
        msg = f"rank-deficient scatter: {self.deficient} of {self.dim} dimensions have zero variance"
        if hint:
            msg = f"{msg}; {hint}"
        self.hint = hint
        super().__init__(msg)

    def __reduce__(self):
        return (type(self), (self.deficient, self.dim, self.hint))


class DegenerateCorrectionError(StableMCDError, ValueError):
    """A corrected distance was requested where its normalizer is zero."""


class PairFailure(StableMCDError):
    """A bootstrap pair could not be evaluated."""

    def __init__(self, pair, cause):
        self.pair = pair
        self.cause = cause
        super().__init__(f"bootstrap pair {pair} failed: {cause}")

    def __reduce__(self):
        return (type(self), (self.pair, self.cause))
