"""Exception types shared across the package."""


class AirCompError(Exception):
    """Base class for all package-specific errors."""


class RankDeficient(AirCompError):
    """A matrix that must have full column rank does not."""


# The linear-algebra kernels raise the same condition under this name.
RankDeficientInput = RankDeficient


class NotHermitian(AirCompError):
    """Eigenvalue routine got a matrix that is not Hermitian."""


class EmptySample(AirCompError):
    """A statistic was requested on an empty sample set."""


class InvalidShape(AirCompError):
    """Encoding-matrix dimensions violate l_tilde >= l >= 1."""


class ZeroChannel(AirCompError):
    """Channel-inversion precoding hit a coefficient below the gain floor."""


class ShapeMismatch(AirCompError):
    """Vector/matrix dimensions are inconsistent across the chain."""


class FloorUnsatisfiable(AirCompError):
    """Fading redraws kept violating the minimum-gain floor."""


class NonIntegralBlocklength(AirCompError):
    """A requested rate does not yield an integer codeword length."""
