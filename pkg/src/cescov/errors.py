"""Exception types shared across the package."""


class CescovError(Exception):
    """Base class for all package-specific errors."""


class NotHermitian(CescovError):
    """Matrix differs from its conjugate transpose beyond tolerance."""


class NotPositiveDefinite(CescovError):
    """Hermitian matrix has an eigenvalue at or below the PD tolerance."""


class ZeroTrace(CescovError):
    """Matrix trace is nonpositive where a positive trace is required."""


class TooFewObservations(CescovError):
    """Sample size is below the minimum required by the estimator."""


class SingularSCM(CescovError):
    """Sample covariance matrix is numerically singular."""


class DegenerateCoordinate(CescovError):
    """A data coordinate has zero sample variance."""


class InvalidFamily(CescovError):
    """Distribution family parameters are out of range."""
