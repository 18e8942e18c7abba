"""Sample statistics of complex datasets: mean, sample covariance matrix,
weighted covariance matrices, and a plug-in elliptical kurtosis estimate.

Datasets are (n, p) complex arrays with rows as observations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCoordinate, SingularSCM, TooFewObservations
from .lin_core import PD_RTOL
from .ces_sampler import kurtosis_lower_bound

__all__ = [
    "SCMResult",
    "require_dataset",
    "sample_mean",
    "scm",
    "sample_variance",
    "weighted_scm",
    "estimate_kurtosis",
]

KURTOSIS_CLIP_EPS = 1e-6


def require_dataset(x, min_rows: int = 1) -> np.ndarray:
    """Coerce to a finite (n, p) complex array with n >= min_rows."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2:
        raise ValueError(f"dataset must be 2-D (rows = observations), got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("dataset contains non-finite entries")
    if x.shape[0] < min_rows:
        raise TooFewObservations(f"need at least {min_rows} observations, got {x.shape[0]}")
    return x


def sample_mean(x) -> np.ndarray:
    """Coordinatewise arithmetic mean of the rows."""
    x = require_dataset(x)
    return x.mean(axis=0)


@dataclass(frozen=True, eq=False)
class SCMResult:
    """Unbiased sample covariance matrix with the sample mean it used."""

    s: np.ndarray
    xbar: np.ndarray
    n: int


def scm(x) -> SCMResult:
    """Unbiased sample covariance matrix of the rows.

    S = (n-1)^{-1} sum_i (x_i - xbar)(x_i - xbar)^H, exactly symmetrized.
    Affine equivariant: scm(X A^T + 1 a^T).s == A @ scm(X).s @ A^H.

    Raises
    ------
    TooFewObservations
        If the dataset has fewer than two rows.
    """
    x = require_dataset(x, min_rows=2)
    n = x.shape[0]
    xbar = x.mean(axis=0)
    dev = x - xbar
    s = dev.T @ dev.conj() / (n - 1)
    s = (s + s.conj().T) / 2
    return SCMResult(s=s, xbar=xbar, n=n)


def sample_variance(x) -> float:
    """Unbiased sample variance of a complex sample: sum |x_i - xbar|^2 / (n-1)."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D sample, got shape {x.shape}")
    if x.shape[0] < 2:
        raise TooFewObservations(f"need at least 2 observations, got {x.shape[0]}")
    dev = x - x.mean()
    return float(np.sum(dev.real**2 + dev.imag**2) / (x.shape[0] - 1))


def weighted_scm(x, weight_fn, pd_tol: float | None = None) -> np.ndarray:
    """Weighted covariance matrix (1/n) sum_i u(d_i) (x_i - xbar)(x_i - xbar)^H.

    The argument of the nonnegative weight function ``u`` is the squared
    Mahalanobis distance d_i = (x_i - xbar)^H S^{-1} (x_i - xbar) computed
    with the unbiased sample covariance S.  With ``u(s) = s`` this is the
    fourth-moment matrix used by FOBI.

    Raises
    ------
    SingularSCM
        If S is numerically singular (in particular whenever n <= p).
    """
    x = require_dataset(x, min_rows=2)
    n, p = x.shape
    res = scm(x)
    eigs = np.linalg.eigvalsh(res.s)
    if pd_tol is None:
        pd_tol = PD_RTOL * max(float(eigs.max()), 0.0)
    if n <= p or float(eigs.min()) <= pd_tol:
        raise SingularSCM(
            f"sample covariance is singular at tolerance {pd_tol:.3e} (n={n}, p={p})"
        )
    dev = x - res.xbar
    d = np.einsum("ia,ai->i", dev.conj(), np.linalg.solve(res.s, dev.T)).real
    w = np.asarray(weight_fn(d), dtype=float)
    if w.shape != d.shape or not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weight function must map d >= 0 to finite nonnegative weights")
    r = (w[:, None] * dev).T @ dev.conj() / n
    return (r + r.conj().T) / 2


def estimate_kurtosis(x, clip_eps: float = KURTOSIS_CLIP_EPS) -> float:
    """Plug-in elliptical kurtosis: average per-coordinate excess kurtosis, halved.

    Each coordinate contributes m4/m2^2 - 2 built from plain sample moments
    of |x - xbar|; the average over coordinates is divided by two and clipped
    from below at -1/(p+1) + clip_eps, the theoretical lower bound.

    Raises
    ------
    TooFewObservations
        If n < 4.
    DegenerateCoordinate
        If some coordinate has zero sample variance.
    """
    x = require_dataset(x, min_rows=4)
    p = x.shape[1]
    dev = x - x.mean(axis=0)
    a2 = dev.real**2 + dev.imag**2
    m2 = a2.mean(axis=0)
    if np.any(m2 == 0.0):
        bad = int(np.argmax(m2 == 0.0))
        raise DegenerateCoordinate(f"coordinate {bad} has zero sample variance")
    m4 = (a2 * a2).mean(axis=0)
    kurt = m4 / (m2 * m2) - 2.0
    kappa_hat = float(kurt.mean() / 2.0)
    return max(kappa_hat, kurtosis_lower_bound(p) + clip_eps)
