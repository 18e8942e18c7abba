"""Closed-form second-order theory for affine-equivariant matrix statistics.

For a radially distributed Hermitian p x p statistic the covariance and
pseudo-covariance of its vectorization take the two-constant form

    var  = tau1 * I      + tau2 * vec(I) vec(I)^T
    pvar = tau1 * K_p    + tau2 * vec(I) vec(I)^T

with tau1 >= 0 and tau2 >= -tau1/p.  Affine equivariance transports these
spherical-model constants to an arbitrary covariance matrix M:

    var  = tau1 (M* x M)       + tau2 vec(M) vec(M)^H
    pvar = tau1 (M* x M) K_p   + tau2 vec(M) vec(M)^T

For the unbiased sample covariance matrix built from n observations with
elliptical kurtosis kappa, the constants are sigma = 1,
tau1 = 1/(n-1) + kappa/n and tau2 = kappa/n, giving

    MSE  = E ||S - M||_F^2 = tau1 tr(M)^2 + tau2 tr(M^2)
    NMSE = MSE / ||M||_F^2 = (p/gamma) (1/(n-1) + kappa/n) + kappa/n

and the MSE-optimal scalar shrinkage of S is beta_o = 1/(NMSE + 1), with
oracle MSE equal to beta_o * MSE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ces_sampler import kurtosis_lower_bound
from .lin_core import commutation_matrix, hermitize, kron, scale_and_sphericity, vec

__all__ = [
    "RadialStructure",
    "CovariancePair",
    "ShrinkageReport",
    "radial_var_structure",
    "empirical_structure_pair",
    "affine_equivariant_var",
    "scm_radial_structure",
    "mse_scm",
    "nmse_from_sphericity",
    "beta_opt",
    "oracle_mse",
    "beta_opt_univariate",
    "shrinkage_curve",
    "shrinkage_report",
]

# slack for the tau2 >= -tau1/p boundary so exact boundary inputs pass
_TAU_SLACK = 1e-12


@dataclass(frozen=True)
class RadialStructure:
    """Constants (sigma, tau1, tau2) of a radial Hermitian statistic in dimension dim."""

    sigma: float
    tau1: float
    tau2: float
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        _check_taus(self.tau1, self.tau2, self.dim)


def _check_taus(tau1: float, tau2: float, p: int) -> None:
    if not np.isfinite(tau1) or not np.isfinite(tau2):
        raise ValueError("tau constants must be finite")
    if tau1 < 0.0:
        raise ValueError(f"tau1 must be >= 0, got {tau1}")
    slack = _TAU_SLACK * (abs(tau1) + abs(tau2) + 1.0)
    if tau2 < -tau1 / p - slack:
        raise ValueError(f"tau2 = {tau2} violates tau2 >= -tau1/p = {-tau1 / p}")


@dataclass(frozen=True, eq=False)
class CovariancePair:
    """Covariance and pseudo-covariance of a vectorized p x p statistic."""

    var: np.ndarray
    pvar: np.ndarray

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.var.shape[0])))


def _structure_pair(tau1: float, tau2: float, p: int) -> CovariancePair:
    # spherical-model form; no constraint validation (also used on raw estimates)
    v = vec(np.eye(p))
    rank_one = np.outer(v, v)
    var = tau1 * np.eye(p * p) + tau2 * rank_one
    pvar = tau1 * commutation_matrix(p) + tau2 * rank_one
    return CovariancePair(var=var.astype(np.complex128), pvar=pvar.astype(np.complex128))


def radial_var_structure(tau1: float, tau2: float, p: int) -> CovariancePair:
    """Spherical-model covariance pair: tau1-weighted identity / commutation
    parts plus the tau2-weighted vec(I) vec(I)^T rank-one part."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    _check_taus(tau1, tau2, p)
    return _structure_pair(tau1, tau2, p)


def empirical_structure_pair(tau1: float, tau2: float, p: int) -> CovariancePair:
    """Spherical-model pair built from raw estimated constants.

    Unlike :func:`radial_var_structure` the theoretical constraints are not
    enforced, so estimates that sit marginally outside them still produce a
    comparison target.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return _structure_pair(float(tau1), float(tau2), p)


def affine_equivariant_var(m, s: RadialStructure) -> CovariancePair:
    """Transport spherical-model constants to covariance matrix M.

    Reduces to :func:`radial_var_structure` at M = I.
    """
    m = hermitize(m)
    p = m.shape[0]
    if s.dim != p:
        raise ValueError(f"structure is for dim {s.dim}, matrix is {p} x {p}")
    mm = kron(m.conj(), m)
    vm = vec(m)
    var = s.tau1 * mm + s.tau2 * np.outer(vm, vm.conj())
    pvar = s.tau1 * (mm @ commutation_matrix(p)) + s.tau2 * np.outer(vm, vm)
    return CovariancePair(var=var, pvar=pvar)


def scm_radial_structure(n: int, kappa: float, p: int) -> RadialStructure:
    """Spherical-model constants of the unbiased sample covariance matrix:
    sigma = 1, tau1 = 1/(n-1) + kappa/n, tau2 = kappa/n."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if kappa < kurtosis_lower_bound(p):
        raise ValueError(
            f"kappa = {kappa} is below the lower bound -1/(p+1) = {kurtosis_lower_bound(p)}"
        )
    return RadialStructure(
        sigma=1.0,
        tau1=1.0 / (n - 1) + kappa / n,
        tau2=kappa / n,
        dim=p,
    )


def mse_scm(m, n: int, kappa: float) -> tuple[float, float]:
    """Mean squared error of the sample covariance matrix and its normalized form.

    Returns (MSE, NMSE) with MSE = tau1 tr(M)^2 + tau2 tr(M^2) and
    NMSE = MSE / ||M||_F^2.

    Raises
    ------
    ZeroTrace
        If tr(M) <= 0.
    """
    m = hermitize(m)
    p = m.shape[0]
    scale_and_sphericity(m)  # enforces tr(M) > 0
    s = scm_radial_structure(n, kappa, p)
    t1 = float(np.trace(m).real)
    t2 = float(np.trace(m @ m).real)
    mse = s.tau1 * t1 * t1 + s.tau2 * t2
    return mse, mse / t2


def nmse_from_sphericity(n: int, p: int, gamma: float, kappa: float) -> float:
    """NMSE of the sample covariance matrix from (n, p, sphericity, kurtosis)."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not (1.0 <= gamma <= p):
        raise ValueError(f"sphericity must lie in [1, p] = [1, {p}], got {gamma}")
    if kappa < kurtosis_lower_bound(p):
        raise ValueError(
            f"kappa = {kappa} is below the lower bound -1/(p+1) = {kurtosis_lower_bound(p)}"
        )
    return (p / gamma) * (1.0 / (n - 1) + kappa / n) + kappa / n


def beta_opt(nmse: float) -> float:
    """MSE-optimal scalar multiplier of the sample covariance: 1/(NMSE + 1)."""
    if not (nmse > 0.0):
        raise ValueError(f"NMSE must be positive, got {nmse}")
    return 1.0 / (nmse + 1.0)


def oracle_mse(beta_o: float, mse: float) -> float:
    """MSE of the oracle-scaled estimator beta_o * S, equal to beta_o * MSE(S)."""
    if not (0.0 < beta_o < 1.0):
        raise ValueError(f"beta_o must lie in (0, 1), got {beta_o}")
    if not (mse > 0.0):
        raise ValueError(f"MSE must be positive, got {mse}")
    return beta_o * mse


def beta_opt_univariate(n: int, kurt: float) -> float:
    """Optimal scaling of the sample variance: n(n-1) / (kurt (n-1) + n^2).

    ``kurt`` is the excess kurtosis of the complex scalar sample; 0 for
    Gaussian data, where the result reduces to (n-1)/n.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if kurt < -1.0:
        raise ValueError(f"kurt must be >= -1, got {kurt}")
    return n * (n - 1) / (kurt * (n - 1) + n * n)


def shrinkage_curve(n: int, p: int, gamma: float, kappa_grid) -> list[tuple[float, float]]:
    """Pointwise (kappa, beta_o) series over a kurtosis grid.

    The series is monotonically decreasing in kappa since NMSE is affine
    increasing in kappa.
    """
    out = []
    for kappa in kappa_grid:
        k = float(kappa)
        out.append((k, beta_opt(nmse_from_sphericity(n, p, gamma, k))))
    return out


@dataclass(frozen=True)
class ShrinkageReport:
    """Scale/sphericity/kurtosis inputs with the derived MSE and shrinkage outputs."""

    eta: float
    gamma: float
    kappa: float
    n: int
    p: int
    mse: float
    nmse: float
    beta_o: float
    oracle_mse: float

    def __post_init__(self):
        if not (0.0 < self.beta_o < 1.0):
            raise ValueError(f"beta_o must lie in (0, 1), got {self.beta_o}")
        if abs(self.oracle_mse - self.beta_o * self.mse) > 1e-9 * abs(self.mse):
            raise ValueError("oracle_mse must equal beta_o * mse")

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "gamma": self.gamma,
            "kappa": self.kappa,
            "n": self.n,
            "p": self.p,
            "mse": self.mse,
            "nmse": self.nmse,
            "beta_o": self.beta_o,
            "oracle_mse": self.oracle_mse,
        }


def shrinkage_report(n: int, p: int, kappa: float, *, cov=None, gamma: float | None = None) -> ShrinkageReport:
    """Build the full shrinkage summary from either a covariance matrix or a
    sphericity value.

    Exactly one of ``cov`` and ``gamma`` must be given.  With ``gamma`` alone
    the absolute scale is indeterminate, so the report is at unit scale
    (eta = 1, i.e. tr(M) = p).
    """
    if (cov is None) == (gamma is None):
        raise ValueError("exactly one of cov and gamma must be given")
    if cov is not None:
        m = hermitize(cov)
        if m.shape[0] != p:
            raise ValueError(f"cov is {m.shape[0]} x {m.shape[1]}, expected p = {p}")
        eta, gamma = scale_and_sphericity(m)
        mse, nmse = mse_scm(m, n, kappa)
    else:
        eta = 1.0
        nmse = nmse_from_sphericity(n, p, gamma, kappa)
        s = scm_radial_structure(n, kappa, p)
        # at eta = 1: tr(M) = p and tr(M^2) = gamma * p
        mse = s.tau1 * p * p + s.tau2 * gamma * p
    beta = beta_opt(nmse)
    return ShrinkageReport(
        eta=eta,
        gamma=float(gamma),
        kappa=float(kappa),
        n=int(n),
        p=int(p),
        mse=mse,
        nmse=nmse,
        beta_o=beta,
        oracle_mse=oracle_mse(beta, mse),
    )
