import numpy as np
import pytest

from cescov.ces_sampler import (
    CESModel,
    CompoundGaussianK,
    Gaussian,
    RngStream,
    StudentT,
    elliptical_kurtosis,
    kurtosis_lower_bound,
    parse_family,
    sample_ces,
    sample_modular,
    sample_sphere,
)
from cescov.errors import InvalidFamily, NotPositiveDefinite

from util import mc_se, random_hpd, random_unitary


# ---------------------------------------------------------------------------
# Independent Monte Carlo oracle for the elliptical kurtosis.  The r^2 draws
# are built directly from numpy chi-square / gamma generators, not through
# the library sampler, so the closed forms are confirmed before being used.
# ---------------------------------------------------------------------------


def _oracle_r2(gen, family, p, n):
    q = 0.5 * gen.chisquare(2 * p, size=n)
    if isinstance(family, Gaussian):
        return q
    if isinstance(family, StudentT):
        return q * (family.dof - 2.0) / gen.chisquare(family.dof, size=n)
    return q * gen.gamma(family.shape, 1.0 / family.shape, size=n)


def oracle_kurtosis(family, p, n=10**6, seed=1234):
    """MC estimate of E[r^4]/(p(p+1)) - 1 with its empirical standard error."""
    gen = np.random.default_rng(seed)
    terms = _oracle_r2(gen, family, p, n) ** 2 / (p * (p + 1))
    return terms.mean() - 1.0, mc_se(terms)


class TestFamilies:
    def test_parse(self):
        assert parse_family("gaussian") == Gaussian()
        assert parse_family("t:8") == StudentT(8.0)
        assert parse_family("k:0.5") == CompoundGaussianK(0.5)

    def test_parse_rejects(self):
        for bad in ("normal", "t:abc", "t:4", "k:0", "k:-1"):
            with pytest.raises(InvalidFamily):
                parse_family(bad)

    def test_cli_labels(self):
        assert str(Gaussian()) == "gaussian"
        assert str(StudentT(8)) == "t:8"
        assert str(CompoundGaussianK(0.5)) == "k:0.5"

    def test_t_needs_finite_fourth_moments(self):
        with pytest.raises(InvalidFamily):
            StudentT(4.0)
        StudentT(4.0 + 1e-6)  # boundary is open


class TestEllipticalKurtosis:
    def test_gaussian_zero(self):
        assert elliptical_kurtosis(Gaussian()) == 0.0

    def test_t6_confirmed_by_oracle(self):
        est, se = oracle_kurtosis(StudentT(6.0), p=4, n=2 * 10**6)
        assert abs(est - 1.0) < 3 * se
        assert elliptical_kurtosis(StudentT(6.0)) == pytest.approx(1.0)

    def test_k4_confirmed_by_oracle(self):
        est, se = oracle_kurtosis(CompoundGaussianK(4.0), p=4)
        assert abs(est - 0.25) < 3 * se
        assert elliptical_kurtosis(CompoundGaussianK(4.0)) == pytest.approx(0.25)

    def test_lower_bound_satisfied(self):
        for p in (1, 2, 4, 8):
            for fam in (Gaussian(), StudentT(5.0), CompoundGaussianK(0.25)):
                assert elliptical_kurtosis(fam) >= kurtosis_lower_bound(p)


class TestSampleSphere:
    def test_unit_norm(self):
        u = sample_sphere(5, RngStream(3), size=1000)
        np.testing.assert_allclose(np.linalg.norm(u, axis=1), 1.0, atol=1e-14)

    def test_single_draw_shape(self):
        u = sample_sphere(4, RngStream(3))
        assert u.shape == (4,)
        assert abs(np.linalg.norm(u) - 1.0) < 1e-14

    def test_p1_deterministic_modulus(self):
        u = sample_sphere(1, RngStream(5), size=100)
        np.testing.assert_allclose(np.abs(u), 1.0, atol=1e-14)

    def test_moments(self):
        p, n = 4, 10**6
        u = sample_sphere(p, RngStream(11), size=n)
        a2 = np.abs(u) ** 2
        # E|u_q|^2 = 1/p
        for q in range(p):
            se = mc_se(a2[:, q])
            assert abs(a2[:, q].mean() - 1 / p) < 3 * se
        # E|u_q|^4 = 2/(p(p+1))
        a4 = a2**2
        for q in range(p):
            se = mc_se(a4[:, q])
            assert abs(a4[:, q].mean() - 2 / (p * (p + 1))) < 3 * se
        # E|u_q|^2 |u_r|^2 = 1/(p(p+1)) for q != r
        cross = a2[:, 0] * a2[:, 1]
        assert abs(cross.mean() - 1 / (p * (p + 1))) < 3 * mc_se(cross)

    def test_rejects_p0(self):
        with pytest.raises(ValueError):
            sample_sphere(0, RngStream(1))


class TestSampleModular:
    def test_gaussian_second_and_fourth_moment(self):
        p, n = 4, 10**6
        r = sample_modular(Gaussian(), p, RngStream(21), size=n)
        r2, r4 = r**2, r**4
        assert abs(r2.mean() - p) < 3 * mc_se(r2)
        assert abs(r4.mean() - p * (p + 1)) < 3 * mc_se(r4)

    def test_t8_fourth_moment(self):
        p = 4
        r = sample_modular(StudentT(8.0), p, RngStream(22), size=2 * 10**6)
        terms = r**4 / (p * (p + 1))
        assert abs(terms.mean() - 1.0 - 0.5) < 3 * mc_se(terms)

    def test_k2_kurtosis(self):
        p = 4
        r = sample_modular(CompoundGaussianK(2.0), p, RngStream(23), size=10**6)
        terms = r**4 / (p * (p + 1))
        assert abs(terms.mean() - 1.0 - 0.5) < 3 * mc_se(terms)

    def test_scalar_draw(self):
        r = sample_modular(Gaussian(), 3, RngStream(2))
        assert isinstance(r, float) and r > 0

    @pytest.mark.parametrize("p", [1, 2, 4, 8])
    @pytest.mark.parametrize(
        "family", [Gaussian(), StudentT(12.0), CompoundGaussianK(2.0)]
    )
    def test_kurtosis_matches_family_all_dims(self, p, family):
        r = sample_modular(family, p, RngStream(24), size=5 * 10**5)
        terms = r**4 / (p * (p + 1))
        kappa = elliptical_kurtosis(family)
        assert abs(terms.mean() - 1.0 - kappa) < 3.5 * mc_se(terms)


class TestCESModel:
    def test_kappa_cached(self):
        m = CESModel(np.zeros(3), np.eye(3), StudentT(8.0))
        assert m.kappa == pytest.approx(0.5)
        assert m.dim == 3

    def test_sqrt_cached(self):
        gen = np.random.default_rng(30)
        cov = random_hpd(gen, 3)
        m = CESModel(np.zeros(3), cov, Gaussian())
        np.testing.assert_allclose(m.sqrt_cov @ m.sqrt_cov, cov, atol=1e-10)

    def test_rejects_indefinite_cov(self):
        with pytest.raises(NotPositiveDefinite):
            CESModel(np.zeros(2), np.diag([1.0, -1.0]), Gaussian())

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValueError):
            CESModel(np.zeros(3), np.eye(2), Gaussian())


class TestSampleCes:
    def test_identity_gaussian_covariance(self):
        model = CESModel(np.zeros(2), np.eye(2), Gaussian())
        x = sample_ces(model, 10**6, RngStream(31))
        emp = x.conj().T @ x / x.shape[0]
        # per-entry tolerance ~4 SE; entries of z z^H have unit-scale variance
        assert np.abs(emp - np.eye(2)).max() < 4.5 / np.sqrt(x.shape[0])

    def test_general_covariance_and_mean(self):
        gen = np.random.default_rng(32)
        cov = random_hpd(gen, 3)
        mu = np.array([1.0 + 1j, -2.0, 0.5j])
        model = CESModel(mu, cov, CompoundGaussianK(1.0))
        x = sample_ces(model, 4 * 10**5, RngStream(33))
        xbar = x.mean(axis=0)
        np.testing.assert_allclose(xbar, mu, atol=6e-2)
        dev = x - xbar
        emp = dev.T @ dev.conj() / (x.shape[0] - 1)
        scale = np.abs(np.diag(cov)).max()
        assert np.abs(emp - cov).max() < 0.05 * scale

    def test_deterministic(self):
        model = CESModel(np.zeros(4), np.eye(4), StudentT(6.0))
        a = sample_ces(model, 50, RngStream(34, 7))
        b = sample_ces(model, 50, RngStream(34, 7))
        c = sample_ces(model, 50, RngStream(34, 8))
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_unitary_invariance_of_spherical_moments(self):
        p, n = 3, 2 * 10**5
        model = CESModel(np.zeros(p), np.eye(p), CompoundGaussianK(1.0))
        z = sample_ces(model, n, RngStream(35))
        q = random_unitary(np.random.default_rng(36), p)
        zq = z @ q.T
        for data in (z, zq):
            assert np.abs(data.mean(axis=0)).max() < 4 / np.sqrt(n)
            cov = data.conj().T @ data / n
            assert np.abs(cov - np.eye(p)).max() < 4 * 2.0 / np.sqrt(n)
        # fourth moments of single coordinates agree between z and Qz
        m4 = (np.abs(z) ** 4).mean(axis=0)
        m4q = (np.abs(zq) ** 4).mean(axis=0)
        se = mc_se(np.abs(z[:, 0]) ** 4) + mc_se(np.abs(zq[:, 0]) ** 4)
        assert np.abs(m4 - m4q).max() < 4 * se

    def test_modulus_direction_independence(self):
        p, n = 4, 2 * 10**5
        model = CESModel(np.zeros(p), np.eye(p), StudentT(6.0))
        x = sample_ces(model, n, RngStream(37))
        r2 = np.sum(np.abs(x) ** 2, axis=1)
        u2 = np.abs(x) ** 2 / r2[:, None]
        for q in range(p):
            c = np.corrcoef(r2, u2[:, q])[0, 1]
            assert abs(c) < 4 / np.sqrt(n)

    def test_rejects_nonpositive_n(self):
        model = CESModel(np.zeros(2), np.eye(2), Gaussian())
        with pytest.raises(ValueError):
            sample_ces(model, 0, RngStream(1))


class TestRngStream:
    def test_validation(self):
        with pytest.raises(ValueError):
            RngStream(-1)
        with pytest.raises(ValueError):
            RngStream(0, 2**64)

    def test_repeatable(self):
        a = RngStream(5, 9).generator().standard_normal(8)
        b = RngStream(5, 9).generator().standard_normal(8)
        np.testing.assert_array_equal(a, b)
