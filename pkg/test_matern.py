import math

import numpy as np
import pytest
from scipy.spatial.distance import cdist
from sklearn.gaussian_process.kernels import Matern

from src.errors import DomainError
from src.matern_engine import (
    MaternParams,
    matern_cov,
    rho_derivatives_fd,
    rho_profile,
    sphere_cov,
    spectral_summary_euclidean,
    spectral_summary_sphere,
    sphere_rho_derivatives,
)


def test_params_validation():
    with pytest.raises(DomainError, match="smoothness parameter must exceed 2"):
        MaternParams(sigma2=1.0, ell=1.0, nu=2.0)
    with pytest.raises(DomainError):
        MaternParams(sigma2=0.0, ell=1.0, nu=3.0)
    with pytest.raises(DomainError):
        MaternParams(sigma2=1.0, ell=-1.0, nu=3.0)
    p = MaternParams(sigma2=4.0, ell=0.5, nu=3.0)
    assert p.sigma == 2.0
    assert p.standardized() == MaternParams(sigma2=1.0, ell=0.5, nu=3.0)


@pytest.mark.parametrize("nu", [3.0, 5.5])
@pytest.mark.parametrize("ell", [0.7, 1.0])
def test_matern_cov_matches_sklearn_kernel(nu, ell):
    params = MaternParams(sigma2=1.0, ell=ell, nu=nu)
    kernel = Matern(length_scale=ell, nu=nu)
    for d in (0.1, 0.7, 1.5, 3.0):
        X = np.array([[0.0], [d]])
        assert matern_cov(params, d) == pytest.approx(kernel(X)[0, 1], rel=1e-8)


def test_matern_cov_scales_with_variance_and_is_one_at_zero():
    params = MaternParams(sigma2=2.5, ell=1.0, nu=3.0)
    assert matern_cov(params, 0.0) == pytest.approx(2.5)
    d = np.array([0.0, 0.5, 1.0])
    np.testing.assert_allclose(matern_cov(params, d), 2.5 * matern_cov(params.standardized(), d))
    with pytest.raises(DomainError):
        matern_cov(params, -0.1)


def test_euclidean_summary_closed_forms():
    s = spectral_summary_euclidean(MaternParams(sigma2=1.0, ell=1.0, nu=3.0))
    assert s.rho1 == pytest.approx(-0.75)
    assert s.rho2 == pytest.approx(1.125)
    assert s.kappa == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert s.eta == pytest.approx(math.sqrt(2.0 / 3.0), abs=1e-15)
    assert s.kappa**2 == pytest.approx(s.rho1**2 / s.rho2)
    assert s.eta**2 == pytest.approx(-s.rho1 / s.rho2)


def test_spectral_moments_relation():
    # lambda_2 = -2 rho'(0), lambda_4 = 12 rho''(0) for the 1D process
    p = MaternParams(sigma2=1.0, ell=1.0, nu=3.0)
    s = spectral_summary_euclidean(p)
    lam2, lam4 = -2.0 * s.rho1, 12.0 * s.rho2
    assert lam2 == pytest.approx(1.5)
    assert math.sqrt(lam4 / lam2) == pytest.approx(3.0)


@pytest.mark.parametrize("nu", [2.5, 3.0, 5.5])
def test_finite_differences_reproduce_closed_forms(nu):
    params = MaternParams(sigma2=1.0, ell=1.0, nu=nu)
    s = spectral_summary_euclidean(params)
    rho1_fd, rho2_fd = rho_derivatives_fd(params)
    assert rho1_fd == pytest.approx(s.rho1, rel=1e-4)
    assert rho2_fd == pytest.approx(s.rho2, rel=1e-4)


def test_rho_profile_is_covariance_of_squared_distance():
    params = MaternParams(sigma2=1.0, ell=1.3, nu=4.0)
    assert rho_profile(params, 0.49) == pytest.approx(matern_cov(params, 0.7))


def test_sphere_cov_domain():
    params = MaternParams(sigma2=1.0, ell=1.0, nu=3.0)
    assert sphere_cov(params, 1.0) == pytest.approx(1.0)
    assert sphere_cov(params, 1.0 + 1e-13) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        sphere_cov(params, 1.5)
    # antipodal points sit at chordal distance 2
    assert sphere_cov(params, -1.0) == pytest.approx(matern_cov(params, 2.0))


def test_sphere_summary_taylor_expansion():
    params = MaternParams(sigma2=1.0, ell=1.0, nu=5.5)
    s = spectral_summary_sphere(params)
    eps = 1e-3
    taylor = sphere_cov(params, 1.0) - eps * s.rho1 + 0.5 * eps**2 * s.rho2
    assert sphere_cov(params, 1.0 - eps) == pytest.approx(taylor, abs=1e-7)


def test_sphere_summary_closed_forms():
    s = spectral_summary_sphere(MaternParams(sigma2=1.0, ell=1.0, nu=3.0))
    assert s.rho1 == pytest.approx(1.5)
    assert s.rho2 == pytest.approx(4.5)
    assert s.kappa == pytest.approx(math.sqrt(0.5))
    assert s.eta == pytest.approx(math.sqrt(1.0 / 3.0))


@pytest.mark.parametrize("nu", [2.5, 3.0, 5.5])
def test_sphere_derivatives_by_finite_differences(nu):
    params = MaternParams(sigma2=1.0, ell=1.0, nu=nu)
    s = spectral_summary_sphere(params)
    c1, c2 = sphere_rho_derivatives(params)
    assert c1 == pytest.approx(s.rho1, rel=1e-4)
    assert c2 == pytest.approx(s.rho2, rel=1e-4)


@pytest.mark.parametrize("sigma2, ell, nu", [(1.0, 1.0, 3.0), (2.0, 0.7, 4.5)])
def test_sphere_cov_is_matern_of_chord(sigma2, ell, nu):
    params = MaternParams(sigma2=sigma2, ell=ell, nu=nu)
    theta = np.linspace(0.0, math.pi, 181)
    on_sphere = sphere_cov(params, np.cos(theta))
    chordal = matern_cov(params, 2.0 * np.sin(theta / 2.0))
    assert np.max(np.abs(on_sphere - chordal)) <= 1e-12 * sigma2


def test_gram_matrix_is_positive_semidefinite():
    params = MaternParams(sigma2=2.0, ell=0.8, nu=3.5)
    points = np.random.default_rng(0).uniform(0.0, 3.0, (10, 2))
    gram = matern_cov(params, cdist(points, points))
    assert np.min(np.linalg.eigvalsh(gram)) > -1e-8 * params.sigma2


def test_kappa_increases_with_smoothness():
    kappas = [spectral_summary_euclidean(MaternParams(1.0, 1.0, nu)).kappa for nu in (2.1, 2.5, 3.0, 5.0, 10.0, 100.0)]
    assert all(0.0 < k < 1.0 for k in kappas)
    assert all(a < b for a, b in zip(kappas, kappas[1:]))


def test_large_smoothness_limits():
    params = MaternParams(sigma2=1.0, ell=1.5, nu=1e8)
    flat = spectral_summary_euclidean(params)
    curved = spectral_summary_sphere(params)
    assert flat.kappa == pytest.approx(1.0, abs=1e-6)
    assert flat.eta == pytest.approx(math.sqrt(2.0) * 1.5, rel=1e-6)
    assert curved.kappa == pytest.approx(1.0, abs=1e-6)
    assert curved.eta**2 == pytest.approx(1.5**2, rel=1e-6)
