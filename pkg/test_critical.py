import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm

from src import critical_logic
from src.critical_logic import (
    ADAPTIVE,
    CritResult,
    ensemble_parameters,
    expected_crit_above_euclidean,
    expected_crit_above_sphere,
    expected_crit_count,
    expected_crit_euclidean,
    expected_crit_sphere,
    height_curve,
    height_distribution,
    morse_alternating_sum,
)
from src.ec_logic import expected_ec_sphere
from src.errors import CrestWarning, DegenerateDenominatorError, DomainError, MethodCapabilityError
from src.geometry_logic import box, sphere, sphere_area
from src.goi_engine import GOIParams, crossing_functional, goi_expectation
from src.matern_engine import EUCLIDEAN, SPHERE, MaternParams, spectral_summary_sphere

NU3 = MaternParams(sigma2=1.0, ell=1.0, nu=3.0)


def kac_rice_1d(params, index, u):
    """
    Expected number per unit length of maxima (index 1) or minima (index 0)
    with value >= u, straight from the 1D Kac-Rice integral.
    """
    nu, ell = params.nu, params.ell
    lam2 = nu / ((nu - 1.0) * ell**2)
    lam4 = 3.0 * nu**2 / ((nu - 1.0) * (nu - 2.0) * ell**4)
    s = math.sqrt(lam4 - lam2**2)
    sign = 1.0 if index == 1 else -1.0

    def inner(x):
        m = sign * lam2 * x
        return norm.pdf(x) * (m * norm.cdf(m / s) + s * norm.pdf(m / s))

    lower = u / params.sigma
    value, _ = integrate.quad(inner, lower, np.inf, epsabs=1e-13, epsrel=1e-12)
    return value / math.sqrt(2.0 * math.pi * lam2)


# --- Phase 1: unconditional densities ---

def test_one_dimensional_maxima_and_minima():
    for i in (0, 1):
        res = expected_crit_euclidean(NU3, 1, i)
        assert res.density == pytest.approx(3.0 / (2.0 * math.pi), rel=1e-7)
        assert res.method == "quadrature"


@pytest.mark.parametrize("nu", [2.5, 3.0, 6.0])
def test_one_dimensional_total_matches_rice(nu):
    params = MaternParams(sigma2=1.0, ell=1.0, nu=nu)
    eta = math.sqrt(2.0 * (nu - 2.0) / nu)
    total = sum(expected_crit_euclidean(params, 1, i).density for i in (0, 1))
    assert total == pytest.approx(math.sqrt(6.0) / (math.pi * eta), abs=1e-6)


def test_planar_alternating_sum_vanishes():
    params = MaternParams(sigma2=1.0, ell=0.8, nu=4.0)
    d = [expected_crit_euclidean(params, 2, i).density for i in range(3)]
    assert d[0] - d[1] + d[2] == pytest.approx(0.0, abs=1e-8)
    assert d[0] == pytest.approx(d[2], rel=1e-8)


def test_ensemble_parameters():
    setup = ensemble_parameters(NU3, EUCLIDEAN, 1)
    assert setup.c_unconditional == 0.5
    assert setup.c_level == pytest.approx(0.25)
    assert setup.kappa == pytest.approx(math.sqrt(0.5))
    assert setup.prefactor == pytest.approx(math.sqrt(2.0 / math.pi) / math.sqrt(2.0 / 3.0))
    sph = ensemble_parameters(NU3, SPHERE, 2)
    assert sph.c_unconditional == pytest.approx((1.0 + 1.0 / 3.0) / 2.0)
    assert sph.c_level == pytest.approx((1.0 + 1.0 / 3.0 - 0.5) / 2.0)


# --- Phase 2: above a level ---

@pytest.mark.parametrize("index", [0, 1])
@pytest.mark.parametrize("u", [-1.0, 0.0, 1.0, 2.0])
def test_above_level_matches_kac_rice(index, u):
    got = expected_crit_above_euclidean(NU3, 1, index, u).density
    assert got == pytest.approx(kac_rice_1d(NU3, index, u), rel=1e-6)


def test_above_level_respects_variance():
    wide = MaternParams(sigma2=4.0, ell=1.0, nu=3.0)
    got = expected_crit_above_euclidean(wide, 1, 1, 2.0).density
    assert got == pytest.approx(expected_crit_above_euclidean(NU3, 1, 1, 1.0).density, rel=1e-10)


@pytest.mark.parametrize("N", [1, 2])
def test_very_low_level_recovers_unconditional_euclidean(N):
    params = MaternParams(sigma2=2.0, ell=1.0, nu=3.0)
    u = -40.0 * params.sigma
    for i in range(N + 1):
        above = expected_crit_above_euclidean(params, N, i, u).density
        assert above == pytest.approx(expected_crit_euclidean(params, N, i).density, rel=1e-5)


def test_very_low_level_recovers_unconditional_sphere():
    for i in range(3):
        above = expected_crit_above_sphere(NU3, 2, i, -40.0).density
        assert above == pytest.approx(expected_crit_sphere(NU3, 2, i).density, rel=1e-5)


def test_adaptive_outer_integral_agrees_with_exact():
    exact = expected_crit_above_euclidean(NU3, 1, 1, 0.5).density
    adaptive = expected_crit_above_euclidean(NU3, 1, 1, 0.5, outer=ADAPTIVE).density
    assert adaptive == pytest.approx(exact, rel=1e-6)


def test_adaptive_outer_integral_needs_low_dimension():
    with pytest.raises(MethodCapabilityError):
        expected_crit_above_euclidean(NU3, 3, 1, 0.5, outer=ADAPTIVE)


# --- Phase 3: height distributions ---

@pytest.mark.parametrize("u", [0.0, 1.0, 2.0])
def test_height_distribution_matches_kac_rice_ratio(u):
    expected = kac_rice_1d(NU3, 1, u) / kac_rice_1d(NU3, 1, -np.inf)
    assert height_distribution(NU3, EUCLIDEAN, 1, 1, u) == pytest.approx(expected, abs=1e-6)


def test_height_curve_shape():
    frame = height_curve(NU3, EUCLIDEAN, 1, 1, np.linspace(-3.0, 4.0, 15))
    assert list(frame.columns) == ["u", "F"]
    f = frame["F"].to_numpy()
    assert np.all((f >= 0.0) & (f <= 1.0))
    assert np.all(np.diff(f) <= 1e-12)
    assert height_distribution(NU3, EUCLIDEAN, 1, 1, -40.0) == pytest.approx(1.0, abs=1e-6)


def test_monte_carlo_height_curve_stays_in_unit_interval():
    levels = [-40.0, 0.0, 1.0, 2.0]
    mc = height_curve(NU3, EUCLIDEAN, 1, 1, levels, method="mc", samples=100_000, seed=3)
    quad = height_curve(NU3, EUCLIDEAN, 1, 1, levels)
    assert mc["F"].iloc[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all((mc["F"] >= 0.0) & (mc["F"] <= 1.0))
    np.testing.assert_allclose(mc["F"], quad["F"], atol=0.02)


def test_degenerate_denominator(monkeypatch):
    monkeypatch.setattr(critical_logic, "expected_crit", lambda *a, **k: CritResult(0.0, 0.0, "quadrature"))
    with pytest.raises(DegenerateDenominatorError):
        height_distribution(NU3, EUCLIDEAN, 1, 1, 0.0)


def test_ratio_above_one_is_clamped_with_warning(monkeypatch):
    true = expected_crit_euclidean(NU3, 1, 1).density
    monkeypatch.setattr(critical_logic, "expected_crit", lambda *a, **k: CritResult(0.5 * true, 0.0, "quadrature"))
    with pytest.warns(CrestWarning):
        assert height_distribution(NU3, EUCLIDEAN, 1, 1, -40.0) == 1.0


# --- Phase 4: whole domains, sphere, method routing ---

def test_whole_domain_counts():
    density = expected_crit_euclidean(NU3, 1, 1).density
    assert expected_crit_count(NU3, box([5.0]), 1).count == pytest.approx(5.0 * density)
    sph = expected_crit_sphere(NU3, 2, 2).density
    assert expected_crit_count(NU3, sphere(2), 2).count == pytest.approx(sphere_area(2) * sph)


def test_morse_sum_on_sphere_anchors_at_two():
    assert morse_alternating_sum(NU3, 2, -40.0) == pytest.approx(2.0, abs=1e-4)


def test_morse_sum_matches_sphere_eec_at_sigma():
    assert morse_alternating_sum(NU3, 2, 1.0) == pytest.approx(expected_ec_sphere(NU3, 2, 1.0), abs=1e-4)


@pytest.mark.slow
@pytest.mark.parametrize("u", [0.0, 2.0])
def test_morse_sum_matches_sphere_eec(u):
    assert morse_alternating_sum(NU3, 2, u) == pytest.approx(expected_ec_sphere(NU3, 2, u), abs=1e-4)


def test_high_dimension_routes_to_monte_carlo():
    res = expected_crit_euclidean(NU3, 3, 0, samples=20_000, seed=1)
    assert res.method == "mc"
    assert res.stderr > 0.0
    assert res.density > 0.0


def test_bad_queries():
    with pytest.raises(DomainError):
        expected_crit_euclidean(NU3, 1, 2)
    with pytest.raises(DomainError):
        critical_logic.expected_crit(NU3, "torus", 1, 0)


# --- Phase 5: limits, symmetries and scaling ---

@pytest.mark.parametrize("u", [-12.0, -20.0, -33.0, -36.0, -40.0])
def test_minima_height_distribution_stays_at_one_far_below(u):
    assert height_distribution(NU3, EUCLIDEAN, 1, 0, u) == pytest.approx(1.0, abs=1e-6)


def test_far_below_levels_in_two_dimensions():
    for tag in (EUCLIDEAN, SPHERE):
        frame = height_curve(NU3, tag, 2, 0, [-36.0, -40.0])
        np.testing.assert_allclose(frame["F"], 1.0, atol=1e-6)


def test_high_level_counts_vanish():
    for N in (1, 2):
        for i in range(N + 1):
            assert expected_crit_above_euclidean(NU3, N, i, 40.0).density == pytest.approx(0.0, abs=1e-12)
            assert expected_crit_above_sphere(NU3, N, i, 40.0).density == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("N", [1, 2])
def test_sphere_densities_mirror_in_index(N):
    d = [expected_crit_sphere(NU3, N, i).density for i in range(N + 1)]
    for i in range(N + 1):
        assert d[i] == pytest.approx(d[N - i], rel=1e-8)


def test_sphere_density_under_doubled_length_scale():
    wide = MaternParams(sigma2=1.0, ell=2.0, nu=3.0)
    eta = spectral_summary_sphere(wide).eta
    for i in range(3):
        inner = goi_expectation(GOIParams(2, (1.0 + eta**2) / 2.0), crossing_functional(i, 0.0, dim=2)).value
        assert expected_crit_sphere(wide, 2, i).density == pytest.approx(inner / (math.pi * eta**2), rel=1e-10)


@pytest.mark.parametrize("c", [0.5, 2.0])
@pytest.mark.parametrize("tag", [EUCLIDEAN, SPHERE])
def test_height_distribution_depends_on_level_over_sigma(c, tag):
    scaled = MaternParams(sigma2=c * c, ell=1.0, nu=3.0)
    for i in (0, 1):
        assert height_distribution(scaled, tag, 1, i, c * 0.8) == pytest.approx(
            height_distribution(NU3, tag, 1, i, 0.8), rel=1e-9
        )
