import math

import numpy as np
import pytest

from src.ec_logic import (
    ec_curve,
    ec_density,
    excursion_prob_approx,
    expected_ec,
    expected_ec_box,
    expected_ec_cube,
    expected_ec_sphere,
    level_grid,
)
from src.errors import CrestWarning, DomainError
from src.geometry_logic import box, sphere
from src.matern_engine import MaternParams

NU3 = MaternParams(sigma2=1.0, ell=1.0, nu=3.0)


def test_unit_interval_reference_value():
    assert expected_ec_box(NU3, box([1.0]), 1.0) == pytest.approx(0.27688, abs=1e-5)


def test_low_level_recovers_domain_euler_characteristic():
    assert expected_ec_box(NU3, box([1.0, 1.0]), -40.0) == pytest.approx(1.0, abs=1e-12)
    assert expected_ec_sphere(NU3, 2, -40.0) == pytest.approx(2.0, abs=1e-12)
    assert expected_ec_sphere(NU3, 3, -40.0) == pytest.approx(0.0, abs=1e-12)


def test_high_level_vanishes():
    assert expected_ec_box(NU3, box([1.0, 1.0]), 40.0) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("N", [1, 2, 3])
@pytest.mark.parametrize("u", [-1.0, 0.0, 0.8, 2.5])
def test_cube_closed_form_agrees_with_general_box(N, u):
    params = MaternParams(sigma2=1.0, ell=0.7, nu=4.5)
    assert expected_ec_cube(params, N, 1.5, u) == pytest.approx(expected_ec_box(params, box([1.5] * N), u), rel=1e-12)


def test_sphere_two_closed_form():
    # 2 Psi(u) + 4 pi * nu/(nu-1) * u phi(u) / (2 pi)
    u = 1.0
    phi = math.exp(-0.5) / math.sqrt(2.0 * math.pi)
    psi = 0.15865525393145707
    expected = 2.0 * psi + 4.0 * math.pi * 1.5 * u * phi / (2.0 * math.pi)
    assert expected_ec_sphere(NU3, 2, u) == pytest.approx(expected, rel=1e-12)


def test_ec_density_orders():
    assert ec_density(0, 0.0) == pytest.approx(0.5)
    assert ec_density(2, 0.0) == pytest.approx(0.0)
    assert ec_density(1, 0.0) == pytest.approx(1.0 / (2.0 * math.pi))


def test_variance_enters_through_standardised_level():
    wide = MaternParams(sigma2=4.0, ell=1.0, nu=3.0)
    assert expected_ec(wide, box([1.0]), 2.0) == pytest.approx(expected_ec(NU3, box([1.0]), 1.0))


def test_curve_defaults_and_frame():
    curve = ec_curve(NU3, box([1.0]))
    assert len(curve.levels) == 101
    assert curve.levels[0] == pytest.approx(-3.0)
    assert curve.levels[-1] == pytest.approx(5.0)
    frame = curve.to_frame()
    assert list(frame.columns) == ["u", "eec"]
    np.testing.assert_allclose(level_grid(NU3), frame["u"].to_numpy())


def test_box_function_rejects_sphere():
    with pytest.raises(DomainError):
        expected_ec_box(NU3, sphere(2), 0.0)


def test_excursion_probability_flags_low_levels():
    with pytest.warns(CrestWarning):
        low = excursion_prob_approx(NU3, box([1.0]), 0.5)
    assert not low.reliable
    assert 0.0 <= low.probability <= 1.0
    high = excursion_prob_approx(NU3, box([1.0]), 2.5)
    assert high.reliable
    assert high.probability == pytest.approx(expected_ec(NU3, box([1.0]), 2.5))


@pytest.mark.parametrize("u", [-1.0, 0.0, 1.0, 2.5])
def test_length_scale_and_sides_scale_together(u):
    wide = MaternParams(sigma2=1.0, ell=2.5, nu=3.0)
    assert expected_ec_box(wide, box([2.5, 5.0]), u) == pytest.approx(expected_ec_box(NU3, box([1.0, 2.0]), u), rel=1e-12)


@pytest.mark.parametrize("sides", [[1.0], [1.0, 1.5]])
def test_top_order_term_dominates_at_high_levels(sides):
    geom = box(sides)
    N = geom.dim
    scale = math.sqrt(NU3.nu / (NU3.nu - 1.0)) / NU3.ell
    gaps = []
    for u in (10.0, 20.0, 30.0):
        leading = scale**N * math.prod(sides) * ec_density(N, u)
        gap = abs(expected_ec_box(NU3, geom, u) / leading - 1.0)
        assert gap < 6.0 / u
        gaps.append(gap)
    assert gaps[0] > gaps[1] > gaps[2]
