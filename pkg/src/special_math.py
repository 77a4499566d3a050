"""
Scalar special functions used everywhere else: K_nu, the scaled Matérn
profile, Hermite polynomials, the normal density/tail, digamma and
Pochhammer, and partial Gaussian moments.

K_nu is evaluated from its small-argument series (one form for
non-integer orders, the digamma form for integer orders) below a per-order
crossover radius and from scipy's exponentially scaled kve above it.
"""
import logging
import math
from functools import lru_cache

import numpy as np
from scipy import special as sp

from src.errors import DomainError, PoleError

logger = logging.getLogger(__name__)

# Orders closer than this to an integer use the integer (digamma) series.
NEAR_INTEGER_TOL = 1e-6

# Largest first: the series is cheaper and exact at r -> 0, so we keep it
# as long as it still agrees with kve.
_CROSSOVER_CANDIDATES = (4.0, 3.0, 2.0, 1.5, 1.0, 0.5, 0.25)
_CROSSOVER_RTOL = 1e-10
# the series error oscillates in r; check a dense grid with a margin
_CROSSOVER_POINTS = 64
_CROSSOVER_MARGIN = 0.25

_SERIES_MAX_TERMS = 400
_SERIES_EPS = 1e-17

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _as_array(r):
    arr = np.asarray(r, dtype=float)
    return arr, arr.ndim == 0


def _integer_order(nu):
    """Returns n if nu should be routed to the integer series, else None."""
    n = int(round(nu))
    if n >= 1 and abs(nu - n) <= NEAR_INTEGER_TOL * (1.0 + 1e-8):
        return n
    return None


def _profile_series_fractional(nu, r):
    # r^nu K_nu(r) / (2^(nu-1) Gamma(nu)) from the two hypergeometric sums
    z = r * r / 4.0
    term1 = np.ones_like(r)
    sum1 = term1.copy()
    term2 = np.ones_like(r)
    sum2 = term2.copy()
    for j in range(_SERIES_MAX_TERMS):
        term1 = term1 * z / ((j + 1.0) * (1.0 - nu + j))
        term2 = term2 * z / ((j + 1.0) * (1.0 + nu + j))
        sum1 += term1
        sum2 += term2
        if np.all(np.abs(term1) <= _SERIES_EPS * np.abs(sum1)) and np.all(
            np.abs(term2) <= _SERIES_EPS * np.abs(sum2)
        ):
            break
    log_coef = -2.0 * nu * math.log(2.0) - sp.gammaln(nu)
    coef = sp.gamma(-nu) * math.exp(log_coef)
    with np.errstate(divide="ignore"):
        tail = coef * np.where(r > 0, r ** (2.0 * nu), 0.0) * sum2
    return sum1 + tail


def _profile_series_integer(n, r):
    z = r * r / 4.0
    fact_nm1 = math.factorial(n - 1)

    finite = np.zeros_like(r)
    for j in range(n):
        finite += ((-1) ** j) * math.factorial(n - j - 1) / (math.factorial(j) * fact_nm1) * z**j

    with np.errstate(divide="ignore", invalid="ignore"):
        log_half_r = np.where(r > 0, np.log(np.where(r > 0, r, 1.0) / 2.0), 0.0)

    weight = 1.0 / math.factorial(n)
    log_sum = np.zeros_like(r)
    zj = np.ones_like(r)
    for j in range(_SERIES_MAX_TERMS):
        bracket = 0.5 * sp.digamma(1.0 + j) + 0.5 * sp.digamma(1.0 + n + j) - log_half_r
        term = bracket * zj * weight
        log_sum += term
        if j > 0 and np.all(np.abs(term) <= _SERIES_EPS * np.maximum(np.abs(log_sum), 1e-300)):
            break
        zj = zj * z
        weight = weight / ((j + 1.0) * (n + j + 1.0))

    coef = ((-1) ** n) / (2.0 ** (2 * n - 1) * fact_nm1)
    return finite + coef * r ** (2 * n) * log_sum


def _profile_series(nu, r):
    n = _integer_order(nu)
    if n is not None:
        return _profile_series_integer(n, r)
    return _profile_series_fractional(nu, r)


def _profile_scaled(nu, r):
    # log-space so large r neither overflows r^nu nor underflows K_nu
    with np.errstate(divide="ignore"):
        log_val = (
            (1.0 - nu) * math.log(2.0)
            - sp.gammaln(nu)
            + nu * np.log(r)
            + np.log(sp.kve(nu, r))
            - r
        )
    return np.exp(log_val)


@lru_cache(maxsize=256)
def series_crossover(nu):
    """
    Radius below which the series is used for order nu.

    The handbook series carries no stated convergence radius; cancellation
    between its terms grows with r, so we take the largest candidate radius
    where the series still matches kve to 1e-10 relative everywhere on
    (0, radius]. Returns 0.0 if none does (kve is then used everywhere).
    """
    nu = float(nu)
    if int(round(nu)) == 0 and abs(nu) <= NEAR_INTEGER_TOL:
        return 0.0
    for radius in _CROSSOVER_CANDIDATES:
        points = np.linspace(radius / _CROSSOVER_POINTS, radius, _CROSSOVER_POINTS)
        series = _profile_series(nu, points)
        scaled = _profile_scaled(nu, points)
        if np.all(np.abs(series - scaled) <= _CROSSOVER_MARGIN * _CROSSOVER_RTOL * np.abs(scaled)):
            logger.debug("K_nu crossover for nu=%g at r=%g", nu, radius)
            return radius
    logger.debug("K_nu series never matched kve for nu=%g", nu)
    return 0.0


def _matern_profile(nu, r):
    """2^(1-nu) Gamma(nu)^-1 r^nu K_nu(r), without the nu > 2 restriction."""
    arr, scalar = _as_array(r)
    if np.any(arr < 0):
        raise DomainError("profile argument must be non-negative")
    out = np.empty_like(arr)
    cut = series_crossover(nu)
    small = arr < cut
    if np.any(small):
        out[small] = _profile_series(nu, arr[small])
    if np.any(~small):
        big = arr[~small]
        vals = np.ones_like(big)
        pos = big > 0
        vals[pos] = _profile_scaled(nu, big[pos])
        out[~small] = vals
    return float(out) if scalar else out


def bessel_k(order, r):
    """
    Modified Bessel function of the second kind K_order(r), r > 0.

    >>> round(bessel_k(0.5, 1.0), 6)
    0.461068
    """
    if order <= 0:
        raise DomainError(f"order must be positive, got {order}")
    arr, scalar = _as_array(r)
    if np.any(arr <= 0):
        raise DomainError("Bessel argument must be positive")
    profile = np.asarray(_matern_profile(order, arr))
    log_scale = (order - 1.0) * math.log(2.0) + sp.gammaln(order) - order * np.log(arr)
    out = profile * np.exp(log_scale)
    # above the crossover kve is exact for the actual order; skip the round trip
    cut = series_crossover(order)
    big = arr >= cut
    if np.any(big):
        out = np.where(big, sp.kve(order, arr) * np.exp(-arr), out)
    return float(out) if scalar else out


def scaled_matern_profile(nu, r):
    """
    2^(1-nu) Gamma(nu)^-1 r^nu K_nu(r) with the value 1 at r = 0.

    Works elementwise on arrays.
    """
    if nu <= 2:
        raise DomainError("smoothness parameter must exceed 2")
    return _matern_profile(nu, r)


def hermite(j, x):
    """Probabilists' Hermite polynomial He_j(x) by the three-term recurrence."""
    if int(j) != j or j < 0:
        raise DomainError(f"Hermite order must be a non-negative integer, got {j}")
    x_arr, scalar = _as_array(x)
    prev = np.ones_like(x_arr)
    if j == 0:
        return float(prev) if scalar else prev
    cur = x_arr.copy()
    for k in range(1, int(j)):
        prev, cur = cur, x_arr * cur - k * prev
    return float(cur) if scalar else cur


def gauss_pdf_tail(x):
    """Returns (phi(x), Psi(x)): standard normal density and upper tail."""
    x_arr, scalar = _as_array(x)
    phi = np.exp(-0.5 * x_arr * x_arr) / _SQRT_2PI
    psi = sp.ndtr(-x_arr)
    if scalar:
        return float(phi), float(psi)
    return phi, psi


def digamma_pochhammer(z, j):
    if int(j) != j or j < 0:
        raise DomainError(f"Pochhammer length must be a non-negative integer, got {j}")
    if z <= 0 and float(z).is_integer():
        raise PoleError(f"digamma has a pole at z={z}")
    psi = float(sp.digamma(z))
    poch = 1.0 if j == 0 else float(sp.poch(z, j))
    return psi, poch


def gaussian_partial_moments(k_max, lo, hi):
    """
    M_k = integral_lo^hi x^k phi(x) dx for k = 0..k_max.

    lo/hi broadcast against each other and may be infinite. The result has
    shape (k_max + 1, *broadcast_shape).
    """
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    phi_lo = np.exp(-0.5 * lo * lo) / _SQRT_2PI
    phi_hi = np.exp(-0.5 * hi * hi) / _SQRT_2PI
    fin_lo = np.isfinite(lo)
    fin_hi = np.isfinite(hi)
    safe_lo = np.where(fin_lo, lo, 0.0)
    safe_hi = np.where(fin_hi, hi, 0.0)

    moments = np.empty((k_max + 1,) + lo.shape)
    moments[0] = sp.ndtr(-lo) - sp.ndtr(-hi)
    if k_max >= 1:
        moments[1] = phi_lo - phi_hi
    for k in range(2, k_max + 1):
        edge_lo = np.where(fin_lo, safe_lo ** (k - 1) * phi_lo, 0.0)
        edge_hi = np.where(fin_hi, safe_hi ** (k - 1) * phi_hi, 0.0)
        moments[k] = edge_lo - edge_hi + (k - 1) * moments[k - 2]
    return moments
