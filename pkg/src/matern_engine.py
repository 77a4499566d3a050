"""
Matérn covariance on R^N and S^N and its derivative summaries.

Distances are Euclidean; on the sphere the chordal distance
||x - y|| = 2 sin(theta/2) = sqrt(2(1 - <x, y>)) is used.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from src.errors import DomainError
from src.special_math import scaled_matern_profile

SPHERE_P_TOL = 1e-12

EUCLIDEAN = "euclidean"
SPHERE = "sphere"


@dataclass(frozen=True)
class MaternParams:
    sigma2: float
    ell: float
    nu: float

    def __post_init__(self):
        if not (self.sigma2 > 0):
            raise DomainError(f"variance sigma2 must be positive, got {self.sigma2}")
        if not (self.ell > 0):
            raise DomainError(f"length-scale ell must be positive, got {self.ell}")
        if not (self.nu > 2):
            raise DomainError("smoothness parameter must exceed 2")

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)

    def standardized(self):
        """Same field divided by sigma (unit variance)."""
        return replace(self, sigma2=1.0)


@dataclass(frozen=True)
class SpectralSummary:
    # Euclidean: rho'(0), rho''(0), kappa, eta
    # sphere:    C'(1),   C''(1),   kappa~, eta~
    rho1: float
    rho2: float
    kappa: float
    eta: float
    geometry_tag: str


def matern_cov(params, d):
    """M(d) = sigma^2 * profile(sqrt(2 nu) d / ell); elementwise on arrays."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < 0):
        raise DomainError("distance must be non-negative")
    r = math.sqrt(2.0 * params.nu) * d_arr / params.ell
    out = params.sigma2 * np.asarray(scaled_matern_profile(params.nu, r))
    return float(out) if d_arr.ndim == 0 else out


def rho_profile(params, t):
    """
    Covariance as a function of squared distance: rho(t) = M(sqrt(t)).

    This is the reading under which rho'(0) and rho''(0) take their
    closed forms below.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("squared distance must be non-negative")
    return matern_cov(params, np.sqrt(t_arr) if t_arr.ndim else math.sqrt(float(t_arr)))


def spectral_summary_euclidean(params):
    nu, ell, s2 = params.nu, params.ell, params.sigma2
    rho1 = -s2 * nu / (2.0 * (nu - 1.0) * ell**2)
    rho2 = s2 * nu**2 / (4.0 * (nu - 1.0) * (nu - 2.0) * ell**4)
    return SpectralSummary(
        rho1=rho1,
        rho2=rho2,
        # sigma normalised to 1
        kappa=math.sqrt((nu - 2.0) / (nu - 1.0)),
        eta=math.sqrt(2.0 * (nu - 2.0) / nu) * ell,
        geometry_tag=EUCLIDEAN,
    )


def sphere_cov(params, p):
    """C(p) = M(sqrt(2(1 - p))) for an inner product p of unit vectors."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(np.abs(p_arr) > 1.0 + SPHERE_P_TOL):
        raise DomainError("inner product of unit vectors must lie in [-1, 1]")
    p_arr = np.clip(p_arr, -1.0, 1.0)
    chord = np.sqrt(2.0 * (1.0 - p_arr))
    return matern_cov(params, float(chord) if p_arr.ndim == 0 else chord)


def spectral_summary_sphere(params):
    nu, ell, s2 = params.nu, params.ell, params.sigma2
    c1 = s2 * nu / ((nu - 1.0) * ell**2)
    c2 = s2 * nu**2 / ((nu - 1.0) * (nu - 2.0) * ell**4)
    return SpectralSummary(
        rho1=c1,
        rho2=c2,
        kappa=math.sqrt((nu - 2.0) / (nu - 1.0)),
        eta=math.sqrt((nu - 2.0) / nu) * ell,
        geometry_tag=SPHERE,
    )


def _error_exponents(nu, order, cutoff=2.0):
    """
    Powers of h in the error of the one-sided difference quotients.

    Analytic terms give integer powers; the t^(nu+k) terms of the covariance
    give powers nu + k - order. For integer nu those terms carry a log t
    factor, so the power is listed twice (one pass leaves c*h^p behind).
    """
    analytic = [1.0, 2.0] if order == 2 else [2.0]
    exps = list(analytic)
    integer_nu = abs(nu - round(nu)) < 1e-9
    k = 0
    while nu + k - order <= cutoff + 1e-12:
        p = nu + k - order
        if p > 0:
            exps.append(p)
            if integer_nu and p not in analytic:
                exps.append(p)
        k += 1
    return sorted(e for e in exps if e <= cutoff + 1e-12)


def _richardson(estimates, exponents):
    # estimates[k] uses step h / 2^k
    table = list(estimates)
    for p in exponents:
        factor = 2.0**p
        table = [(factor * table[k + 1] - table[k]) / (factor - 1.0) for k in range(len(table) - 1)]
    return table[0]


def rho_derivatives_fd(params, h=None):
    """
    Finite-difference (rho'(0), rho''(0)) with Richardson extrapolation.

    rho is only defined for t >= 0, so the quotients are one-sided:
    D1 = (-3 rho(0) + 4 rho(h) - rho(2h)) / 2h and
    D2 = (rho(0) - 2 rho(h) + rho(2h)) / h^2.
    """
    if h is None:
        h = 1e-3 * params.ell**2
    exps1 = _error_exponents(params.nu, order=1)
    exps2 = _error_exponents(params.nu, order=2)
    levels = max(len(exps1), len(exps2)) + 1

    d1, d2 = [], []
    r0 = rho_profile(params, 0.0)
    for k in range(levels):
        step = h / 2.0**k
        r1 = rho_profile(params, step)
        r2 = rho_profile(params, 2.0 * step)
        d1.append((-3.0 * r0 + 4.0 * r1 - r2) / (2.0 * step))
        d2.append((r0 - 2.0 * r1 + r2) / step**2)

    rho1 = _richardson(d1[: len(exps1) + 1], exps1)
    rho2 = _richardson(d2[: len(exps2) + 1], exps2)
    return rho1, rho2


def sphere_rho_derivatives(params, h=None):
    """Finite-difference (C'(1), C''(1)) through C(p) = rho(2(1 - p))."""
    rho1, rho2 = rho_derivatives_fd(params, h)
    return -2.0 * rho1, 4.0 * rho2
