"""
Expected numbers of critical points by index, per unit volume, and the
height distributions of critical values, on R^N and on the unit sphere S^N.

Every quantity reduces to a GOI expectation of a crossing functional:

    E[mu_i]     = prefactor * E_GOI(c0)[ prod|lam_j| 1{lam_i < 0 < lam_(i+1)} ]
    E[mu_i(u)]  = prefactor * int_(u/sigma)^inf phi(x)
                      E_GOI(c1)[ prod|lam_j - kappa x/sqrt2| 1{...} ] dx

with (prefactor, c0, c1, kappa) depending on the geometry.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy import integrate

from src.config import OUTER_TAIL_WIDTH
from src.errors import CrestWarning, DegenerateDenominatorError, DomainError, MethodCapabilityError
from src.geometry_logic import BOX, sphere_area
from src.goi_engine import (
    MC,
    QUADRATURE,
    GOIParams,
    crossing_functional,
    goi_expectation,
    level_crossing_functional,
    mc_expectations,
)
from src.matern_engine import EUCLIDEAN, SPHERE, spectral_summary_euclidean, spectral_summary_sphere
from src.special_math import gauss_pdf_tail

logger = logging.getLogger(__name__)

AUTO = "auto"
EXACT = "exact"
ADAPTIVE = "adaptive"
OUTER_MODES = (EXACT, ADAPTIVE)

# clamp F_i silently below this excess, warn above it
_CLAMP_NOISE = 1e-9


@dataclass(frozen=True)
class CritQuery:
    params: object
    geometry_tag: str
    N: int
    i: int
    u: Optional[float] = None

    def __post_init__(self):
        if self.geometry_tag not in (EUCLIDEAN, SPHERE):
            raise DomainError(f"geometry must be 'euclidean' or 'sphere', got {self.geometry_tag!r}")
        if self.N < 1:
            raise DomainError(f"dimension must be at least 1, got {self.N}")
        if not 0 <= self.i <= self.N:
            raise DomainError(f"index must lie in 0..{self.N}, got {self.i}")


@dataclass(frozen=True)
class CritResult:
    density: float
    stderr: float
    method: str
    geometry_tag: str = EUCLIDEAN
    N: int = 1
    index: int = 0
    level: Optional[float] = None


@dataclass(frozen=True)
class CritCount:
    count: float
    stderr: float
    method: str


@dataclass(frozen=True)
class EnsembleSetup:
    c_unconditional: float
    c_level: float
    kappa: float
    prefactor: float


def ensemble_parameters(params, geometry_tag, N):
    if geometry_tag == EUCLIDEAN:
        s = spectral_summary_euclidean(params)
        return EnsembleSetup(
            c_unconditional=0.5,
            c_level=(1.0 - s.kappa**2) / 2.0,
            kappa=s.kappa,
            prefactor=(2.0 / math.pi) ** (N / 2.0) / s.eta**N,
        )
    if geometry_tag == SPHERE:
        s = spectral_summary_sphere(params)
        return EnsembleSetup(
            c_unconditional=(1.0 + s.eta**2) / 2.0,
            c_level=(1.0 + s.eta**2 - s.kappa**2) / 2.0,
            kappa=s.kappa,
            prefactor=math.pi ** (-N / 2.0) / s.eta**N,
        )
    raise DomainError(f"geometry must be 'euclidean' or 'sphere', got {geometry_tag!r}")


def _resolve_method(N, method):
    if method == AUTO:
        return QUADRATURE if N <= 2 else MC
    return method


def expected_crit(params, geometry_tag, N, i, method=AUTO, samples=None, seed=None, threads=None):
    q = CritQuery(params, geometry_tag, N, i)
    setup = ensemble_parameters(params, q.geometry_tag, N)
    method = _resolve_method(N, method)
    res = goi_expectation(
        GOIParams(N, setup.c_unconditional),
        crossing_functional(i, 0.0, dim=N),
        method=method,
        samples=samples,
        seed=seed,
        threads=threads,
    )
    return CritResult(
        density=setup.prefactor * res.value,
        stderr=setup.prefactor * res.stderr,
        method=res.method,
        geometry_tag=geometry_tag,
        N=N,
        index=i,
    )


def expected_crit_euclidean(params, N, i, **kwargs):
    return expected_crit(params, EUCLIDEAN, N, i, **kwargs)


def expected_crit_sphere(params, N, i, **kwargs):
    return expected_crit(params, SPHERE, N, i, **kwargs)


def _standard_level(u, params):
    # phi carries no mass below -OUTER_TAIL_WIDTH
    return max(u / params.sigma, -OUTER_TAIL_WIDTH)


def _outer_adaptive(params, setup, N, i, lower, tol):
    # literal form: adaptive quadrature in x of phi(x) * E[g_(kappa x / sqrt2)]
    ensemble = GOIParams(N, setup.c_level)
    slope = setup.kappa / math.sqrt(2.0)
    lo = max(lower, -OUTER_TAIL_WIDTH)
    hi = max(lower, 0.0) + OUTER_TAIL_WIDTH
    if lo >= hi:
        return 0.0

    def integrand(x):
        phi, _ = gauss_pdf_tail(x)
        inner = goi_expectation(ensemble, crossing_functional(i, slope * x, dim=N), method=QUADRATURE, tol=tol)
        return phi * inner.value

    value, _ = integrate.quad(integrand, lo, hi, epsabs=1e-9, epsrel=1e-8, limit=200)
    return value


def expected_crit_above(
    params, geometry_tag, N, i, u, method=AUTO, outer=EXACT, samples=None, seed=None, threads=None
):
    q = CritQuery(params, geometry_tag, N, i, u)
    setup = ensemble_parameters(params, q.geometry_tag, N)
    method = _resolve_method(N, method)
    lower = _standard_level(u, params)

    if outer == ADAPTIVE:
        if method != QUADRATURE or N > 2:
            raise MethodCapabilityError("adaptive outer integration needs quadrature and N <= 2")
        value = _outer_adaptive(params, setup, N, i, lower, tol=1e-11)
        return CritResult(
            density=setup.prefactor * value,
            stderr=0.0,
            method=QUADRATURE,
            geometry_tag=geometry_tag,
            N=N,
            index=i,
            level=u,
        )
    if outer != EXACT:
        raise DomainError(f"unknown outer integration mode {outer!r}")

    res = goi_expectation(
        GOIParams(N, setup.c_level),
        level_crossing_functional(i, setup.kappa, lower, dim=N),
        method=method,
        samples=samples,
        seed=seed,
        threads=threads,
    )
    return CritResult(
        density=setup.prefactor * res.value,
        stderr=setup.prefactor * res.stderr,
        method=res.method,
        geometry_tag=geometry_tag,
        N=N,
        index=i,
        level=u,
    )


def expected_crit_above_euclidean(params, N, i, u, **kwargs):
    return expected_crit_above(params, EUCLIDEAN, N, i, u, **kwargs)


def expected_crit_above_sphere(params, N, i, u, **kwargs):
    return expected_crit_above(params, SPHERE, N, i, u, **kwargs)


def _clamp_probability(value, u):
    if 0.0 <= value <= 1.0:
        return value
    excess = -value if value < 0.0 else value - 1.0
    if excess > _CLAMP_NOISE:
        warnings.warn(
            f"height distribution at u={u:g} fell outside [0, 1] by {excess:.2e}; clamped",
            CrestWarning,
            stacklevel=3,
        )
    return min(1.0, max(0.0, value))


def _check_denominator(den):
    if not np.isfinite(den) or den <= 1e-300:
        raise DegenerateDenominatorError(f"unconditional expected count underflowed ({den!r})")


def height_curve(params, geometry_tag, N, i, levels, method=AUTO, samples=None, seed=None, threads=None):
    """
    F_i(u) = E[mu_i(X, u)] / E[mu_i(X)] over a level grid, as a DataFrame
    with columns u, F.

    With Monte Carlo, numerator and denominator come from the same
    eigenvalue sample (the denominator is the level functional at
    u = -inf), so every F lies in [0, 1].
    """
    q = CritQuery(params, geometry_tag, N, i)
    setup = ensemble_parameters(params, q.geometry_tag, N)
    method = _resolve_method(N, method)
    levels = np.atleast_1d(np.asarray(levels, dtype=float))

    if method == MC:
        fns = [level_crossing_functional(i, setup.kappa, _standard_level(u, params), dim=N) for u in levels]
        fns.append(level_crossing_functional(i, setup.kappa, -math.inf, dim=N))
        results = mc_expectations(GOIParams(N, setup.c_level), fns, samples=samples, seed=seed, threads=threads)
        den = results[-1].value
        _check_denominator(den)
        values = [r.value / den for r in results[:-1]]
    else:
        den = expected_crit(params, geometry_tag, N, i, method=method).density
        _check_denominator(den)
        values = [expected_crit_above(params, geometry_tag, N, i, u, method=method).density / den for u in levels]

    values = [_clamp_probability(v, u) for v, u in zip(values, levels)]
    return pd.DataFrame({"u": levels, "F": values})


def height_distribution(params, geometry_tag, N, i, u, **kwargs):
    frame = height_curve(params, geometry_tag, N, i, [u], **kwargs)
    return float(frame["F"].iloc[0])


def expected_crit_count(params, geom, i, u=None, **kwargs):
    """Whole-domain count: density times the box volume or omega_N."""
    tag = EUCLIDEAN if geom.kind == BOX else SPHERE
    if u is None:
        res = expected_crit(params, tag, geom.dim, i, **kwargs)
    else:
        res = expected_crit_above(params, tag, geom.dim, i, u, **kwargs)
    vol = geom.volume
    return CritCount(count=res.density * vol, stderr=res.stderr * vol, method=res.method)


def morse_alternating_sum(params, N, u, **kwargs):
    """
    omega_N * sum_i (-1)^(N - i) E[mu_i(X, u)] on S^N.

    For superlevel sets a point of index i (i negative Hessian eigenvalues)
    is a critical point of index N - i of -X, which fixes the sign; at
    u = -inf the sum is chi(S^N).
    """
    total = 0.0
    for i in range(N + 1):
        res = expected_crit_above(params, SPHERE, N, i, u, **kwargs)
        total += (-1) ** (N - i) * res.density
    return sphere_area(N) * total
