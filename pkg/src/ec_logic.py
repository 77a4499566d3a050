"""
Expected Euler characteristic of Matérn excursion sets on boxes and
spheres, and the EEC approximation of the excursion probability.
"""
import math
import warnings
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd

from src.config import DEFAULT_LEVEL_GRID
from src.errors import CrestWarning, DomainError
from src.geometry_logic import BOX, SPHERE, lk_box, lk_sphere
from src.special_math import gauss_pdf_tail, hermite


@dataclass(frozen=True)
class ECCurve:
    levels: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        if len(self.levels) != len(self.values):
            raise ValueError("levels and values must have the same length")

    def to_frame(self):
        return pd.DataFrame({"u": self.levels, "eec": self.values})


@dataclass(frozen=True)
class ExcursionApprox:
    probability: float
    reliable: bool


def ec_density(j, x):
    """xi_0 = Psi, xi_j = (2 pi)^(-j/2) H_(j-1)(x) phi(x)."""
    phi, psi = gauss_pdf_tail(x)
    if j == 0:
        return psi
    return (2.0 * math.pi) ** (-j / 2.0) * hermite(j - 1, x) * phi


def _metric_scale(params):
    # sqrt(Var[grad X / sigma]) per axis
    return math.sqrt(params.nu / (params.nu - 1.0)) / params.ell


def _eec_sum(params, curvatures, u):
    x = u / params.sigma
    scale = _metric_scale(params)
    total = 0.0
    for j, lj in enumerate(curvatures.values):
        if lj == 0.0:
            continue
        total = total + scale**j * lj * ec_density(j, x)
    return total


def expected_ec_box(params, geom, u):
    if geom.kind != BOX:
        raise DomainError(f"expected a box geometry, got {geom.kind!r}")
    return _eec_sum(params, lk_box(geom.dim, geom.sides), u)


def expected_ec_sphere(params, N, u):
    if N < 1:
        raise DomainError(f"sphere dimension must be at least 1, got {N}")
    return _eec_sum(params, lk_sphere(N), u)


def expected_ec(params, geom, u):
    if geom.kind == SPHERE:
        return expected_ec_sphere(params, geom.dim, u)
    return expected_ec_box(params, geom, u)


def expected_ec_cube(params, N, b, u):
    """The cube [0, b]^N written out term by term."""
    x = u / params.sigma
    phi, psi = gauss_pdf_tail(x)
    total = psi
    for j in range(1, N + 1):
        total = total + (
            math.comb(N, j)
            * b**j
            * params.nu ** (j / 2.0)
            / ((2.0 * math.pi) ** (j / 2.0) * (params.nu - 1.0) ** (j / 2.0) * params.ell**j)
            * hermite(j - 1, x)
            * phi
        )
    return total


def level_grid(params, lo=None, hi=None, count=None):
    """Equally spaced levels; bounds default to [-3 sigma, 5 sigma]."""
    d_lo, d_hi, d_count = DEFAULT_LEVEL_GRID
    lo = d_lo * params.sigma if lo is None else lo
    hi = d_hi * params.sigma if hi is None else hi
    count = d_count if count is None else int(count)
    return np.linspace(lo, hi, count)


def ec_curve(params, geom, levels=None):
    if levels is None:
        levels = level_grid(params)
    levels = np.asarray(levels, dtype=float)
    values = np.asarray(expected_ec(params, geom, levels), dtype=float)
    return ECCurve(levels=tuple(levels.tolist()), values=tuple(values.tolist()))


def excursion_prob_approx(params, geom, u):
    """
    P[sup X >= u] ~ E[chi(A_u)], clamped to [0, 1].

    Only meaningful for high levels; below u = sigma the result is
    flagged as unreliable.
    """
    reliable = u >= params.sigma
    if not reliable:
        warnings.warn(
            f"EEC approximation at u={u:g} < sigma={params.sigma:g} is unreliable",
            CrestWarning,
            stacklevel=2,
        )
    value = float(expected_ec(params, geom, u))
    return ExcursionApprox(probability=max(0.0, min(1.0, value)), reliable=reliable)
