"""
Gaussian Orthogonally Invariant matrices GOI(c): symmetric N x N Gaussian
matrices with E[M_ij M_kl] = (d_ik d_jl + d_il d_jk)/2 + c d_ij d_kl.

Expectations E^N_GOI(c)[g] over the ordered eigenvalues are computed either
by nested adaptive quadrature over the ordered region (N <= 3) or by
chunked Monte Carlo over sampled matrices (c >= 0).
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import integrate
from scipy import special as sp

from src.config import get_settings
from src.errors import DomainError, MethodCapabilityError, UnsupportedParameterError
from src.special_math import gaussian_partial_moments

logger = logging.getLogger(__name__)

MC = "mc"
QUADRATURE = "quadrature"

MAX_QUADRATURE_DIM = 3

# eigenvalue mass sits within this many (1 + N c)^(1/2) of 0
_BREAK_WINDOW = 12.0

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GOIParams:
    N: int
    c: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"matrix size must be a positive integer, got {self.N}")
        if not (1.0 + self.N * self.c > 0):
            raise DomainError(f"GOI(c) needs 1 + N c > 0, got N={self.N}, c={self.c}")


@dataclass(frozen=True)
class GOISample:
    eigenvalues: Tuple[float, ...]

    def __post_init__(self):
        ev = self.eigenvalues
        if any(ev[k] > ev[k + 1] for k in range(len(ev) - 1)):
            raise ValueError("eigenvalues must be ascending")


@dataclass(frozen=True)
class ExpectationResult:
    value: float
    stderr: float
    method: str
    samples_or_nodes: int


# ---------------------------------------------------------------------------
# Density
# ---------------------------------------------------------------------------

def log_normalizer(N, c):
    """log(K_N sqrt(1 + N c)) with K_N = 2^(N/2) prod Gamma(i/2)."""
    log_kn = 0.5 * N * math.log(2.0) + sum(sp.gammaln(i / 2.0) for i in range(1, N + 1))
    return float(log_kn + 0.5 * math.log1p(N * c))


def _ordered_density(lams, c, log_norm):
    # lams already ascending
    n = len(lams)
    sq = 0.0
    total = 0.0
    vdm = 1.0
    for a in range(n):
        la = lams[a]
        sq += la * la
        total += la
        for b in range(a + 1, n):
            vdm *= lams[b] - la
    expo = -0.5 * sq + c / (2.0 * (1.0 + n * c)) * total * total - log_norm
    return vdm * math.exp(expo)


def goi_density(params, lambdas):
    lams = [float(v) for v in lambdas]
    if len(lams) != params.N:
        raise DomainError(f"expected {params.N} eigenvalues, got {len(lams)}")
    if any(lams[k] > lams[k + 1] for k in range(len(lams) - 1)):
        return 0.0
    return _ordered_density(lams, params.c, log_normalizer(params.N, params.c))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_goi_matrices(params, size, rng):
    """
    M = G + sqrt(c) z I with G from the GOE (diagonal variance 1,
    off-diagonal variance 1/2) and z ~ N(0, 1) independent.
    """
    if params.c < 0:
        raise UnsupportedParameterError("GOI sampling needs c >= 0")
    N = params.N
    a = rng.standard_normal((size, N, N))
    g = 0.5 * (a + np.swapaxes(a, -1, -2))
    if params.c > 0:
        z = rng.standard_normal(size)
        g += math.sqrt(params.c) * z[:, None, None] * np.eye(N)
    return g


def sample_goi_batch(params, size, seed, stream=0):
    """Ascending eigenvalues, shape (size, N)."""
    rng = np.random.default_rng((int(seed), *np.atleast_1d(stream).tolist()))
    return np.linalg.eigvalsh(sample_goi_matrices(params, size, rng))


def sample_goi(params, rng_seed):
    eig = sample_goi_batch(params, 1, rng_seed)[0]
    return GOISample(eigenvalues=tuple(float(v) for v in eig))


# ---------------------------------------------------------------------------
# Functionals
# ---------------------------------------------------------------------------

def _check_index(index, N):
    if index < 0 or index > N:
        raise DomainError(f"index must lie in 0..{N}, got {index}")


@dataclass(frozen=True)
class CrossingFunctional:
    """
    g(lam) = prod_j |lam_j - s| * 1{lam_i < s < lam_(i+1)},
    lam_0 = -inf and lam_(N+1) = +inf. Ties count as 0.
    """

    index: int
    shift: float

    @property
    def breakpoints(self):
        return (self.shift,)

    def __call__(self, lams):
        lams = np.asarray(lams, dtype=float)
        single = lams.ndim == 1
        lams = np.atleast_2d(lams)
        N = lams.shape[-1]
        _check_index(self.index, N)
        s = self.shift
        inside = np.ones(lams.shape[0], dtype=bool)
        if self.index >= 1:
            inside &= lams[:, self.index - 1] < s
        if self.index < N:
            inside &= s < lams[:, self.index]
        out = np.where(inside, np.prod(np.abs(lams - s), axis=-1), 0.0)
        return float(out[0]) if single else out

    def scalar(self, lams):
        i, s = self.index, self.shift
        if i >= 1 and not lams[i - 1] < s:
            return 0.0
        if i < len(lams) and not s < lams[i]:
            return 0.0
        out = 1.0
        for v in lams:
            out *= abs(v - s)
        return out


def crossing_functional(i, s, dim=None):
    if dim is not None:
        _check_index(i, dim)
    elif i < 0:
        raise DomainError(f"index must be non-negative, got {i}")
    return CrossingFunctional(index=int(i), shift=float(s))


def _partial_moments_scalar(k_max, lo, hi):
    def phi(x):
        return math.exp(-0.5 * x * x) / _SQRT_2PI if math.isfinite(x) else 0.0

    def tail(x):
        return 0.5 * math.erfc(x / _SQRT2)

    p_lo, p_hi = phi(lo), phi(hi)
    m = [tail(lo) - tail(hi)]
    if k_max >= 1:
        m.append(p_lo - p_hi)
    for k in range(2, k_max + 1):
        e_lo = lo ** (k - 1) * p_lo if math.isfinite(lo) else 0.0
        e_hi = hi ** (k - 1) * p_hi if math.isfinite(hi) else 0.0
        m.append(e_lo - e_hi + (k - 1) * m[k - 2])
    return m


@dataclass(frozen=True)
class LevelCrossingFunctional:
    """
    h(lam) = integral_lower^inf phi(x) g_(i, kappa x / sqrt 2)(lam) dx.

    For fixed lam the crossing indicator restricts x to an interval and the
    product is a degree-N polynomial in x, so h is a finite sum of partial
    Gaussian moments.
    """

    index: int
    kappa: float
    lower: float

    @property
    def slope(self):
        return self.kappa / _SQRT2

    @property
    def breakpoints(self):
        if math.isfinite(self.lower):
            return (self.slope * self.lower,)
        return ()

    def __call__(self, lams):
        lams = np.asarray(lams, dtype=float)
        single = lams.ndim == 1
        lams = np.atleast_2d(lams)
        n, N = lams.shape
        _check_index(self.index, N)
        b = self.slope
        i = self.index

        lo = lams[:, i - 1] / b if i >= 1 else np.full(n, -np.inf)
        hi = lams[:, i] / b if i < N else np.full(n, np.inf)
        lo = np.maximum(lo, self.lower)

        coef = np.zeros((n, N + 1))
        coef[:, 0] = 1.0
        for j in range(N):
            # (b x - lam_j) below the crossing, (lam_j - b x) above it
            a_j, b_j = (-lams[:, j], b) if j < i else (lams[:, j], -b)
            nxt = a_j[:, None] * coef
            nxt[:, 1:] += b_j * coef[:, :-1]
            coef = nxt

        moments = gaussian_partial_moments(N, lo, hi)
        vals = np.einsum("nk,kn->n", coef, moments)
        out = np.where(lo < hi, vals, 0.0)
        return float(out[0]) if single else out

    def scalar(self, lams):
        N = len(lams)
        i = self.index
        b = self.slope
        lo = lams[i - 1] / b if i >= 1 else -math.inf
        hi = lams[i] / b if i < N else math.inf
        lo = max(lo, self.lower)
        if not lo < hi:
            return 0.0
        coef = [1.0]
        for j, lam in enumerate(lams):
            a_j, b_j = (-lam, b) if j < i else (lam, -b)
            nxt = [a_j * v for v in coef] + [0.0]
            for k, v in enumerate(coef):
                nxt[k + 1] += b_j * v
            coef = nxt
        moments = _partial_moments_scalar(N, lo, hi)
        return sum(ck * mk for ck, mk in zip(coef, moments))


def level_crossing_functional(i, kappa, lower, dim=None):
    if dim is not None:
        _check_index(i, dim)
    if not (kappa > 0):
        raise DomainError(f"kappa must be positive, got {kappa}")
    return LevelCrossingFunctional(index=int(i), kappa=float(kappa), lower=float(lower))


# ---------------------------------------------------------------------------
# Expectation
# ---------------------------------------------------------------------------

def _quadrature(params, functional, tol):
    N, c = params.N, params.c
    if N > MAX_QUADRATURE_DIM:
        raise MethodCapabilityError(f"quadrature supports N <= {MAX_QUADRATURE_DIM}, got N={N}")
    log_norm = log_normalizer(N, c)
    scalar_g = getattr(functional, "scalar", None)
    if scalar_g is None:
        def scalar_g(lams):
            return float(functional(np.asarray(lams)))

    # kinks far out in the tail are dropped; 0 is always a split
    window = _BREAK_WINDOW * math.sqrt(1.0 + N * max(c, 0.0))
    breaks = sorted(
        {0.0} | {float(b) for b in getattr(functional, "breakpoints", ()) if math.isfinite(b) and abs(b) <= window}
    )
    evaluations = [0]

    def integrand(lams):
        evaluations[0] += 1
        g = scalar_g(lams)
        if g == 0.0:
            return 0.0
        return g * _ordered_density(lams, c, log_norm)

    # lam_1 < ... < lam_N, each coordinate split at the functional's kinks
    def level(prefix, depth):
        lower = prefix[-1] if prefix else -math.inf
        edges = [lower] + [b for b in breaks if b > lower] + [math.inf]
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            if depth == N - 1:
                def f(x):
                    return integrand(prefix + [x])
            else:
                def f(x):
                    return level(prefix + [x], depth + 1)
            val, _ = integrate.quad(f, a, b, epsabs=tol, epsrel=1e-9, limit=100)
            total += val
        return total

    value = level([], 0)
    return ExpectationResult(value=value, stderr=0.0, method=QUADRATURE, samples_or_nodes=evaluations[0])


def _chunk_sizes(samples, chunk_size):
    full, rest = divmod(int(samples), int(chunk_size))
    return [chunk_size] * full + ([rest] if rest else [])


def mc_expectations(params, functionals, samples=None, seed=None, threads=None, stream=0, chunk_size=None):
    """
    Monte Carlo means of several functionals over one shared sample set.

    Chunk k draws from default_rng((seed, stream, k)) and partial sums are
    combined in chunk order, so the result does not depend on `threads`.
    """
    if params.c < 0:
        raise MethodCapabilityError("Monte Carlo needs c >= 0; use quadrature for negative c")
    settings = get_settings()
    samples = settings.mc_samples if samples is None else int(samples)
    seed = settings.seed if seed is None else int(seed)
    threads = settings.threads if threads is None else max(1, int(threads))
    chunk_size = settings.chunk_size if chunk_size is None else int(chunk_size)
    if samples < 2:
        raise DomainError("Monte Carlo needs at least 2 samples")

    sizes = _chunk_sizes(samples, chunk_size)

    def run_chunk(k):
        lams = sample_goi_batch(params, sizes[k], seed, stream=(stream, k))
        sums = []
        for fn in functionals:
            vals = np.asarray(fn(lams), dtype=float)
            sums.append((float(vals.sum()), float(np.dot(vals, vals))))
        return sums

    logger.info("GOI(%g) N=%d: %d samples in %d chunks on %d threads", params.c, params.N, samples, len(sizes), threads)
    with ThreadPoolExecutor(max_workers=threads) as executor:
        chunk_results = list(executor.map(run_chunk, range(len(sizes))))

    results = []
    for f_idx in range(len(functionals)):
        s1 = 0.0
        s2 = 0.0
        for chunk in chunk_results:
            s1 += chunk[f_idx][0]
            s2 += chunk[f_idx][1]
        mean = s1 / samples
        var = max(0.0, (s2 - samples * mean * mean) / (samples - 1))
        results.append(
            ExpectationResult(value=mean, stderr=math.sqrt(var / samples), method=MC, samples_or_nodes=samples)
        )
    return results


def goi_expectation(params, functional, method=QUADRATURE, samples=None, seed=None, threads=None, tol=1e-10):
    """E^N_GOI(c)[g] by quadrature (N <= 3) or Monte Carlo (c >= 0)."""
    if method == QUADRATURE:
        return _quadrature(params, functional, tol)
    if method == MC:
        return mc_expectations(params, [functional], samples=samples, seed=seed, threads=threads)[0]
    raise DomainError(f"unknown method {method!r}; expected 'mc' or 'quadrature'")
