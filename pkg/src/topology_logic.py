"""
Discrete topology of sampled fields: Euler characteristic of thresholded
grids and meshes, critical points by index, pooled peak heights.
"""
import itertools
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd

from src.errors import CrestWarning, DomainError
from src.simulation_pipeline import BOX_GRID, SPHERE_MESH, FieldSampler, check_resolution

logger = logging.getLogger(__name__)

MIN_POOLED_PEAKS = 100

# 8-neighbour ring
_RING = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


@dataclass(frozen=True)
class EmpiricalCurve:
    levels: Tuple[float, ...]
    survival: Tuple[float, ...]
    stderr: Tuple[float, ...]
    pooled: int

    def to_frame(self):
        return pd.DataFrame({"u": self.levels, "F": self.survival, "stderr": self.stderr})


def _cubical_ec(mask):
    """
    chi of the closed cubical complex spanned by the marked vertices:
    sum over axis subsets S of (-1)^|S| times the number of |S|-cells
    whose 2^|S| corners are all marked.
    """
    total = 0
    axes = range(mask.ndim)
    for k in range(mask.ndim + 1):
        for subset in itertools.combinations(axes, k):
            cells = mask
            for ax in subset:
                lo = [slice(None)] * mask.ndim
                hi = [slice(None)] * mask.ndim
                lo[ax] = slice(0, -1)
                hi[ax] = slice(1, None)
                cells = cells[tuple(lo)] & cells[tuple(hi)]
            total += (-1) ** k * int(cells.sum())
    return total


def _mesh_ec(mask, grid):
    v = int(mask.sum())
    e = int(mask[grid.edges].all(axis=1).sum())
    f = int(mask[grid.faces].all(axis=1).sum())
    return v - e + f


def empirical_ec(sample, u):
    grid = sample.grid
    mask = np.asarray(sample.values) >= u
    if grid.kind == SPHERE_MESH:
        return _mesh_ec(mask, grid)
    return _cubical_ec(mask.reshape(grid.shape))


def _critical_1d(v):
    c = v[1:-1]
    left, right = v[:-2], v[2:]
    is_max = (c > left) & (c > right)
    is_min = (c < left) & (c < right)
    idx = np.concatenate([np.ones(is_max.sum(), dtype=int), np.zeros(is_min.sum(), dtype=int)])
    return idx, np.concatenate([c[is_max], c[is_min]])


def _critical_2d(v):
    nx, ny = v.shape
    c = v[1:-1, 1:-1]

    def nb(di, dj):
        return v[1 + di : nx - 1 + di, 1 + dj : ny - 1 + dj]

    ring = np.stack([nb(di, dj) for di, dj in _RING])
    is_max = np.all(ring < c, axis=0)
    is_min = np.all(ring > c, axis=0)

    gx = 0.5 * (nb(1, 0) - nb(-1, 0))
    gy = 0.5 * (nb(0, 1) - nb(0, -1))
    hxx = nb(1, 0) - 2.0 * c + nb(-1, 0)
    hyy = nb(0, 1) - 2.0 * c + nb(0, -1)
    hxy = 0.25 * (nb(1, 1) - nb(1, -1) - nb(-1, 1) + nb(-1, -1))
    det = hxx * hyy - hxy * hxy

    # stationary point of the local quadratic fit, in grid steps;
    # the saddle belongs to the grid point whose half-open cell holds it
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = -(hyy * gx - hxy * gy) / det
        sy = -(hxx * gy - hxy * gx) / det
    in_cell = (sx >= -0.5) & (sx < 0.5) & (sy >= -0.5) & (sy < 0.5)
    is_saddle = (det < 0) & in_cell & ~is_max & ~is_min

    idx = np.concatenate(
        [
            np.full(int(is_max.sum()), 2, dtype=int),
            np.ones(int(is_saddle.sum()), dtype=int),
            np.zeros(int(is_min.sum()), dtype=int),
        ]
    )
    return idx, np.concatenate([c[is_max], c[is_saddle], c[is_min]])


def critical_values(sample):
    """(indices, values) of the interior critical points of a box-grid sample."""
    grid = sample.grid
    if grid is None or grid.kind != BOX_GRID:
        raise DomainError("critical points are only counted on box grids")
    v = np.asarray(sample.values, dtype=float).reshape(grid.shape)
    if v.ndim == 1:
        return _critical_1d(v)
    if v.ndim == 2:
        return _critical_2d(v)
    raise DomainError(f"critical points are counted in 1 or 2 dimensions, got {v.ndim}")


def empirical_critical_points(sample, u=-math.inf):
    """Counts per index of interior critical points with value >= u."""
    if sample.params is not None:
        check_resolution(sample.grid, sample.params)
    idx, vals = critical_values(sample)
    keep = vals >= u
    return {i: int(np.sum(keep & (idx == i))) for i in range(sample.grid.dim + 1)}


def survival_curve(values, levels):
    """Fraction of pooled values >= u at each level, with binomial standard errors."""
    values = np.asarray(values, dtype=float)
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    n = len(values)
    if n == 0:
        return EmpiricalCurve(
            levels=tuple(levels.tolist()),
            survival=tuple([math.nan] * len(levels)),
            stderr=tuple([math.nan] * len(levels)),
            pooled=0,
        )
    p = np.array([np.mean(values >= u) for u in levels])
    se = np.sqrt(p * (1.0 - p) / n)
    return EmpiricalCurve(levels=tuple(levels.tolist()), survival=tuple(p.tolist()), stderr=tuple(se.tolist()), pooled=n)


def peak_height_histogram(params, grid, levels, replications, seed, index=None, threads=None, stream=None):
    """
    Empirical F_i(u): survival function of the pooled critical values of
    index i (maxima by default) across replications.
    """
    index = grid.dim if index is None else int(index)
    if not 0 <= index <= grid.dim:
        raise DomainError(f"index must lie in 0..{grid.dim}, got {index}")
    sampler = FieldSampler(params, grid)
    samples = sampler.draw_many(seed, replications, threads=threads, stream=stream)

    pooled = []
    for sample in samples:
        idx, vals = critical_values(sample)
        pooled.append(vals[idx == index])
    pooled = np.concatenate(pooled) if pooled else np.empty(0)

    if len(pooled) < MIN_POOLED_PEAKS:
        warnings.warn(
            f"only {len(pooled)} critical values of index {index} pooled; F is poorly resolved",
            CrestWarning,
            stacklevel=2,
        )
    logger.info("Pooled %d critical values of index %d over %d replications", len(pooled), index, replications)
    return survival_curve(pooled, levels)
