"""
Brute-force Matérn field draws on box grids and sphere meshes.

One joint draw is L @ z with L the Cholesky factor of the Gram matrix of
the grid points. The factor is computed once per (params, grid) and shared
by every replication.
"""
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from src.config import JITTER_CAP, get_settings
from src.errors import CrestWarning, DomainError, FactorizationError
from src.geometry_logic import BOX, sphere
from src.matern_engine import matern_cov, sphere_cov

logger = logging.getLogger(__name__)

BOX_GRID = "box-grid"
SPHERE_MESH = "sphere-mesh"

MIN_POINTS_PER_ELL = 8
MIN_MESH_VERTICES = 200
MAX_GRAM_POINTS = 4096

_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0

_ICOSAHEDRON_FACES = (
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
)


@dataclass(frozen=True, eq=False)
class GridSpec:
    kind: str
    resolution: float
    extent: object
    points: np.ndarray
    shape: Tuple[int, ...] = ()
    edges: Optional[np.ndarray] = None
    faces: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in (BOX_GRID, SPHERE_MESH):
            raise DomainError(f"unknown grid kind {self.kind!r}")
        if self.kind == BOX_GRID and int(np.prod(self.shape)) != len(self.points):
            raise DomainError("box grid shape does not match its point count")
        if self.kind == SPHERE_MESH and (self.edges is None or self.faces is None):
            raise DomainError("a sphere mesh needs edges and faces")

    @property
    def size(self):
        return len(self.points)

    @property
    def dim(self):
        return self.extent.dim


@dataclass(frozen=True, eq=False)
class FieldSample:
    locations: np.ndarray
    values: np.ndarray
    seed: int
    replication: int = 0
    grid: Optional[GridSpec] = None
    params: object = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.locations) != len(self.values):
            raise DomainError("locations and values must have the same length")


def box_grid(geom, points_per_unit, params=None):
    """Regular grid over [0, b_1] x ... x [0, b_N], both ends included."""
    if geom.kind != BOX:
        raise DomainError(f"box grid needs a box geometry, got {geom.kind!r}")
    if not points_per_unit > 0:
        raise DomainError("grid resolution must be positive")
    counts = tuple(int(round(side * points_per_unit)) + 1 for side in geom.sides)
    if any(c < 3 for c in counts):
        raise DomainError("box grid needs at least 3 points per axis")
    axes = [np.linspace(0.0, side, c) for side, c in zip(geom.sides, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    grid = GridSpec(kind=BOX_GRID, resolution=float(points_per_unit), extent=geom, points=points, shape=counts)
    if params is not None:
        check_resolution(grid, params)
    return grid


def check_resolution(grid, params):
    if grid.kind == BOX_GRID and grid.resolution * params.ell < MIN_POINTS_PER_ELL:
        warnings.warn(
            f"grid has {grid.resolution * params.ell:.1f} points per length-scale; "
            f"counts are biased below {MIN_POINTS_PER_ELL}",
            CrestWarning,
            stacklevel=3,
        )


def _edges_of(faces):
    pairs = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [0, 2]]])
    pairs.sort(axis=1)
    return np.unique(pairs, axis=0)


def _subdivide(verts, faces):
    # each triangle -> four; midpoints shared through the edge cache
    verts = list(verts)
    cache = {}

    def midpoint(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in cache:
            s = np.asarray(verts[a]) + np.asarray(verts[b])
            verts.append(s / np.linalg.norm(s))
            cache[key] = len(verts) - 1
        return cache[key]

    out = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        out.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
    return verts, out


def icosphere(subdivisions=0):
    """
    Icosahedron on the unit sphere refined by midpoint subdivision.

    V = 10 * 4^k + 2: 12, 42, 162, 642, 2562, ...
    """
    if subdivisions < 0:
        raise DomainError("subdivision count must be non-negative")
    t = _GOLDEN
    raw = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    verts = [np.asarray(v, dtype=float) / math.sqrt(1.0 + t * t) for v in raw]
    faces = list(_ICOSAHEDRON_FACES)
    for _ in range(int(subdivisions)):
        verts, faces = _subdivide(verts, faces)

    points = np.asarray(verts, dtype=float)
    points /= np.linalg.norm(points, axis=1, keepdims=True)
    faces = np.asarray(faces, dtype=np.int64)
    return GridSpec(
        kind=SPHERE_MESH,
        resolution=float(len(points)),
        extent=sphere(2),
        points=points,
        edges=_edges_of(faces),
        faces=faces,
    )


def sphere_mesh(vertices):
    """Smallest icosphere with at least `vertices` vertices."""
    if vertices < MIN_MESH_VERTICES:
        warnings.warn(
            f"sphere mesh with {vertices} target vertices is below {MIN_MESH_VERTICES}",
            CrestWarning,
            stacklevel=2,
        )
    k = 0
    while 10 * 4**k + 2 < vertices:
        k += 1
    return icosphere(k)


def gram_matrix(params, grid):
    if grid.kind == SPHERE_MESH:
        return sphere_cov(params, grid.points @ grid.points.T)
    return matern_cov(params, cdist(grid.points, grid.points))


def cholesky_with_jitter(gram, sigma2):
    n = gram.shape[0]
    for jitter in (0.0, 1e-14, 1e-13, 1e-12, 1e-11, JITTER_CAP):
        try:
            factor = np.linalg.cholesky(gram + jitter * sigma2 * np.eye(n))
        except np.linalg.LinAlgError:
            logger.debug("Cholesky failed with jitter %g * sigma2", jitter)
            continue
        if jitter:
            logger.debug("Cholesky succeeded with jitter %g * sigma2", jitter)
        return factor
    raise FactorizationError(
        f"Gram matrix of {n} points is not positive definite even with jitter {JITTER_CAP:g} * sigma2; "
        "lower the resolution or check the parameters"
    )


class FieldSampler:
    """Exact joint draws of the field at a fixed set of grid points."""

    def __init__(self, params, grid):
        if grid.size > MAX_GRAM_POINTS:
            raise DomainError(f"{grid.size} points exceed the dense sampler limit of {MAX_GRAM_POINTS}")
        check_resolution(grid, params)
        self.params = params
        self.grid = grid
        logger.info("Factorising %d x %d Gram matrix (%s)", grid.size, grid.size, grid.kind)
        self.factor = cholesky_with_jitter(gram_matrix(params, grid), params.sigma2)

    def draw(self, seed, replication=0, stream=None):
        key = (int(seed), int(replication)) if stream is None else (int(seed), int(stream), int(replication))
        rng = np.random.default_rng(key)
        z = rng.standard_normal(self.grid.size)
        return FieldSample(
            locations=self.grid.points,
            values=self.factor @ z,
            seed=int(seed),
            replication=int(replication),
            grid=self.grid,
            params=self.params,
        )

    def draw_many(self, seed, replications, threads=None, stream=None):
        threads = get_settings().threads if threads is None else max(1, int(threads))
        logger.info("Drawing %d replications on %d threads", replications, threads)
        with ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(lambda r: self.draw(seed, r, stream), range(int(replications))))


def sample_field(params, grid, seed):
    return FieldSampler(params, grid).draw(seed)

