"""Boxes in R^N, unit spheres S^N and their Lipschitz-Killing curvatures."""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import special as sp

from src.errors import DomainError

BOX = "box"
SPHERE = "sphere"


@dataclass(frozen=True)
class DomainGeometry:
    kind: str
    dim: int
    sides: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in (BOX, SPHERE):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if self.dim < 1:
            raise DomainError(f"dimension must be at least 1, got {self.dim}")
        if self.kind == BOX:
            if len(self.sides) != self.dim:
                raise DomainError(f"box of dimension {self.dim} needs {self.dim} sides")
            if any(not (s > 0) for s in self.sides):
                raise DomainError("box sides must be positive")
        elif self.sides:
            raise DomainError("a sphere carries no side lengths")

    @property
    def volume(self):
        if self.kind == BOX:
            return float(np.prod(self.sides))
        return sphere_area(self.dim)


@dataclass(frozen=True)
class LKCurvatures:
    values: Tuple[float, ...]

    def __getitem__(self, j):
        return self.values[j]

    def __len__(self):
        return len(self.values)


def box(sides):
    sides = tuple(float(s) for s in np.atleast_1d(sides))
    return DomainGeometry(kind=BOX, dim=len(sides), sides=sides)


def sphere(dim):
    return DomainGeometry(kind=SPHERE, dim=int(dim))


def sphere_area(j):
    """omega_j: surface area of the unit j-sphere."""
    if j < 0:
        raise DomainError(f"sphere dimension must be non-negative, got {j}")
    return 2.0 * math.pi ** ((j + 1) / 2.0) / sp.gamma((j + 1) / 2.0)


def lk_box(dim, sides):
    """
    L_j = e_j(b_1, ..., b_N), the elementary symmetric polynomials of the
    side lengths; C(N, j) b^j for a cube.
    """
    sides = [float(s) for s in np.atleast_1d(sides)]
    if len(sides) != dim:
        raise DomainError(f"expected {dim} sides, got {len(sides)}")
    if any(not (s > 0) for s in sides):
        raise DomainError("box sides must be positive")
    # e_j via prod(1 + b_k x) coefficients
    coeffs = [1.0]
    for b in sides:
        nxt = coeffs + [0.0]
        for j in range(len(coeffs), 0, -1):
            nxt[j] += b * coeffs[j - 1]
        coeffs = nxt
    return LKCurvatures(values=tuple(coeffs))


def lk_sphere(dim):
    if dim < 1:
        raise DomainError(f"sphere dimension must be at least 1, got {dim}")
    omega_n = sphere_area(dim)
    values = []
    for j in range(dim + 1):
        if (dim - j) % 2 == 0:
            values.append(2.0 * math.comb(dim, j) * omega_n / sphere_area(dim - j))
        else:
            values.append(0.0)
    return LKCurvatures(values=tuple(values))


def lk_curvatures(geom):
    if geom.kind == BOX:
        return lk_box(geom.dim, geom.sides)
    return lk_sphere(geom.dim)
