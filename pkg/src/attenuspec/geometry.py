"""Ball measurement geometry: detector sphere, interior source grid, bisection circles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BallGeometry",
    "BoundaryQuadrature",
    "InteriorGrid",
    "BisectionCircle",
    "GeometryError",
    "sphere_quadrature",
    "interior_grid",
    "bisection_circle",
    "pairwise_distances",
]


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class BallGeometry:
    """Sphere of radius ``R`` around ``center``; sources live at distance ``> eps`` from it."""

    R: float = 1.0
    eps: float = 0.2
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.R > 0:
            raise GeometryError(f"R must be positive, got {self.R}")
        if not 0 < self.eps < self.R:
            raise GeometryError(f"eps must lie in (0, R), got {self.eps}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center)

    @property
    def inner_radius(self) -> float:
        return self.R - self.eps

    @property
    def diameter(self) -> float:
        return 2 * self.R


@dataclass(frozen=True)
class BoundaryQuadrature:
    points: np.ndarray   # (n, 3)
    weights: np.ndarray  # (n,)

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.points)))


@dataclass(frozen=True)
class InteriorGrid:
    points: np.ndarray
    weights: np.ndarray
    h: float

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True)
class BisectionCircle:
    center: np.ndarray
    radius: float
    normal: np.ndarray


def sphere_quadrature(geom: BallGeometry, n: int) -> BoundaryQuadrature:
    """Fibonacci spiral nodes with equal area weights ``4 pi R^2 / n``."""
    if n < 16:
        raise GeometryError(f"need at least 16 boundary nodes, got {n}")
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = math.pi * (3 - math.sqrt(5)) * k
    r = np.sqrt(1 - z * z)
    unit = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    unit /= np.linalg.norm(unit, axis=1, keepdims=True)
    pts = geom.c + geom.R * unit
    return BoundaryQuadrature(pts, np.full(n, 4 * math.pi * geom.R**2 / n))


def interior_grid(geom: BallGeometry, h: float) -> InteriorGrid:
    """Cubic lattice through the center with spacing ``h``, clipped to ``|x - center| < R - eps``."""
    rin = geom.inner_radius
    if not 0 < h:
        raise GeometryError("h must be positive")
    n = int(math.floor(rin / h))
    axis = h * np.arange(-n, n + 1)
    X, Y, Z = np.meshgrid(axis, axis, axis, indexing="ij")
    offs = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    keep = np.linalg.norm(offs, axis=1) < rin
    if not np.any(keep):
        raise GeometryError("interior grid is empty")
    pts = geom.c + offs[keep]
    return InteriorGrid(pts, np.full(len(pts), h**3), float(h))


def bisection_circle(geom: BallGeometry, x, y) -> BisectionCircle:
    """Intersection of the sphere with the plane of points equidistant from ``x`` and ``y``.

    The normal is ``(x - y)/|x - y|``.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    diff = x - y
    dist = np.linalg.norm(diff)
    if dist == 0:
        raise GeometryError("x and y coincide; the bisection plane is undefined")
    nrm = diff / dist
    mid = (x + y) / 2
    d = float(np.dot(mid - geom.c, nrm))
    if abs(d) >= geom.R:
        raise GeometryError("bisection plane misses the sphere")
    return BisectionCircle(geom.c + d * nrm, math.sqrt(geom.R**2 - d * d), nrm)


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix between the rows of ``a`` and ``b``."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
