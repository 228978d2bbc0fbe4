import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attenuspec.geometry import (
    BallGeometry,
    GeometryError,
    bisection_circle,
    interior_grid,
    pairwise_distances,
    sphere_quadrature,
)


def test_sphere_weights_sum():
    q = sphere_quadrature(BallGeometry(1.0, 0.2), 1000)
    assert abs(q.weights.sum() - 4 * math.pi) <= 1e-12 * 4 * math.pi
    assert q.integrate(lambda p: np.ones(len(p))) == pytest.approx(4 * math.pi, rel=1e-12)


def test_sphere_nodes_on_sphere():
    g = BallGeometry(2.5, 0.3, (1.0, -2.0, 0.5))
    q = sphere_quadrature(g, 777)
    assert np.allclose(np.linalg.norm(q.points - g.c, axis=1), 2.5, rtol=0, atol=1e-12)
    assert q.weights.sum() == pytest.approx(4 * math.pi * 2.5**2, rel=1e-6)


def test_sphere_second_moment():
    q = sphere_quadrature(BallGeometry(), 2000)
    assert q.integrate(lambda p: p[:, 2] ** 2) == pytest.approx(4 * math.pi / 3, abs=1e-3)


def test_sphere_too_few_nodes():
    with pytest.raises(GeometryError):
        sphere_quadrature(BallGeometry(), 15)


# spherical harmonics up to degree 4 integrate to zero (except the constant)
_HARMONICS = [
    lambda p: p[:, 0],
    lambda p: p[:, 0] * p[:, 1],
    lambda p: 3 * p[:, 2] ** 2 - 1,
    lambda p: p[:, 2] * (5 * p[:, 2] ** 2 - 3),
    lambda p: 35 * p[:, 2] ** 4 - 30 * p[:, 2] ** 2 + 3,
]


@pytest.mark.parametrize("f", _HARMONICS)
def test_sphere_harmonics_converge(f):
    errs = [abs(sphere_quadrature(BallGeometry(), n).integrate(f)) for n in (100, 1000, 10000)]
    assert errs[2] < errs[0]
    assert errs[2] < 1e-2


def test_interior_clipping_and_volume():
    g = BallGeometry(1.0, 0.2)
    grid = interior_grid(g, 0.1)
    assert np.all(np.linalg.norm(grid.points, axis=1) < 0.8)
    vol = 4 / 3 * math.pi * 0.8**3
    assert grid.weights.sum() == pytest.approx(vol, rel=0.02)
    assert vol == pytest.approx(2.1447, abs=1e-4)


def test_interior_coarse_keeps_center():
    g = BallGeometry(1.0, 0.2)
    grid = interior_grid(g, 0.9 * 0.8)
    assert len(grid) >= 1
    assert np.any(np.all(grid.points == 0, axis=1))


def test_interior_distance_to_sphere():
    g = BallGeometry(1.0, 0.2)
    q = sphere_quadrature(g, 512)
    grid = interior_grid(g, 0.125)
    assert pairwise_distances(q.points, grid.points).min() >= g.eps


def test_bisection_equator():
    c = bisection_circle(BallGeometry(), [0, 0, 0.5], [0, 0, -0.5])
    assert np.allclose(c.center, 0)
    assert c.radius == pytest.approx(1.0)
    assert np.allclose(c.normal, [0, 0, 1])


def test_bisection_off_center():
    c = bisection_circle(BallGeometry(), [0, 0, 0.4], [0, 0, 0.2])
    assert np.allclose(c.center, [0, 0, 0.3])
    assert c.radius == pytest.approx(math.sqrt(1 - 0.09), abs=1e-12)
    assert c.radius == pytest.approx(0.953939, abs=1e-6)


def test_bisection_translation():
    shift = np.array([3.0, -1.0, 2.0])
    a = bisection_circle(BallGeometry(), [0.1, 0.2, 0.3], [-0.2, 0.0, 0.1])
    b = bisection_circle(BallGeometry(center=tuple(shift)), shift + [0.1, 0.2, 0.3], shift + [-0.2, 0.0, 0.1])
    assert np.allclose(b.center - a.center, shift)
    assert b.radius == pytest.approx(a.radius)


def test_bisection_degenerate():
    with pytest.raises(GeometryError):
        bisection_circle(BallGeometry(), [0.1, 0, 0], [0.1, 0, 0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-0.45, 0.45), min_size=6, max_size=6))
def test_bisection_circle_lies_on_sphere_and_plane(coords):
    x, y = np.array(coords[:3]), np.array(coords[3:])
    if np.linalg.norm(x - y) < 1e-6:
        return
    c = bisection_circle(BallGeometry(), x, y)
    # two orthonormal directions in the plane
    u = np.cross(c.normal, [1.0, 0, 0] if abs(c.normal[0]) < 0.9 else [0, 1.0, 0])
    u /= np.linalg.norm(u)
    v = np.cross(c.normal, u)
    for phi in np.linspace(0, 2 * np.pi, 7):
        p = c.center + c.radius * (np.cos(phi) * u + np.sin(phi) * v)
        assert abs(np.linalg.norm(p) - 1) < 1e-12
        assert abs(np.dot(p - (x + y) / 2, y - x)) < 1e-12


def test_geometry_validation():
    with pytest.raises(GeometryError):
        BallGeometry(1.0, 1.0)
    with pytest.raises(GeometryError):
        BallGeometry(-1.0, 0.1)
