import numpy as np
import pytest
from hypothesis import given, strategies as st

from neumannlab.errors import AmbiguousProjection, OutsideTube
from neumannlab.geometry import DomainGeometry, DomainKind, hessian_signed_distance, project, signed_distance

coord = st.floats(-4, 4, allow_nan=False)


def test_signed_distance_unit_disk(unit_disk):
    assert signed_distance(unit_disk, [2.0, 0.0]) == pytest.approx(-1.0)
    assert signed_distance(unit_disk, [0.5, 0.0]) == pytest.approx(0.5)
    assert signed_distance(unit_disk, [1.0, 0.0]) == pytest.approx(0.0, abs=1e-15)


def test_signed_distance_half_space(upper_half):
    assert upper_half.signed_distance([3.0, 2.0]) == pytest.approx(-2.0)
    assert upper_half.signed_distance([3.0, -0.5]) == pytest.approx(0.5)


def test_normals(unit_disk, upper_half):
    np.testing.assert_allclose(unit_disk.outward_normal([1.0, 0.0]), [-1.0, 0.0])
    np.testing.assert_allclose(unit_disk.outward_normal([0.0, 1.2]), [0.0, -1.0])
    np.testing.assert_allclose(upper_half.outward_normal([5.0, 0.0]), [0.0, -1.0])
    ball = DomainGeometry.bounded_ball([0.0, 0.0], 2.0)
    np.testing.assert_allclose(ball.outward_normal([0.0, 2.0]), [0.0, 1.0])


def test_hessian_examples(unit_disk):
    np.testing.assert_allclose(hessian_signed_distance(unit_disk, [1.0, 0.0]), [[0, 0], [0, -1]], atol=1e-15)
    big = DomainGeometry.exterior_disks([[0.0, 0.0]], [2.0])
    np.testing.assert_allclose(big.hessian_signed_distance([2.0, 0.0]), [[0, 0], [0, -0.5]], atol=1e-15)


def test_hessian_matches_finite_differences():
    dom = DomainGeometry.exterior_disks([[0.0, 0.0], [3.0, 1.0]], [1.0, 0.8])
    rng = np.random.default_rng(1)
    k = 1e-5
    for _ in range(20):
        c, r = dom.disks[rng.integers(2)]
        ang = rng.uniform(0, 2 * np.pi)
        x = c + (r + rng.uniform(-0.3, 0.3)) * np.array([np.cos(ang), np.sin(ang)])
        fd = np.empty((2, 2))
        for j, e in enumerate(np.eye(2)):
            fd[:, j] = (dom.outward_normal(x + k * e) - dom.outward_normal(x - k * e)) / (2 * k)
        np.testing.assert_allclose(dom.hessian_signed_distance(x), fd, atol=1e-6)


def test_project_examples(unit_disk):
    # depth 0.5 equals the default tube radius; the widest admissible tube covers it
    wide = DomainGeometry.exterior_disks([[0.0, 0.0]], [1.0], tube_radius=1.0)
    np.testing.assert_allclose(project(wide, [0.5, 0.0]), [1.0, 0.0])
    with pytest.raises(OutsideTube):
        unit_disk.project([0.5, 0.0])
    np.testing.assert_allclose(unit_disk.project([2.0, 1.0]), [2.0, 1.0])
    with pytest.raises(AmbiguousProjection):
        unit_disk.project([0.0, 0.0])


def test_projection_equidistant_between_disks():
    dom = DomainGeometry.exterior_disks([[0.0, 0.0], [1.5, 0.0]], [1.0, 1.0])
    with pytest.raises(AmbiguousProjection):
        dom.project([0.75, 0.0])


def test_outside_tube(unit_disk):
    with pytest.raises(OutsideTube):
        unit_disk.outward_normal([3.0, 0.0])


def test_constructor_validation():
    with pytest.raises(ValueError):
        DomainGeometry.half_space([0.0, 2.0])
    with pytest.raises(ValueError):
        DomainGeometry.exterior_disks([[0.0, 0.0]], [-1.0])
    with pytest.raises(ValueError):
        DomainGeometry.exterior_disks([[0.0, 0.0]], [1.0], tube_radius=2.0)


def test_free_space_everything_feasible():
    dom = DomainGeometry.free_space()
    assert dom.kind == DomainKind.FREE_SPACE
    assert dom.contains([100.0, -3.0])
    np.testing.assert_allclose(dom.project([1.0, 2.0]), [1.0, 2.0])


# -- properties -------------------------------------------------------------

def _brute_boundary_distance(x, c, r, n=20000):
    ang = np.linspace(0, 2 * np.pi, n, endpoint=False)
    pts = c + r * np.stack([np.cos(ang), np.sin(ang)], -1)
    return np.min(np.linalg.norm(pts - x, axis=-1))


@given(coord, coord)
def test_signed_distance_magnitude_is_boundary_distance(x1, x2):
    dom = DomainGeometry.exterior_disks([[0.0, 0.0]], [1.0])
    x = np.array([x1, x2])
    b = float(dom.signed_distance(x))
    assert abs(abs(b) - _brute_boundary_distance(x, np.zeros(2), 1.0)) <= 1e-3


@given(st.floats(0.0, 2 * np.pi), st.floats(-0.45, 0.45))
def test_normal_is_unit_gradient(ang, off):
    dom = DomainGeometry.exterior_disks([[0.5, -0.5]], [1.5])
    x = np.array([0.5, -0.5]) + (1.5 + off) * np.array([np.cos(ang), np.sin(ang)])
    nu = dom.outward_normal(x)
    assert abs(np.linalg.norm(nu) - 1.0) <= 1e-12
    k = 1e-6
    grad = [(dom.signed_distance(x + k * e) - dom.signed_distance(x - k * e)) / (2 * k) for e in np.eye(2)]
    np.testing.assert_allclose(grad, nu, atol=1e-6)


@given(st.floats(0.0, 2 * np.pi), st.floats(-0.45, 0.45))
def test_project_to_boundary_lands_on_boundary(ang, off):
    dom = DomainGeometry.exterior_disks([[0.0, 0.0]], [1.0])
    x = (1.0 + off) * np.array([np.cos(ang), np.sin(ang)])
    y = dom.project_to_boundary(x)
    assert abs(dom.signed_distance(y)) <= 1e-12


@given(st.floats(0.0, 2 * np.pi), st.floats(0.0, 0.45))
def test_projection_is_feasible_and_idempotent(ang, depth):
    dom = DomainGeometry.exterior_disks([[0.0, 0.0]], [1.0])
    x = (1.0 - depth) * np.array([np.cos(ang), np.sin(ang)])
    y = dom.project(x)
    assert dom.signed_distance(y) <= 1e-12
    np.testing.assert_allclose(dom.project(y), y)
