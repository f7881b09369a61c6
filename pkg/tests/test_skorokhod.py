import numpy as np
import pytest
from hypothesis import given, strategies as st

from neumannlab.errors import Infeasible, LeftTube
from neumannlab.geometry import DomainGeometry
from neumannlab.skorokhod import (
    Regime,
    integrate,
    integrate_batch,
    path_from_text,
    path_to_text,
    residuals,
    tangency,
)


def slide(upper_half, dt=1e-3):
    return integrate(upper_half, [0.0, 1.0], [1.0, -1.0], dt, 2.0)


def test_half_plane_descend_then_slide(upper_half):
    path = slide(upper_half)
    np.testing.assert_allclose(path.eta[-1], [2.0, 0.0], atol=2e-3)
    s = path.times[:-1]
    l = path.l[:-1]
    assert np.all(l[s < 1.0 - 1.5e-3] == 0.0)
    np.testing.assert_allclose(l[s > 1.0 + 1.5e-3], 1.0, atol=2e-3)


def test_disk_leaving_boundary(unit_disk):
    path = integrate(unit_disk, [1.0, 0.0], [0.0, 1.0], 1e-3, 1.0)
    np.testing.assert_allclose(path.eta[-1], [1.0, 1.0], atol=2e-3)
    assert np.all(path.l == 0.0)


def test_disk_pinned(unit_disk):
    path = integrate(unit_disk, [1.0, 0.0], [-1.0, 0.0], 1e-3, 1.0)
    np.testing.assert_allclose(path.eta[-1], [1.0, 0.0], atol=1e-6)
    np.testing.assert_allclose(path.l, 1.0, atol=2e-3)
    r = residuals(unit_disk, path)
    assert r.complementarity == 0.0
    assert all(Regime(x) == Regime.SLIDE for x in path.regime)


def test_residual_examples(upper_half):
    path = slide(upper_half)
    r = residuals(upper_half, path)
    assert r.max_feasibility <= 1e-10
    assert r.min_l >= 0
    assert r.complementarity == 0.0
    assert r.max_consistency <= 5 * 1e-3


def test_consistency_defect_scales_with_dt(upper_half):
    """Fit the constant C in defect <= C dt from two step sizes."""
    consts = [residuals(upper_half, slide(upper_half, dt)).consistency_constant for dt in (2e-3, 1e-3)]
    assert max(consts) <= 5.0


def test_order_one_convergence(upper_half):
    def control(s):
        return np.array([np.cos(s), -1.0])

    def exact(s):
        return np.stack([np.sin(s), np.maximum(1.0 - s, 0.0)], axis=-1)

    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        path = integrate(upper_half, [0.0, 1.0], control, dt, 2.0)
        errs.append(np.max(np.linalg.norm(path.eta - exact(path.times), axis=-1)))
    for a, b in zip(errs, errs[1:]):
        assert 1.6 <= a / b <= 2.4


def test_boundary_tangency_on_slide(upper_half):
    assert tangency(upper_half, slide(upper_half)) <= 5e-2


def test_control_forms_agree(unit_disk):
    dt, T = 1e-2, 1.0
    f = integrate(unit_disk, [2.0, 0.0], lambda s: np.array([-1.0, 0.2]), dt, T)
    c = integrate(unit_disk, [2.0, 0.0], [-1.0, 0.2], dt, T)
    a = integrate(unit_disk, [2.0, 0.0], np.tile([-1.0, 0.2], (100, 1)), dt, T)
    np.testing.assert_array_equal(f.eta, c.eta)
    np.testing.assert_array_equal(f.eta, a.eta)


def test_errors(unit_disk):
    with pytest.raises(Infeasible):
        integrate(unit_disk, [0.5, 0.0], [1.0, 0.0], 1e-3, 1.0)
    with pytest.raises(ValueError):
        integrate(unit_disk, [2.0, 0.0], [1.0, 0.0], 0.3, 1.0)
    with pytest.raises(LeftTube):
        integrate(unit_disk, [1.0, 0.0], [-10.0, 0.0], 0.1, 1.0)


def test_text_round_trip(unit_disk):
    path = integrate(unit_disk, [2.0, 0.5], lambda s: np.array([-1.5, np.sin(3 * s)]), 1e-2, 2.0)
    path.p = np.cos(path.eta)
    path.p_bar = np.sin(path.eta)
    back = path_from_text(path_to_text(path))
    for name in ("times", "eta", "v", "l", "p", "p_bar"):
        np.testing.assert_array_equal(getattr(back, name), getattr(path, name))
    assert [Regime(r) for r in back.regime] == [Regime(r) for r in path.regime]


def test_batch_matches_single(unit_disk):
    rng = np.random.default_rng(2)
    controls = rng.uniform(-2, 2, (5, 50, 2))
    eta, l = integrate_batch(unit_disk, [1.5, 0.0], controls, 1e-2)
    for b in range(5):
        path = integrate(unit_disk, [1.5, 0.0], controls[b], 1e-2, 0.5)
        np.testing.assert_array_equal(path.eta, eta[b])
        np.testing.assert_array_equal(path.l[:-1], l[b])


# -- properties -------------------------------------------------------------

controls = st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=20, max_size=20)


@given(controls, st.floats(0, 2 * np.pi))
def test_random_controls_stay_feasible(ctrl, ang):
    dom = DomainGeometry.exterior_disks([[0.0, 0.0], [2.5, 0.5]], [1.0, 0.7])
    x0 = 1.0 * np.array([np.cos(ang), np.sin(ang)])
    if dom.signed_distance(x0) > 1e-10:
        x0 = np.array([-2.0, -2.0])
    path = integrate(dom, x0, np.repeat(np.array(ctrl), 5, axis=0), 1e-2, 1.0)
    r = residuals(dom, path)
    assert r.max_feasibility <= 1e-10
    assert r.min_l >= 0
    assert r.complementarity == 0.0
    assert r.max_consistency <= 1e-9 + 10 * 1e-2 * 3 ** 2


@given(controls)
def test_exact_half_plane_consistency(ctrl):
    """On a flat wall projection removes exactly l dt nu, so the defect is rounding only."""
    dom = DomainGeometry.half_space([0.0, -1.0])
    path = integrate(dom, [0.0, 0.3], np.array(ctrl), 1e-2, 0.2)
    assert residuals(dom, path).max_consistency <= 1e-9
