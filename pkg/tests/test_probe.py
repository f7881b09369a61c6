import numpy as np
import pytest
from hypothesis import given, strategies as st

from neumannlab import geodesic as geo
from neumannlab.acceptance import disk_u
from neumannlab.action import Constant, zero
from neumannlab.errors import DomainError, Infeasible, InsufficientData
from neumannlab.hamiltonian import quadratic, scaled_quadratic
from neumannlab.probe import (
    BOUNDARY_MINUS,
    BOUNDARY_PLUS,
    INTERIOR,
    fit_exponent,
    location_class,
    log_h_values,
    one_sided_second_difference,
    pde_residual,
    report_to_text,
    second_difference,
    semiconcavity_report,
)

HS = log_h_values(1e-2, 1e-4, 9)


def power(x, t):
    return np.abs(np.asarray(x)[..., 0]) ** 1.5


def affine(a, b, c):
    return lambda x, t: a * np.asarray(x)[..., 0] + b * np.asarray(x)[..., 1] + c * t


def test_second_difference_examples():
    assert second_difference(power, [0.0, 0.0], [1.0, 0.0], 0.01, 1.0) == pytest.approx(2e-3, rel=1e-12)
    assert second_difference(affine(2.0, -1.0, 0.0), [0.3, 0.4], [0.6, 0.8], 0.1, 1.0) == pytest.approx(0, abs=1e-14)


def test_interior_disk_second_difference():
    x = 2.0 * np.array([np.cos(0.3), np.sin(0.3)])
    h = 0.01
    d2 = second_difference(disk_u, x, x, h, 1.0)
    assert float(geo.disk_urr(2.0)) == pytest.approx(0.144338, abs=1e-6)
    assert d2 == pytest.approx(0.144338 * h * h, abs=5 * h ** 3)


def test_one_sided_examples():
    q = 0.7
    quad = lambda x, t: q * np.asarray(x)[..., 0] ** 2
    h = 0.01
    assert one_sided_second_difference(quad, [0.2, 0.0], [1.0, 0.0], h, 1.0) == pytest.approx(2 * q * h * h, rel=1e-9)
    assert one_sided_second_difference(affine(1.0, 1.0, 1.0), [0.2, 0.0], [1.0, 0.0], h, 1.0) == pytest.approx(0, abs=1e-15)
    c = (8 - 4 * np.sqrt(2)) / 3
    assert c == pytest.approx(0.781049, abs=1e-6)
    d2 = one_sided_second_difference(disk_u, [1.0, 0.0], [1.0, 0.0], 1e-4, 1.0)
    assert d2 / 1e-4 ** 1.5 == pytest.approx(c, rel=5e-2)


def test_fit_examples():
    h = np.geomspace(1e-1, 1e-3, 7)
    fit = fit_exponent(h, 2 * h ** 1.5)
    assert fit.slope == pytest.approx(1.5, abs=1e-12)
    assert fit.coefficient == pytest.approx(2.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    d2 = [one_sided_second_difference(disk_u, [1.0, 0.0], [1.0, 0.0], hh, 1.0) for hh in HS]
    fit = fit_exponent(HS, d2)
    assert fit.slope == pytest.approx(1.5, abs=0.02)
    assert fit.coefficient == pytest.approx(0.781049, rel=0.05)
    x = 2.0 * np.array([np.cos(0.3), np.sin(0.3)])
    fit = fit_exponent(HS, [second_difference(disk_u, x, x, hh, 1.0) for hh in HS])
    assert fit.slope == pytest.approx(2.0, abs=0.05)
    assert fit.coefficient == pytest.approx(float(geo.disk_urr(2.0)), rel=0.1)


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("a", [1.0, 1.5, 2.0])
def test_fit_exact_on_power_laws(c, a):
    h = np.geomspace(1e-1, 1e-4, 10)
    fit = fit_exponent(h, c * h ** a)
    assert fit.slope == pytest.approx(a, abs=1e-10)
    assert fit.coefficient == pytest.approx(c, abs=1e-10)


def test_fit_rejects_bad_samples():
    with pytest.raises(InsufficientData):
        fit_exponent([1e-1, 1e-2, 1e-3, 1e-4], [1, 1, 1, 1])
    with pytest.raises(InsufficientData):
        fit_exponent(np.geomspace(1e-4, 1e-1, 6), np.ones(6))
    with pytest.raises(InsufficientData):
        fit_exponent(np.geomspace(1e-2, 1e-3, 6), np.ones(6))


def test_fit_concave_and_noise_floor():
    h = np.geomspace(1e-1, 1e-3, 6)
    fit = fit_exponent(h, -h)
    assert fit.concave_flag and not fit.has_fit
    fit = fit_exponent(h, np.where(h > 2e-3, h ** 2, 1e-20), noise_floor=1e-12)
    assert fit.slope == pytest.approx(2.0, abs=1e-12)


def test_low_r_squared_warns(caplog):
    h = np.geomspace(1e-1, 1e-3, 6)
    fit_exponent(h, h ** 2 * (1 + 0.9 * np.array([1, -1, 1, -1, 1, -1])))
    assert "r^2" in caplog.text


def test_probe_errors(unit_disk):
    with pytest.raises(Infeasible):
        second_difference(disk_u, [1.0, 0.0], [1.0, 0.0], 0.01, 1.0, dom=unit_disk)
    with pytest.raises(Infeasible):
        one_sided_second_difference(disk_u, [1.0, 0.0], [-1.0, 0.0], 0.01, 1.0, dom=unit_disk)
    with pytest.raises(DomainError):
        second_difference(disk_u, [3.0, 0.0], [1.0, 0.0], 0.01, 0.5, sigma=0.5)


def test_pde_residual_examples():
    rng = np.random.default_rng(8)
    pts = rng.uniform(-3, 3, (4000, 2))
    pts = pts[geo.disk_seam_distance(pts) > 1e-2][:1000]
    assert pde_residual(disk_u, scaled_quadratic(), pts, 1.0, 1e-4) <= 1e-6
    lin = lambda x, t: 2.0 - t + np.asarray(x)[..., 0]
    assert pde_residual(lin, scaled_quadratic(), pts, 1.0, 1e-4) <= 1e-10
    a = np.array([1.0, -0.5])
    hopf_lax = lambda x, t: np.asarray(x) @ a + 2.0 - t * 0.5 * (a @ a)
    assert pde_residual(hopf_lax, quadratic(), pts, 1.0, 1e-4) <= 1e-8


def test_location_classes(unit_disk):
    assert location_class(unit_disk, zero(), [2.0, 0.0]) == INTERIOR
    assert location_class(unit_disk, zero(), [1.0, 0.0]) == BOUNDARY_PLUS
    assert location_class(unit_disk, Constant(-1.0), [1.0, 0.0]) == BOUNDARY_MINUS


def test_report_examples(unit_disk):
    x_in = 2.0 * np.array([np.cos(0.3), np.sin(0.3)])
    rows = semiconcavity_report(disk_u, unit_disk, zero(), [[1.0, 0.0]], [[1.0, 0.0]], 1.0)
    assert rows[0].one_sided and rows[0].location == BOUNDARY_PLUS
    assert rows[0].fit.slope == pytest.approx(1.5, abs=0.02)
    rows = semiconcavity_report(disk_u, unit_disk, zero(), [x_in], [x_in], 1.0)
    assert not rows[0].one_sided and rows[0].fit.slope == pytest.approx(2.0, abs=0.05)
    toy = lambda x, t: -np.abs(np.asarray(x)[..., 0])
    free = unit_disk.free_space()
    rows = semiconcavity_report(toy, free, zero(), [[0.0, 0.0]], [[1.0, 0.0]], 1.0)
    assert rows[0].fit.concave_flag


def test_report_rows_record_failures(unit_disk):
    rows = semiconcavity_report(disk_u, unit_disk, Constant(-1.0), [[1.0, 0.0]], [[-1.0, 0.0]], 1.0)
    assert rows[0].fit is None and rows[0].error
    assert rows[0].claim == "unclaimed"
    text = report_to_text(rows)
    assert text.splitlines()[0].split("\t") == ["x", "y", "class", "direction", "slope", "coefficient", "r2",
                                                "concave_flag"]
    assert "boundary-" in text.splitlines()[1]


def test_space_time_coupled_probe(unit_disk):
    x = np.array([3.0, 2.0])
    rows = semiconcavity_report(disk_u, unit_disk, zero(), [x], [[1.0, 0.0]], 1.0, sigma_coupled=True)
    # u is affine in the free region, so every coupled difference vanishes
    assert np.max(np.abs(rows[0].fit.d2_values)) <= 1e-13


# -- properties -------------------------------------------------------------

@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(1e-3, 1.0),
       st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 2 * np.pi))
def test_affine_second_differences_vanish(a, b, c, h, x1, x2, ang):
    u = affine(a, b, c)
    e = [np.cos(ang), np.sin(ang)]
    assert abs(second_difference(u, [x1, x2], e, h, 3.0, sigma=0.5 * h)) <= 1e-12
    assert abs(one_sided_second_difference(u, [x1, x2], e, h, 3.0)) <= 1e-12


def test_boundary_slopes_never_beat_three_halves(unit_disk):
    """On the boundary (g = 0) every fitted rate is at least 3/2."""
    slopes = []
    for ang in np.linspace(-np.pi, np.pi, 25, endpoint=False):
        p = np.array([np.cos(ang), np.sin(ang)])
        tau = np.array([-p[1], p[0]])
        for row in semiconcavity_report(disk_u, unit_disk, zero(), [p], [p, tau], 1.0, noise_floor=1e-10):
            if row.fit is not None and row.fit.has_fit:
                slopes.append(row.fit.slope)
    assert len(slopes) >= 10
    assert min(slopes) >= 1.5 - 0.05
