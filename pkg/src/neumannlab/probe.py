"""Second differences, power-law fits and PDE residuals of value functions.

Value sources are callables ``u(x, t)`` taking points of shape ``(..., 2)``.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, Infeasible, InsufficientData
from .geometry import DomainGeometry, DomainKind

logger = logging.getLogger(__name__)

R2_WARN = 0.999
FEAS_TOL = 1e-12


def _check_points(dom: Optional[DomainGeometry], *pts):
    if dom is None or dom.kind == DomainKind.FREE_SPACE:
        return
    for p in pts:
        if np.any(dom.signed_distance(p) > FEAS_TOL):
            raise Infeasible(f"probe point {np.asarray(p).tolist()} leaves the closed domain")


def _unit(e):
    e = np.asarray(e, dtype=float)
    return e / np.linalg.norm(e)


def second_difference(u_eval: Callable, x, e, h: float, t: float, sigma: float = 0.0,
                      dom: Optional[DomainGeometry] = None) -> float:
    """u(x + h e, t + sigma) + u(x - h e, t - sigma) - 2 u(x, t)."""
    x = np.asarray(x, dtype=float)
    e = _unit(e)
    if not t - sigma > 0:
        raise DomainError("need t - sigma > 0")
    xp, xm = x + h * e, x - h * e
    _check_points(dom, x, xp, xm)
    return float(u_eval(xp, t + sigma) + u_eval(xm, t - sigma) - 2.0 * u_eval(x, t))


def one_sided_second_difference(u_eval: Callable, x, e, h: float, t: float,
                                dom: Optional[DomainGeometry] = None) -> float:
    """u(x + 2 h e) + u(x) - 2 u(x + h e) at time t."""
    x = np.asarray(x, dtype=float)
    e = _unit(e)
    x1, x2 = x + h * e, x + 2 * h * e
    _check_points(dom, x, x1, x2)
    return float(u_eval(x2, t) + u_eval(x, t) - 2.0 * u_eval(x1, t))


@dataclass
class ExponentFit:
    direction: np.ndarray
    h_values: np.ndarray
    d2_values: np.ndarray
    slope: float
    coefficient: float
    r_squared: float
    concave_flag: bool

    @property
    def has_fit(self) -> bool:
        return bool(np.isfinite(self.slope))


def fit_exponent(h_values, d2_values, direction=(1.0, 0.0), noise_floor: float = 0.0) -> ExponentFit:
    """Least-squares fit d2 ~ c h^a over the samples with d2 above ``noise_floor``."""
    h = np.asarray(h_values, dtype=float)
    d2 = np.asarray(d2_values, dtype=float)
    if h.shape != d2.shape or h.ndim != 1:
        raise InsufficientData("h and d2 must be 1-D of equal length")
    if len(h) < 5:
        raise InsufficientData(f"need at least 5 samples, got {len(h)}")
    if np.any(h <= 0) or np.any(np.diff(h) >= 0):
        raise InsufficientData("h values must be positive and strictly decreasing")
    if np.log10(h[0] / h[-1]) < 1.5 - 1e-12:
        raise InsufficientData("h values must span at least 1.5 decades")
    pos = d2 > noise_floor
    concave = bool(np.all(d2 <= 0))
    slope = coef = r2 = float("nan")
    if pos.sum() >= 3:
        lx, ly = np.log(h[pos]), np.log(d2[pos])
        A = np.stack([lx, np.ones_like(lx)], axis=1)
        (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
        resid = ly - A @ np.array([slope, intercept])
        ss_tot = float(np.sum((ly - ly.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
        coef = float(np.exp(intercept))
        slope = float(slope)
        if r2 < R2_WARN:
            logger.warning("power-law fit has r^2 = %.5f < %.3f; the modulus may not be a pure power",
                           r2, R2_WARN)
    return ExponentFit(np.asarray(direction, dtype=float), h, d2, slope, coef, r2, concave)


def log_h_values(h_max: float, h_min: float, n: int) -> np.ndarray:
    return np.geomspace(h_max, h_min, n)


def pde_residual(u_eval: Callable, model, points, t: float, fd_step: float) -> float:
    """max over points of |u_t + H(x, Du)| with centered differences."""
    x = np.asarray(points, dtype=float).reshape(-1, 2)
    k = fd_step
    ut = (u_eval(x, t + k) - u_eval(x, t - k)) / (2 * k)
    ex, ey = np.array([k, 0.0]), np.array([0.0, k])
    du = np.stack([(u_eval(x + ex, t) - u_eval(x - ex, t)) / (2 * k),
                   (u_eval(x + ey, t) - u_eval(x - ey, t)) / (2 * k)], axis=-1)
    return float(np.max(np.abs(ut + model.eval(x, du))))


# -- report ------------------------------------------------------------------

INTERIOR = "interior"
BOUNDARY_PLUS = "boundary+"
BOUNDARY_MINUS = "boundary-"


def location_class(dom: DomainGeometry, g, x, tol: float = 1e-9) -> str:
    b = float(dom.signed_distance(x))
    if b < -tol:
        return INTERIOR
    return BOUNDARY_PLUS if float(g(np.asarray(x, dtype=float))) >= 0 else BOUNDARY_MINUS


@dataclass
class ProbeRow:
    point: np.ndarray
    location: str
    fit: Optional[ExponentFit]
    one_sided: bool
    error: Optional[str] = None

    @property
    def claim(self) -> str:
        return "unclaimed" if self.location == BOUNDARY_MINUS else "claimed"


def semiconcavity_report(u_eval: Callable, dom: DomainGeometry, g, points: Sequence, directions: Sequence,
                         t: float, h_values=None, sigma_coupled: bool = False,
                         noise_floor: float = 0.0) -> list:
    """One power-law fit per (point, direction).

    Boundary points are probed one-sidedly along the given direction, which
    must point into the domain; interior points use centered differences,
    with sigma = h when ``sigma_coupled``.
    """
    if h_values is None:
        h_values = log_h_values(1e-2, 1e-4, 9)
    rows = []
    for x in points:
        x = np.asarray(x, dtype=float)
        loc = location_class(dom, g, x)
        for e in directions:
            e = _unit(e)
            one_sided = loc != INTERIOR
            try:
                if one_sided:
                    d2 = [one_sided_second_difference(u_eval, x, e, h, t, dom) for h in h_values]
                else:
                    d2 = [second_difference(u_eval, x, e, h, t, h if sigma_coupled else 0.0, dom)
                          for h in h_values]
                rows.append(ProbeRow(x, loc, fit_exponent(h_values, d2, e, noise_floor), one_sided))
            except (Infeasible, InsufficientData, DomainError) as exc:
                rows.append(ProbeRow(x, loc, None, one_sided, error=str(exc)))
    return rows


def report_to_text(rows: list) -> str:
    buf = io.StringIO()
    buf.write("x\ty\tclass\tdirection\tslope\tcoefficient\tr2\tconcave_flag\n")
    for row in rows:
        d = row.fit.direction if row.fit is not None else np.full(2, np.nan)
        cells = [f"{row.point[0]:.17g}", f"{row.point[1]:.17g}", row.location, f"{d[0]:.6g},{d[1]:.6g}"]
        if row.fit is None:
            cells += ["nan", "nan", "nan", "false"]
        else:
            cells += [f"{row.fit.slope:.17g}", f"{row.fit.coefficient:.17g}", f"{row.fit.r_squared:.17g}",
                      str(row.fit.concave_flag).lower()]
        buf.write("\t".join(cells) + "\n")
    return buf.getvalue()
