"""Reflected Hamiltonian dynamics with regime switching.

Three vector fields share one stepping loop:

* interior: eta' = -D_pH, p' = D_xH;
* active reflection (l > 0): eta moves tangentially, the normal momentum is
  pinned by p . nu = g, and l = -D_pH . nu;
* vanishing reflection (l = 0 on the boundary): eta' = -D_pH stays tangent and
  a normal force lambda nu in p' keeps it so.

All states are advanced with the explicit midpoint rule. Boundary regimes are
followed by a projection of eta onto the boundary and of p onto the regime's
constraint.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .action import ProblemData, SolverParams, ValueEstimate, minimize_value, momentum
from .errors import Infeasible, NewtonFailure, RegimeChatter
from .geometry import DomainKind
from .skorokhod import ReflectedPath, Regime, boundary_band

logger = logging.getLogger(__name__)

EVENT_TOL = 1e-10
CONTACT_TOL = 1e-9


@dataclass
class FlowState:
    eta: np.ndarray
    p: np.ndarray
    regime: Regime
    s: float


# -- vector fields ------------------------------------------------------------

def _interior_field(data: ProblemData, eta, p):
    m = data.model
    return -m.grad_p(eta, p), m.grad_x(eta, p)


def _slide_field(data: ProblemData, eta, p):
    m, dom = data.model, data.dom
    w = m.grad_p(eta, p)
    hx = m.grad_x(eta, p)
    nu = dom.outward_normal(eta)
    dnu = dom.hessian_signed_distance(eta)
    dg = data.g.grad(eta)
    a = w @ nu
    deta = -w + a * nu
    dp = hx - a * (dnu @ p) + a * dg - (hx @ nu - (dnu @ w) @ p + dg @ w) * nu
    return deta, dp


def _lzero_multiplier(data: ProblemData, eta, p):
    m, dom = data.model, data.dom
    w = m.grad_p(eta, p)
    hx = m.grad_x(eta, p)
    nu = dom.outward_normal(eta)
    dnu = dom.hessian_signed_distance(eta)
    hpp = m.hess_pp(eta, p)
    hpx = m.hess_px(eta, p)
    hx_tan = hx - (hx @ nu) * nu
    num = (hpx @ w) @ nu - (hpp @ hx_tan) @ nu + w @ (dnu @ w)
    return num / (nu @ hpp @ nu), w, hx_tan, nu


def _lzero_field(data: ProblemData, eta, p):
    lam, w, hx_tan, nu = _lzero_multiplier(data, eta, p)
    return -w, hx_tan + lam * nu


_FIELDS = {
    Regime.INTERIOR: _interior_field,
    Regime.SLIDE: _slide_field,
    Regime.LZERO: _lzero_field,
}


def _midpoint(data, regime, eta, p, h):
    f = _FIELDS[regime]
    k1e, k1p = f(data, eta, p)
    k2e, k2p = f(data, eta + 0.5 * h * k1e, p + 0.5 * h * k1p)
    return eta + h * k2e, p + h * k2p


# -- constraint projections ---------------------------------------------------

def _reset_normal_momentum(data: ProblemData, eta, p):
    nu = data.dom.outward_normal(eta)
    return p + (float(data.g(eta)) - p @ nu) * nu


def _tangency_solve(data: ProblemData, eta, p, max_iter=50, tol=1e-13):
    """Replace the normal part of p by the q with D_pH(eta, p_tau + q nu) . nu = 0."""
    m = data.model
    nu = data.dom.outward_normal(eta)
    q = p @ nu
    p_tau = p - q * nu
    for _ in range(max_iter):
        trial = p_tau + q * nu
        F = m.grad_p(eta, trial) @ nu
        if abs(F) <= tol:
            return trial
        dF = nu @ m.hess_pp(eta, trial) @ nu
        if not dF > 0:
            raise NewtonFailure("nonpositive normal curvature of H in the tangency solve")
        q -= F / dF
    trial = p_tau + q * nu
    if abs(m.grad_p(eta, trial) @ nu) > 1e-10:
        raise NewtonFailure("tangency solve did not converge")
    return trial


def _finish_step(data, regime, eta, p):
    if regime == Regime.INTERIOR:
        return eta, p
    eta = data.dom.project_to_boundary(eta)
    if regime == Regime.SLIDE:
        return eta, _reset_normal_momentum(data, eta, p)
    return eta, _tangency_solve(data, eta, p)


def _classify_contact(data, eta, p, eps_l):
    """Regime entered at a boundary point, with the adjusted state."""
    nu = data.dom.outward_normal(eta)
    l_hat = -(data.model.grad_p(eta, p) @ nu)
    if l_hat > eps_l:
        return Regime.SLIDE, _reset_normal_momentum(data, eta, p)
    if l_hat < -eps_l:
        return Regime.INTERIOR, p
    return Regime.LZERO, _tangency_solve(data, eta, p)


def _after_boundary_step(data, regime, eta, p, eps_l):
    """Leave the boundary when the interior field points strictly inward."""
    nu = data.dom.outward_normal(eta)
    w_nu = data.model.grad_p(eta, p) @ nu
    if regime == Regime.SLIDE and -w_nu <= eps_l:
        return Regime.INTERIOR if -w_nu < -eps_l else Regime.LZERO
    return regime


# -- integrator ---------------------------------------------------------------

def _interior_step_with_event(data, eta, p, h, eps_l):
    """One interior step; on crossing the boundary, locate the contact and finish the step there."""
    dom = data.dom
    eta1, p1 = _midpoint(data, Regime.INTERIOR, eta, p, h)
    if dom.kind == DomainKind.FREE_SPACE or dom.signed_distance(eta1) <= 0:
        return eta1, p1, Regime.INTERIOR, False
    lo, hi = 0.0, 1.0
    while (hi - lo) * h > EVENT_TOL:
        mid = 0.5 * (lo + hi)
        e_mid, _ = _midpoint(data, Regime.INTERIOR, eta, p, mid * h)
        if dom.signed_distance(e_mid) > 0:
            hi = mid
        else:
            lo = mid
    e_c, p_c = _midpoint(data, Regime.INTERIOR, eta, p, hi * h)
    e_c = dom.project_to_boundary(e_c)
    regime, p_c = _classify_contact(data, e_c, p_c, eps_l)
    rest = (1.0 - hi) * h
    if rest > 0:
        e_c, p_c = _midpoint(data, regime, e_c, p_c, rest)
        e_c, p_c = _finish_step(data, regime, e_c, p_c)
    return e_c, p_c, regime, True


def flow(data: ProblemData, x0, p0, dt: float, T: float, eps_l: float = 1e-6,
         max_switches: int = 1000) -> ReflectedPath:
    """Integrate the reflected Hamiltonian system from (x0, p0) on [0, T]."""
    dom, model = data.dom, data.model
    eta = np.asarray(x0, dtype=float).copy()
    p = np.asarray(p0, dtype=float).copy()
    b0 = dom.signed_distance(eta)
    if b0 > 1e-10:
        raise Infeasible(f"start point {eta} lies outside the closed domain")
    # a horizon that is not a multiple of dt is covered by slightly shorter uniform steps
    N = max(1, int(np.ceil(T / dt - 1e-9)))
    dt = T / N
    band = boundary_band(dt, float(np.linalg.norm(model.grad_p(eta, p))))

    regime = Regime.INTERIOR
    if dom.kind != DomainKind.FREE_SPACE and b0 >= -band:
        e_c = dom.project_to_boundary(eta)
        regime, p_c = _classify_contact(data, e_c, p, eps_l)
        if regime != Regime.INTERIOR:
            eta, p = e_c, p_c

    etas, ps, regimes = [eta], [p], [regime]
    switches = 0
    for _ in range(N):
        prev = regime
        if regime == Regime.INTERIOR:
            eta, p, regime, _ = _interior_step_with_event(data, eta, p, dt, eps_l)
        else:
            eta, p = _midpoint(data, regime, eta, p, dt)
            eta, p = _finish_step(data, regime, eta, p)
            regime = _after_boundary_step(data, regime, eta, p, eps_l)
            if regime == Regime.LZERO and prev == Regime.SLIDE:
                p = _tangency_solve(data, eta, p)
        if regime != prev:
            switches += 1
            if switches > max_switches:
                raise RegimeChatter(f"more than {max_switches} regime changes")
        etas.append(eta)
        ps.append(p)
        regimes.append(regime)

    etas = np.array(etas)
    ps = np.array(ps)
    w = np.asarray(model.grad_p(etas, ps), dtype=float)
    l = np.zeros(N + 1)
    p_bar = ps.copy()
    on_boundary = np.array([r != Regime.INTERIOR for r in regimes])
    if np.any(on_boundary):
        nu = dom.outward_normal(etas[on_boundary])
        slide = np.array([r == Regime.SLIDE for r in regimes])
        l[slide] = -np.sum(w[slide] * dom.outward_normal(etas[slide]), axis=-1) if np.any(slide) else 0.0
        pb = ps[on_boundary]
        p_bar[on_boundary] = pb - np.sum(pb * nu, axis=-1, keepdims=True) * nu
    path = ReflectedPath(dt * np.arange(N + 1), etas, -w, l, regimes, p=ps, p_bar=p_bar)
    path.meta.update(dt=dt, band=band, switches=switches, eps_l=eps_l)
    return path


# -- diagnostics --------------------------------------------------------------

@dataclass
class ModeDiagnostics:
    constraint: float
    tangency: float
    l_identity: float


def mode_diagnostics(data: ProblemData, path: ReflectedPath, eps_l: float = 1e-6,
                     contact_tol: float = CONTACT_TOL) -> ModeDiagnostics:
    """Residuals of p.nu = g on l > 0 samples, nu.eta' and l + D_pH.nu on boundary samples.

    The tangency check uses only samples in contact whose neighbours are also
    in contact, since the centered difference straddling an attachment is not
    a boundary velocity.
    """
    dom = data.dom
    boundary = np.array([Regime(r) != Regime.INTERIOR for r in path.regime])
    if dom.kind == DomainKind.FREE_SPACE or not np.any(boundary):
        return ModeDiagnostics(0.0, 0.0, 0.0)
    eta = path.eta
    nu = np.zeros_like(eta)
    nu[boundary] = dom.outward_normal(eta[boundary])

    constraint = 0.0
    slide = boundary & (path.l > eps_l)
    if path.p is not None and np.any(slide):
        gv = np.broadcast_to(data.g(eta[slide]), (int(slide.sum()),))
        constraint = float(np.max(np.abs(np.sum(path.p[slide] * nu[slide], axis=-1) - gv)))

    tangency = 0.0
    if len(eta) >= 3:
        contact = np.abs(dom.signed_distance(eta)) <= contact_tol
        inner = np.zeros(len(eta), dtype=bool)
        inner[1:-1] = boundary[1:-1] & contact[1:-1] & contact[:-2] & contact[2:]
        if np.any(inner):
            eta_dot = np.gradient(eta, path.times, axis=0)
            tangency = float(np.max(np.abs(np.sum(eta_dot[inner] * nu[inner], axis=-1))))

    l_identity = 0.0
    if path.p is not None:
        w = np.asarray(data.model.grad_p(eta[boundary], path.p[boundary]), dtype=float)
        l_identity = float(np.max(np.abs(path.l[boundary] + np.sum(w * nu[boundary], axis=-1))))
    return ModeDiagnostics(constraint, tangency, l_identity)


@dataclass
class FlowComparison:
    sup_distance: float
    momentum_distance: float
    estimate: ValueEstimate
    flow_path: ReflectedPath


def compare_with_minimizer(data: ProblemData, x, t: float, params: Optional[SolverParams] = None,
                           eps_l: float = 1e-6) -> FlowComparison:
    """Run the flow from (x, p_bar(0)) of the located minimizer and compare trajectories."""
    params = params or SolverParams()
    est = minimize_value(data, x, t, params)
    path = momentum(data, est.path)
    dt = float(path.dt[0])
    fpath = flow(data, x, path.p_bar[0], dt, t, eps_l=eps_l)
    sup = float(np.max(np.linalg.norm(fpath.eta - path.eta, axis=-1)))
    mom = float(np.linalg.norm(fpath.p_bar[0] - path.p_bar[0]))
    return FlowComparison(sup, mom, est, fpath)
