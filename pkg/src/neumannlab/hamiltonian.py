"""Convex Hamiltonians H(x, p), their Legendre transforms, and assumption checks.

Built-in models evaluate on stacked inputs of shape ``(..., 2)``; user models
built from plain callables only need to handle single points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NoConvergence
from .geometry import DomainGeometry

LEGENDRE_TOL = 1e-10
NEWTON_MAX_ITER = 100


@dataclass(frozen=True)
class HamiltonianModel:
    """H with its first and second derivatives.

    ``hess_px(x, p)[i, j]`` is d^2 H / dp_i dx_j. ``lagrangian`` and
    ``momentum_of_velocity`` are closed forms of L(x, v) and D_v L(x, v) when
    known; otherwise the Legendre transform is computed numerically.
    """

    name: str
    eval: Callable
    grad_x: Callable
    grad_p: Callable
    hess_pp: Callable
    hess_px: Callable
    alpha0: float
    alpha1: float
    lagrangian: Optional[Callable] = None
    momentum_of_velocity: Optional[Callable] = None
    boundary_split: Optional[tuple[Callable, Callable]] = None
    params: dict = field(default_factory=dict)

    def __call__(self, x, p):
        return self.eval(x, p)

    @property
    def has_closed_form(self) -> bool:
        return self.lagrangian is not None and self.momentum_of_velocity is not None


def _sq(p):
    return np.sum(np.asarray(p, dtype=float) ** 2, axis=-1)


def _zeros_like_vec(x, p):
    return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(p)))


def _identity_hess(scale):
    def hess(x, p):
        shape = np.broadcast_shapes(np.shape(x), np.shape(p))[:-1]
        return np.broadcast_to(scale * np.eye(2), shape + (2, 2)).copy()
    return hess


def _zero_hess(x, p):
    shape = np.broadcast_shapes(np.shape(x), np.shape(p))[:-1]
    return np.zeros(shape + (2, 2))


def quadratic() -> HamiltonianModel:
    """H = |p|^2 / 2, L = |v|^2 / 2."""
    return HamiltonianModel(
        name="quadratic",
        eval=lambda x, p: 0.5 * _sq(p) + 0.0 * np.sum(np.asarray(x, dtype=float), axis=-1),
        grad_x=_zeros_like_vec,
        grad_p=lambda x, p: np.asarray(p, dtype=float) + 0.0 * np.asarray(x, dtype=float),
        hess_pp=_identity_hess(1.0),
        hess_px=_zero_hess,
        alpha0=1.0,
        alpha1=1.0,
        lagrangian=lambda x, v: 0.5 * _sq(v) + 0.0 * np.sum(np.asarray(x, dtype=float), axis=-1),
        momentum_of_velocity=lambda x, v: np.asarray(v, dtype=float) + 0.0 * np.asarray(x, dtype=float),
        boundary_split=(lambda x, pt: 0.5 * _sq(pt), lambda x, pn: 0.5 * _sq(pn)),
    )


def scaled_quadratic() -> HamiltonianModel:
    """H = |p|^2, L = |v|^2 / 4. Level-set fronts with unit normal speed."""
    return HamiltonianModel(
        name="scaled_quadratic",
        eval=lambda x, p: _sq(p) + 0.0 * np.sum(np.asarray(x, dtype=float), axis=-1),
        grad_x=_zeros_like_vec,
        grad_p=lambda x, p: 2.0 * np.asarray(p, dtype=float) + 0.0 * np.asarray(x, dtype=float),
        hess_pp=_identity_hess(2.0),
        hess_px=_zero_hess,
        alpha0=2.0,
        alpha1=0.5,
        lagrangian=lambda x, v: 0.25 * _sq(v) + 0.0 * np.sum(np.asarray(x, dtype=float), axis=-1),
        momentum_of_velocity=lambda x, v: 0.5 * np.asarray(v, dtype=float) + 0.0 * np.asarray(x, dtype=float),
        boundary_split=(lambda x, pt: _sq(pt), lambda x, pn: _sq(pn)),
    )


class ConstantDrift:
    """Drift field c(x) = c0 with zero Jacobian."""

    def __init__(self, c0):
        self.c0 = np.asarray(c0, dtype=float)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.c0, x.shape).copy()

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (2, 2))


class RotationalDrift:
    """Drift c(x) = omega * (-x2, x1): tangent to every circle about the origin."""

    def __init__(self, omega=1.0):
        self.omega = float(omega)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.omega * np.stack([-x[..., 1], x[..., 0]], axis=-1)

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        jac = self.omega * np.array([[0.0, -1.0], [1.0, 0.0]])
        return np.broadcast_to(jac, x.shape[:-1] + (2, 2)).copy()


def drift_quadratic(drift) -> HamiltonianModel:
    """H = |p|^2 / 2 + c(x) . p, L = |v - c(x)|^2 / 2.

    ``drift`` is a callable c(x) with a ``jacobian(x)`` method returning
    dc_i/dx_j, or a constant vector.
    """
    if not callable(drift):
        drift = ConstantDrift(drift)

    def grad_x(x, p):
        jac = drift.jacobian(x)
        return np.einsum("...ij,...i->...j", jac, np.asarray(p, dtype=float))

    return HamiltonianModel(
        name="drift_quadratic",
        eval=lambda x, p: 0.5 * _sq(p) + np.sum(drift(x) * np.asarray(p, dtype=float), axis=-1),
        grad_x=grad_x,
        grad_p=lambda x, p: np.asarray(p, dtype=float) + drift(x),
        hess_pp=_identity_hess(1.0),
        hess_px=lambda x, p: drift.jacobian(x) + 0.0 * np.asarray(p, dtype=float)[..., None],
        alpha0=1.0,
        alpha1=1.0,
        lagrangian=lambda x, v: 0.5 * _sq(np.asarray(v, dtype=float) - drift(x)),
        momentum_of_velocity=lambda x, v: np.asarray(v, dtype=float) - drift(x),
        params={"drift": drift},
    )


def without_closed_form(model: HamiltonianModel) -> HamiltonianModel:
    """Same Hamiltonian, but forcing the numerical Legendre path."""
    return HamiltonianModel(
        name=model.name + "/numeric",
        eval=model.eval, grad_x=model.grad_x, grad_p=model.grad_p,
        hess_pp=model.hess_pp, hess_px=model.hess_px,
        alpha0=model.alpha0, alpha1=model.alpha1,
        boundary_split=model.boundary_split, params=model.params,
    )


BUILTIN_MODELS = {
    "quadratic": quadratic,
    "scaled_quadratic": scaled_quadratic,
    "drift_quadratic": drift_quadratic,
}


# -- Legendre transform -----------------------------------------------------

def _coordinate_descent(model, x, v, p, sweeps=200):
    p = p.copy()
    for _ in range(sweeps):
        for i in range(len(p)):
            def obj(s, i=i):
                q = p.copy()
                q[i] = s
                return float(model.eval(x, q) - v @ q)
            res = minimize_scalar(obj, bracket=(p[i] - 1.0, p[i] + 1.0), tol=1e-14)
            p[i] = res.x
        if np.linalg.norm(model.grad_p(x, p) - v) <= LEGENDRE_TOL:
            break
    return p


def _newton_legendre(model, x, v):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    p = v.copy()

    def phi(q):
        return float(model.eval(x, q) - v @ q)

    for _ in range(NEWTON_MAX_ITER):
        resid = model.grad_p(x, p) - v
        if np.linalg.norm(resid) <= LEGENDRE_TOL:
            return p
        step = np.linalg.solve(model.hess_pp(x, p), resid)
        lam = 1.0
        f0 = phi(p)
        while phi(p - lam * step) > f0 and lam > 1e-12:
            lam *= 0.5
        p = p - lam * step
    p = _coordinate_descent(model, x, v, p)
    if np.linalg.norm(model.grad_p(x, p) - v) > LEGENDRE_TOL:
        raise NoConvergence(f"Legendre maximizer not found for {model.name} at v={v}")
    return p


def legendre(model: HamiltonianModel, x, v):
    """Return ``(L(x, v), p*)`` with p* the maximizer of v.p - H(x, p)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if model.has_closed_form:
        return model.lagrangian(x, v), model.momentum_of_velocity(x, v)
    if v.ndim > 1:
        flat_x = np.broadcast_to(x, v.shape).reshape(-1, v.shape[-1])
        flat_v = v.reshape(-1, v.shape[-1])
        ps = np.array([_newton_legendre(model, xi, vi) for xi, vi in zip(flat_x, flat_v)])
        vals = np.array([vi @ pi - model.eval(xi, pi) for xi, vi, pi in zip(flat_x, flat_v, ps)])
        return vals.reshape(v.shape[:-1]), ps.reshape(v.shape)
    p = _newton_legendre(model, x, v)
    return float(v @ p - model.eval(x, p)), p


def lagrangian(model: HamiltonianModel, x, v):
    return legendre(model, x, v)[0]


def grad_v_L(model: HamiltonianModel, x, v):
    """D_v L(x, v), i.e. the p solving D_p H(x, p) = v."""
    return legendre(model, x, v)[1]


# -- assumption checks ------------------------------------------------------

@dataclass
class A1Report:
    min_eig: float
    max_eig: float
    superlinearity: float
    alpha0: float

    @property
    def holds(self) -> bool:
        return self.min_eig > 0 and self.max_eig <= self.alpha0 + 1e-9


def check_A1(model: HamiltonianModel, box=((-2.0, 2.0), (-2.0, 2.0)), grid=7,
             p_box=None, radius=1e3, directions=16) -> A1Report:
    """Sample the eigenvalues of D_pp H over ``box`` (for x) and ``p_box`` (for p)."""
    p_box = box if p_box is None else p_box
    xs = np.stack(np.meshgrid(np.linspace(*box[0], grid), np.linspace(*box[1], grid)), -1).reshape(-1, 2)
    ps = np.stack(np.meshgrid(np.linspace(*p_box[0], grid), np.linspace(*p_box[1], grid)), -1).reshape(-1, 2)
    eigs = []
    for x in xs:
        for p in ps:
            eigs.append(np.linalg.eigvalsh(np.asarray(model.hess_pp(x, p))))
    eigs = np.concatenate(eigs)
    angles = np.linspace(0, 2 * np.pi, directions, endpoint=False)
    units = np.stack([np.cos(angles), np.sin(angles)], -1)
    ratios = [float(model.eval(x, radius * u)) / radius for x in xs for u in units]
    return A1Report(float(eigs.min()), float(eigs.max()), float(min(ratios)), model.alpha0)


@dataclass
class A3Report:
    separability_residual: float
    normal_condition_residual: float
    tol: float = 1e-8

    @property
    def holds(self) -> bool:
        return self.separability_residual <= self.tol and self.normal_condition_residual <= self.tol


def check_A3(model: HamiltonianModel, dom: DomainGeometry, boundary_samples,
             n_momenta=20, seed=0, scale=3.0) -> A3Report:
    """Empirical test of the tangential/normal split at boundary points."""
    rng = np.random.default_rng(seed)
    sep = 0.0
    normal_cond = 0.0
    for x in np.asarray(boundary_samples, dtype=float).reshape(-1, 2):
        nu = dom.outward_normal(x)
        for p in rng.uniform(-scale, scale, size=(n_momenta, 2)):
            pn = (p @ nu) * nu
            pt = p - pn
            r = model.eval(x, p) - model.eval(x, pt) - model.eval(x, pn) + model.eval(x, np.zeros(2))
            sep = max(sep, abs(float(r)))
            normal_cond = max(normal_cond, abs(float(model.grad_p(x, pt) @ nu)))
    return A3Report(sep, normal_cond)
