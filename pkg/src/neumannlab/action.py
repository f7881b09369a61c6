"""Representation-formula values by direct transcription.

u(x, t) is estimated by minimizing the discrete action

    sum_k  trapezoid[ L(eta, -v_k) + g(eta) l_k ] dt  +  u0(eta_N)

over piecewise-constant controls, where (eta, l) comes from the Skorokhod
integrator. Every returned value is the action of an actual feasible discrete
path, hence an upper bound for the discrete infimum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .errors import Infeasible
from .geometry import DomainGeometry, DomainKind
from .hamiltonian import HamiltonianModel, grad_v_L, lagrangian
from .skorokhod import (
    ReflectedPath,
    Regime,
    boundary_band,
    integrate_batch,
    label_regimes,
)

logger = logging.getLogger(__name__)


# -- data ---------------------------------------------------------------------

class ScalarField:
    """A C^1 scalar function of position with its gradient."""

    name = "field"

    def __call__(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def lipschitz(self) -> float:
        raise NotImplementedError


class Constant(ScalarField):
    def __init__(self, c=0.0):
        self.c = float(c)
        self.name = f"constant({self.c:g})"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.c) if x.ndim > 1 else self.c

    def grad(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def lipschitz(self):
        return 0.0


def zero() -> Constant:
    c = Constant(0.0)
    c.name = "zero"
    return c


class Linear(ScalarField):
    """a . x + b"""

    def __init__(self, a, b=0.0):
        self.a = np.asarray(a, dtype=float)
        self.b = float(b)
        self.name = f"linear({self.a.tolist()}, {self.b:g})"

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.a + self.b

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.a, x.shape).copy()

    def lipschitz(self):
        return float(np.linalg.norm(self.a))


@dataclass
class ProblemData:
    model: HamiltonianModel
    dom: DomainGeometry
    g: ScalarField = field(default_factory=zero)
    u0: ScalarField = field(default_factory=zero)


@dataclass
class SolverParams:
    nodes: int = 64
    substeps: int = 1
    restarts: int = 8
    max_iter: int = 300
    fd_step: float = 1e-6
    tol: float = 1e-12
    v_max: float = 10.0
    seed: int = 42
    line_search_restarts: int = 3

    def __post_init__(self):
        for name in ("nodes", "substeps", "restarts", "max_iter", "fd_step", "v_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"SolverParams.{name} must be positive")


@dataclass
class ValueEstimate:
    value: float
    path: ReflectedPath
    restarts_used: int
    final_gradient_norm: float
    action_history: list
    restart_values: list
    zero_control_value: float
    improved: bool

    @property
    def near_optimal_restarts(self) -> list:
        """Restarts whose optimum is within 1e-6 of the best (possibly distinct minimizers)."""
        return [i for i, v in enumerate(self.restart_values) if v <= self.value + 1e-6]


# -- action -------------------------------------------------------------------

def _lagrangian_values(model, x, w):
    if model.has_closed_form:
        return model.lagrangian(x, w)
    return lagrangian(model, x, w)


def action_batch(data: ProblemData, eta, v, l, dt):
    """Discrete action for stacked paths ``eta (B, M+1, 2)``, ``v (B, M, 2)``, ``l (B, M)``."""
    L_left = _lagrangian_values(data.model, eta[:, :-1], -v)
    L_right = _lagrangian_values(data.model, eta[:, 1:], -v)
    gv = data.g(eta)
    if np.ndim(gv) == 0:
        gv = np.full(eta.shape[:-1], float(gv))
    running = 0.5 * (L_left + L_right) + 0.5 * (gv[:, :-1] + gv[:, 1:]) * l
    dt = np.broadcast_to(np.asarray(dt, dtype=float), running.shape[-1:])
    end = data.u0(eta[:, -1])
    return running @ dt + end


def running_action(data: ProblemData, path: ReflectedPath, upto: Optional[int] = None) -> float:
    """Quadrature of the running cost over the first ``upto`` intervals."""
    upto = len(path.times) - 1 if upto is None else upto
    eta = path.eta[: upto + 1][None]
    v = path.v[:upto][None]
    l = path.l[:upto][None]
    L_left = _lagrangian_values(data.model, eta[:, :-1], -v)
    L_right = _lagrangian_values(data.model, eta[:, 1:], -v)
    gv = data.g(eta)
    if np.ndim(gv) == 0:
        gv = np.full(eta.shape[:-1], float(gv))
    running = 0.5 * (L_left + L_right) + 0.5 * (gv[:, :-1] + gv[:, 1:]) * l
    return float(running[0] @ path.dt[:upto])


def action_value(data: ProblemData, path: ReflectedPath) -> float:
    return running_action(data, path) + float(data.u0(path.eta[-1]))


# -- minimization -------------------------------------------------------------

def _characteristic_guess(data: ProblemData, x) -> np.ndarray:
    """Constant control along the free characteristic of u0 at x."""
    try:
        guess = -np.asarray(data.model.grad_p(x, data.u0.grad(x)), dtype=float)
    except (NotImplementedError, AttributeError):
        guess = np.zeros(2)
    if not np.linalg.norm(guess) > 1e-12:
        guess = np.array([-1.0, 0.0])
    return guess


def _rotate(v, angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _initial_controls(data, x, params: SolverParams, bound: float) -> list:
    N = params.nodes
    guess = _characteristic_guess(data, x)
    inits = [np.zeros((N, 2)), np.tile(guess, (N, 1))]
    for r in range(2, params.restarts):
        if r == 2:
            z = np.tile(_rotate(guess, np.pi / 4), (N, 1))
        elif r == 3:
            z = np.tile(_rotate(guess, -np.pi / 4), (N, 1))
        else:
            rng = np.random.default_rng([params.seed, r])
            sigma = 0.5 * max(np.linalg.norm(guess), 1.0)
            z = guess + sigma * rng.standard_normal((N, 2))
        inits.append(z)
    return [np.clip(z, -bound, bound) for z in inits[: params.restarts]]


class _Transcription:
    def __init__(self, data: ProblemData, x, t, params: SolverParams):
        self.data = data
        self.x = np.asarray(x, dtype=float)
        self.params = params
        self.M = params.nodes * params.substeps
        self.dt = t / self.M

    def expand(self, Z):
        Z = np.asarray(Z, dtype=float).reshape(-1, self.params.nodes, 2)
        return np.repeat(Z, self.params.substeps, axis=1)

    def values(self, Z):
        controls = self.expand(Z)
        eta, l = integrate_batch(self.data.dom, self.x, controls, self.dt)
        return action_batch(self.data, eta, controls, l, self.dt)

    def fun_and_grad(self, z):
        h = self.params.fd_step
        n = z.size
        Z = np.tile(z, (n + 1, 1))
        Z[1:] += h * np.eye(n)
        vals = self.values(Z)
        f = float(vals[0])
        grad = (vals[1:] - vals[0]) / h
        self.last_grad = grad
        return f, grad

    def path(self, z) -> ReflectedPath:
        controls = self.expand(z)[0]
        eta, l = integrate_batch(self.data.dom, self.x, controls[None], self.dt)
        eta, l = eta[0], l[0]
        times = self.dt * np.arange(self.M + 1)
        v_full = np.vstack([controls, controls[-1:]])
        l_full = np.append(l, l[-1])
        vmax = float(np.max(np.linalg.norm(controls, axis=-1)))
        band = boundary_band(self.dt, vmax)
        regimes = label_regimes(self.data.dom, eta, l_full, band) \
            if self.data.dom.kind != DomainKind.FREE_SPACE else [Regime.INTERIOR] * len(times)
        path = ReflectedPath(times, eta, v_full, l_full, regimes)
        path.meta.update(dt=self.dt, band=band)
        return path


def _run_restart(problem: _Transcription, z0, params: SolverParams, bound: float):
    history = [float(problem.values(z0.reshape(1, -1))[0])]

    def record(intermediate_result):
        history.append(float(intermediate_result.fun))

    z = z0.reshape(-1)
    bounds = [(-bound, bound)] * z.size
    res = None
    for attempt in range(params.line_search_restarts + 1):
        res = minimize(problem.fun_and_grad, z, jac=True, method="L-BFGS-B", bounds=bounds,
                       callback=record,
                       options={"maxiter": params.max_iter, "ftol": params.tol, "gtol": 1e-9})
        z = res.x
        # status 2: abnormal termination, usually a failed line search at a kink
        if res.status != 2 or attempt == params.line_search_restarts:
            break
        if len(history) > 1 and history[-2] - history[-1] < params.tol:
            break
    final = float(problem.values(z.reshape(1, -1))[0])
    if final < history[-1]:
        history.append(final)
    grad_norm = float(np.linalg.norm(problem.fun_and_grad(z)[1]))
    return z, final, history, grad_norm


def minimize_value(data: ProblemData, x, t: float, params: Optional[SolverParams] = None) -> ValueEstimate:
    """Estimate u(x, t) by multistart quasi-Newton over piecewise-constant controls."""
    params = params or SolverParams()
    x = np.asarray(x, dtype=float)
    if data.dom.signed_distance(x) > 1e-10:
        raise Infeasible(f"{x} is not in the closed domain")
    if not t > 0:
        raise ValueError("horizon t must be positive")
    problem = _Transcription(data, x, t, params)
    bound = params.v_max / np.sqrt(2.0)
    zero_value = float(problem.values(np.zeros((1, 2 * params.nodes)))[0])

    results = []
    for r, z0 in enumerate(_initial_controls(data, x, params, bound)):
        results.append(_run_restart(problem, z0, params, bound))

    values = [res[1] for res in results]
    best = min(range(len(values)), key=lambda i: (values[i], i))
    z_best, _, history, grad_norm = results[best]
    path = problem.path(z_best)
    value = action_value(data, path)
    improved = value < zero_value - 1e-12
    if not improved:
        logger.warning("no restart improved on the zero-control action at x=%s, t=%g", x, t)
    path.meta.update(restart=best, nodes=params.nodes, substeps=params.substeps)
    return ValueEstimate(
        value=value,
        path=path,
        restarts_used=len(results),
        final_gradient_norm=grad_norm,
        action_history=history,
        restart_values=values,
        zero_control_value=zero_value,
        improved=improved,
    )


# -- momentum -------------------------------------------------------------------

def momentum(data: ProblemData, path: ReflectedPath) -> ReflectedPath:
    """Fill the generalized momentum p = D_v L(eta, -v) and its tangential part."""
    out = path.copy()
    p = np.asarray(grad_v_L(data.model, path.eta, -path.v), dtype=float)
    p_bar = p.copy()
    boundary = np.array([Regime(r) != Regime.INTERIOR for r in path.regime])
    if np.any(boundary):
        nu = data.dom.outward_normal(path.eta[boundary])
        pb = p[boundary]
        p_bar[boundary] = pb - np.sum(pb * nu, axis=-1, keepdims=True) * nu
    out.p = p
    out.p_bar = p_bar
    return out


@dataclass
class PbarReport:
    lipschitz_ratio: float
    max_p_jump: float
    ratio_time: float
    jump_time: float


def pbar_lipschitz_report(path: ReflectedPath) -> PbarReport:
    if path.p is None or path.p_bar is None:
        raise ValueError("momentum not filled; call momentum() first")
    dts = path.dt
    dpb = np.linalg.norm(np.diff(path.p_bar, axis=0), axis=-1) / dts
    dp = np.linalg.norm(np.diff(path.p, axis=0), axis=-1)
    i, j = int(np.argmax(dpb)), int(np.argmax(dp))
    return PbarReport(float(dpb[i]), float(dp[j]), float(path.times[i]), float(path.times[j]))


def dpp_check(data: ProblemData, x, t: float, s_mid: float, params: Optional[SolverParams] = None,
              estimate: Optional[ValueEstimate] = None) -> float:
    """Dynamic-programming defect |u(x,t) - [partial action to s_mid + u(eta(s_mid), t - s_mid)]|."""
    params = params or SolverParams()
    if not 0 < s_mid <= t:
        raise ValueError("need 0 < s_mid <= t")
    est = estimate or minimize_value(data, x, t, params)
    path = est.path
    k = int(np.argmin(np.abs(path.times - s_mid)))
    partial = running_action(data, path, upto=k)
    remaining = t - path.times[k]
    if k == len(path.times) - 1 or remaining <= 1e-14:
        inner = float(data.u0(path.eta[k]))
    else:
        inner = minimize_value(data, path.eta[k], remaining, params).value
    return abs(est.value - (partial + inner))
