"""Discrete Skorokhod problem: reflected trajectories by predictor + projection.

Given a control v, the scheme takes the free step y = eta_k + dt v_k and, when
y leaves the closed domain, projects it back and records the expelled normal
distance per unit time as the reflection density l_k.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

from .errors import Infeasible, LeftTube, OutsideTube
from .geometry import DomainGeometry, DomainKind

FEASIBILITY_TOL = 1e-10
L_TOL = 1e-12


class Regime(str, Enum):
    INTERIOR = "interior"
    SLIDE = "boundary-l>0"
    LZERO = "boundary-l=0"


@dataclass
class ReflectedPath:
    """Samples of a reflected trajectory.

    Every array has one row per sample time. ``v[k]`` and ``l[k]`` act on
    ``[s_k, s_{k+1})``; the final row repeats the last interval so that the
    arrays stay aligned with ``times``.
    """

    times: np.ndarray
    eta: np.ndarray
    v: np.ndarray
    l: np.ndarray
    regime: list
    p: Optional[np.ndarray] = None
    p_bar: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    def copy(self) -> "ReflectedPath":
        return replace(
            self,
            times=self.times.copy(), eta=self.eta.copy(), v=self.v.copy(), l=self.l.copy(),
            regime=list(self.regime),
            p=None if self.p is None else self.p.copy(),
            p_bar=None if self.p_bar is None else self.p_bar.copy(),
            meta=dict(self.meta),
        )


def boundary_band(dt: float, vmax: float) -> float:
    return 2.0 * dt * vmax


def label_regimes(dom: DomainGeometry, eta, l, band: float) -> list:
    b = dom.signed_distance(eta)
    labels = []
    for bk, lk in zip(b, l):
        if bk < -band:
            labels.append(Regime.INTERIOR)
        elif lk > L_TOL:
            labels.append(Regime.SLIDE)
        else:
            labels.append(Regime.LZERO)
    return labels


def _num_steps(dt: float, T: float) -> int:
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"horizon {T} is not a multiple of dt={dt}")
    return n


def integrate_batch(dom: DomainGeometry, x0, controls, dt: float):
    """Integrate many piecewise-constant controls at once.

    ``controls`` has shape ``(B, N, 2)``. Returns ``eta`` of shape
    ``(B, N + 1, 2)`` and ``l`` of shape ``(B, N)``.
    """
    controls = np.asarray(controls, dtype=float)
    B, N, n = controls.shape
    eta = np.empty((B, N + 1, n))
    l = np.zeros((B, N))
    eta[:, 0] = x0
    if dom.kind == DomainKind.FREE_SPACE:
        eta[:, 1:] = x0 + dt * np.cumsum(controls, axis=1)
        return eta, l
    cur = np.broadcast_to(np.asarray(x0, dtype=float), (B, n)).copy()
    for k in range(N):
        y = cur + dt * controls[:, k]
        b = dom.signed_distance(y)
        out = b > 0
        if np.any(out):
            if np.any(b[out] >= dom.tube_radius):
                raise LeftTube(f"predictor at step {k} penetrates {b.max():.3g} >= tube "
                               f"{dom.tube_radius:.3g}; reduce dt or the control bound")
            y[out] = dom.project(y[out])
            l[out, k] = b[out] / dt
        eta[:, k + 1] = y
        cur = y
    return eta, l


def _control_array(control, times_left, dt):
    if callable(control):
        return np.array([np.asarray(control(s), dtype=float) for s in times_left])
    arr = np.asarray(control, dtype=float)
    if arr.ndim == 1:
        return np.broadcast_to(arr, (len(times_left), arr.shape[0])).copy()
    if len(arr) != len(times_left):
        raise ValueError("control array length does not match the number of steps")
    return arr


def integrate(dom: DomainGeometry, x0, control: Union[Callable, np.ndarray], dt: float,
              T: float) -> ReflectedPath:
    """Reflected trajectory from ``x0`` under ``control`` on ``[0, T]``.

    ``control`` is a function of time (sampled at the left end of every step),
    a constant vector, or an ``(N, 2)`` array of per-step values.
    """
    x0 = np.asarray(x0, dtype=float)
    if dom.signed_distance(x0) > FEASIBILITY_TOL:
        raise Infeasible(f"start point {x0} lies outside the closed domain")
    N = _num_steps(dt, T)
    times = dt * np.arange(N + 1)
    v = _control_array(control, times[:-1], dt)
    try:
        eta, l = integrate_batch(dom, x0, v[None], dt)
    except OutsideTube as exc:
        raise LeftTube(str(exc)) from exc
    eta, l = eta[0], l[0]
    v_full = np.vstack([v, v[-1:]])
    l_full = np.append(l, l[-1])
    vmax = float(np.max(np.linalg.norm(v, axis=-1))) if len(v) else 0.0
    band = boundary_band(dt, vmax)
    path = ReflectedPath(times, eta, v_full, l_full, label_regimes(dom, eta, l_full, band))
    path.meta.update(dt=dt, band=band)
    return path


@dataclass
class SkorokhodResiduals:
    max_feasibility: float
    min_l: float
    max_consistency: float
    complementarity: float
    consistency_constant: float


def residuals(dom: DomainGeometry, path: ReflectedPath, band: Optional[float] = None) -> SkorokhodResiduals:
    """How well ``path`` satisfies the discrete Skorokhod system."""
    eta, v, l = path.eta, path.v[:-1], path.l[:-1]
    dts = path.dt
    if band is None:
        band = path.meta.get("band", boundary_band(float(dts.max()), float(np.abs(v).max(initial=0.0))))
    b = dom.signed_distance(eta)
    feas = float(np.max(b)) if dom.kind != DomainKind.FREE_SPACE else -np.inf
    rates = (eta[1:] - eta[:-1]) / dts[:, None]
    defect = rates - v
    if dom.kind != DomainKind.FREE_SPACE:
        in_tube = np.abs(b[:-1]) < dom.tube_radius
        if np.any(in_tube):
            nu = dom.outward_normal(eta[:-1][in_tube])
            defect[in_tube] += l[in_tube, None] * nu
    cons = float(np.max(np.linalg.norm(defect, axis=-1))) if len(defect) else 0.0
    interior = b[:-1] < -band
    comp = float(np.sum(l[interior] * dts[interior]))
    return SkorokhodResiduals(
        max_feasibility=feas,
        min_l=float(l.min()) if len(l) else 0.0,
        max_consistency=cons,
        complementarity=comp,
        consistency_constant=cons / float(dts.max()),
    )


def tangency(dom: DomainGeometry, path: ReflectedPath, contact_tol: float = 1e-9) -> float:
    """max |nu . (eta_{k+1} - eta_{k-1}) / (2 ds)| over samples in sustained contact.

    A sample counts when it and both neighbours lie on the boundary; the
    centered difference across an attachment is not a boundary velocity.
    """
    if dom.kind == DomainKind.FREE_SPACE or len(path.times) < 3:
        return 0.0
    contact = np.abs(dom.signed_distance(path.eta)) <= contact_tol
    inner = np.zeros(len(contact), dtype=bool)
    inner[1:-1] = contact[1:-1] & contact[:-2] & contact[2:]
    if not np.any(inner):
        return 0.0
    rate = np.gradient(path.eta, path.times, axis=0)
    nu = dom.outward_normal(path.eta[inner])
    return float(np.max(np.abs(np.sum(rate[inner] * nu, axis=-1))))


# -- serialization ----------------------------------------------------------

def path_to_text(path: ReflectedPath) -> str:
    n = path.eta.shape[1]
    cols = ["s"] + [f"eta_{i + 1}" for i in range(n)] + [f"v_{i + 1}" for i in range(n)] + ["l"]
    if path.p is not None:
        cols += [f"p_{i + 1}" for i in range(n)]
    if path.p_bar is not None:
        cols += [f"pbar_{i + 1}" for i in range(n)]
    cols.append("regime")
    buf = io.StringIO()
    buf.write("\t".join(cols) + "\n")
    for k in range(len(path.times)):
        row = [path.times[k], *path.eta[k], *path.v[k], path.l[k]]
        if path.p is not None:
            row += list(path.p[k])
        if path.p_bar is not None:
            row += list(path.p_bar[k])
        cells = [f"{x:.17g}" for x in row] + [Regime(path.regime[k]).value]
        buf.write("\t".join(cells) + "\n")
    return buf.getvalue()


def path_from_text(text: str) -> ReflectedPath:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split("\t")
    rows = [ln.split("\t") for ln in lines[1:]]
    num = np.array([[float(c) for c in r[:-1]] for r in rows])
    col = {name: i for i, name in enumerate(header[:-1])}

    def pick(prefix):
        names = sorted(k for k in col if k.startswith(prefix + "_"))
        if not names:
            return None
        return num[:, [col[k] for k in names]]

    return ReflectedPath(
        times=num[:, col["s"]],
        eta=pick("eta"),
        v=pick("v"),
        l=num[:, col["l"]],
        regime=[Regime(r[-1]) for r in rows],
        p=pick("p"),
        p_bar=pick("pbar"),
    )
