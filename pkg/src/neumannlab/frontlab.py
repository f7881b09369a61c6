"""Value functions on grids, zero level sets and front observables.

The front at time t is the zero set of u(., t). Away from obstacles it is
found by marching squares on a grid of cell-center samples. Where the front
touches an obstacle it can do so in a cusp thinner than a grid cell, so the
field also carries u sampled along every obstacle boundary and contact points
found there are added to the contour.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import EmptyContour
from .geodesic import LeftwardPotential, boundary_max_potential
from .geometry import DomainGeometry, DomainKind

logger = logging.getLogger(__name__)


@dataclass
class BoundaryTrace:
    """u sampled along one closed obstacle boundary."""

    points: np.ndarray
    values: np.ndarray
    spacing: float


@dataclass
class Field:
    bbox: tuple
    resolution: tuple
    t: float
    values: np.ndarray
    mask: np.ndarray
    traces: list = field(default_factory=list)
    lipschitz: float = 1.0

    @property
    def xs(self) -> np.ndarray:
        (x0, x1), _ = self.bbox
        nx = self.resolution[0]
        return x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx

    @property
    def ys(self) -> np.ndarray:
        _, (y0, y1) = self.bbox
        ny = self.resolution[1]
        return y0 + (np.arange(ny) + 0.5) * (y1 - y0) / ny

    @property
    def cell(self) -> float:
        (x0, x1), (y0, y1) = self.bbox
        return max((x1 - x0) / self.resolution[0], (y1 - y0) / self.resolution[1])

    def centers(self) -> np.ndarray:
        X, Y = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def to_text(self) -> str:
        pts = self.centers().reshape(-1, 2)
        vals = self.values.reshape(-1)
        m = self.mask.reshape(-1)
        buf = io.StringIO()
        buf.write("x\ty\tvalue\tmask\n")
        for (x, y), v, k in zip(pts, vals, m):
            buf.write(f"{x:.17g}\t{y:.17g}\t{v:.17g}\t{int(k)}\n")
        return buf.getvalue()


def _evaluate(u_eval, pts, t):
    try:
        return np.asarray(u_eval(pts, t), dtype=float), np.ones(len(pts), dtype=bool)
    except Exception:  # fall back to per-point evaluation; failing points are masked
        vals = np.full(len(pts), np.nan)
        ok = np.zeros(len(pts), dtype=bool)
        for k, p in enumerate(pts):
            try:
                vals[k] = float(u_eval(p, t))
                ok[k] = True
            except Exception as exc:
                logger.debug("masking %s: %s", p, exc)
        return vals, ok


def evaluate_grid(u_eval: Callable, dom: DomainGeometry, bbox, resolution, t: float,
                  boundary_samples: int = 0, lipschitz: float = 1.0) -> Field:
    """u at feasible cell centers, plus ``boundary_samples`` points per obstacle circle."""
    nx, ny = resolution
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2 in each direction")
    fld = Field(tuple(map(tuple, bbox)), (int(nx), int(ny)), float(t),
                np.full((nx, ny), np.nan), np.zeros((nx, ny), dtype=bool), lipschitz=lipschitz)
    pts = fld.centers().reshape(-1, 2)
    feasible = dom.signed_distance(pts) <= 0 if dom.kind != DomainKind.FREE_SPACE \
        else np.ones(len(pts), dtype=bool)
    vals = np.full(len(pts), np.nan)
    ok = np.zeros(len(pts), dtype=bool)
    if np.any(feasible):
        v, good = _evaluate(u_eval, pts[feasible], t)
        vals[feasible] = v
        ok[feasible] = good & np.isfinite(v)
    fld.values = vals.reshape(nx, ny)
    fld.mask = ok.reshape(nx, ny)
    if boundary_samples and dom.kind in (DomainKind.EXTERIOR_DISKS, DomainKind.BOUNDED_BALL):
        ang = np.linspace(-np.pi, np.pi, boundary_samples, endpoint=False)
        circle = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        for c, r in zip(dom.centers, dom.radii):
            bp = c + r * circle
            # points swallowed by another obstacle are not part of the boundary
            keep = dom.signed_distance(bp) <= 1e-12
            v, good = _evaluate(u_eval, bp, t)
            v = np.where(keep & good, v, np.nan)
            fld.traces.append(BoundaryTrace(bp, v, 2 * np.pi * r / boundary_samples))
    return fld


# -- contours -----------------------------------------------------------------

# corners of cell (i, j): 0=(i,j) 1=(i+1,j) 2=(i+1,j+1) 3=(i,j+1)
# edges: 0=(c0,c1) 1=(c1,c2) 2=(c2,c3) 3=(c3,c0)
_EDGE_CORNERS = ((0, 1), (1, 2), (2, 3), (3, 0))
_CORNER_EDGES = {0: (3, 0), 1: (0, 1), 2: (1, 2), 3: (2, 3)}


def _edge_key(i, j, e):
    return (("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j))[e]


def _cell_segments(signs, center_positive):
    cut = [e for e, (a, b) in enumerate(_EDGE_CORNERS) if signs[a] != signs[b]]
    if len(cut) == 2:
        return [tuple(cut)]
    if len(cut) == 4:
        isolate = [c for c in range(4) if signs[c] != center_positive]
        return [_CORNER_EDGES[c] for c in isolate]
    return []


def _link(segments):
    """Chain segments sharing edge keys into polylines of keys."""
    touching = {}
    for s, (a, b) in enumerate(segments):
        touching.setdefault(a, []).append(s)
        touching.setdefault(b, []).append(s)
    used = np.zeros(len(segments), dtype=bool)
    lines = []

    def walk(start_key, s):
        chain = [start_key]
        key = start_key
        while True:
            used[s] = True
            a, b = segments[s]
            key = b if a == key else a
            chain.append(key)
            nxt = [q for q in touching[key] if not used[q]]
            if not nxt:
                return chain
            s = nxt[0]

    # open chains start at keys touched once
    for key, segs in touching.items():
        if len(segs) == 1 and not used[segs[0]]:
            lines.append(walk(key, segs[0]))
    for s in range(len(segments)):
        if not used[s]:
            lines.append(walk(segments[s][0], s))
    return lines


def _trace_contacts(trace: BoundaryTrace, lipschitz: float) -> list:
    v = trace.values
    pts = trace.points
    out = []
    n = len(v)
    tol = 0.5 * lipschitz * trace.spacing
    for k in range(n):
        a, b = v[k], v[(k + 1) % n]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if (a > 0) != (b > 0) and a != b:
            s = a / (a - b)
            out.append(pts[k] + s * (pts[(k + 1) % n] - pts[k]))
    near = np.isfinite(v) & (np.abs(v) <= tol)
    out.extend(pts[near])
    return out


def extract_zero_level(fld: Field) -> list:
    """Polylines (arrays of shape (m, 2)) approximating {u = 0}."""
    V = fld.values
    M = fld.mask
    xs, ys = fld.xs, fld.ys
    pos = V > 0
    full = M[:-1, :-1] & M[1:, :-1] & M[1:, 1:] & M[:-1, 1:]
    corners = np.stack([pos[:-1, :-1], pos[1:, :-1], pos[1:, 1:], pos[:-1, 1:]], axis=-1)
    mixed = full & corners.any(axis=-1) & ~corners.all(axis=-1)
    cache = {}

    def vertex(key):
        if key not in cache:
            kind, i, j = key
            i2, j2 = (i + 1, j) if kind == "h" else (i, j + 1)
            va, vb = V[i, j], V[i2, j2]
            s = va / (va - vb) if va != vb else 0.5
            pa = np.array([xs[i], ys[j]])
            pb = np.array([xs[i2], ys[j2]])
            cache[key] = pa + s * (pb - pa)
        return cache[key]

    segments = []
    for i, j in zip(*np.nonzero(mixed)):
        signs = tuple(bool(s) for s in corners[i, j])
        quad = (V[i, j], V[i + 1, j], V[i + 1, j + 1], V[i, j + 1])
        center_positive = bool(np.mean(quad) > 0)
        for ea, eb in _cell_segments(signs, center_positive):
            segments.append((_edge_key(i, j, ea), _edge_key(i, j, eb)))
    lines = [np.array([vertex(k) for k in chain]) for chain in _link(segments)]
    for trace in fld.traces:
        for p in _trace_contacts(trace, fld.lipschitz):
            lines.append(np.asarray(p, dtype=float)[None, :])
    if not lines:
        raise EmptyContour(f"field at t={fld.t} does not change sign")
    return lines


def bowing_depth(contours: list, t: float) -> float:
    """max over contour vertices of |x1 - (t - 2)|."""
    if not contours:
        raise EmptyContour("no contour to measure")
    verts = np.vstack(contours)
    return float(np.max(np.abs(verts[:, 0] - (t - 2.0))))


def contours_to_text(contours: list) -> str:
    blocks = ["\n".join(f"{x:.17g}\t{y:.17g}" for x, y in line) for line in contours]
    return "\n\n".join(blocks) + "\n"


def leave_time(disks, i: int, samples: int = 10_000, potential: Optional[LeftwardPotential] = None) -> float:
    """Time at which the front u = 2 - t + l(x) = 0 leaves the i-th circle."""
    if samples < 1000:
        raise ValueError("leave_time needs at least 1000 boundary samples")
    pot = potential or LeftwardPotential(disks)
    value, _ = boundary_max_potential(pot, i, samples)
    return 2.0 + value


def potential_field(disks, potential: Optional[LeftwardPotential] = None) -> Callable:
    """u(x, t) = 2 - t + l(x) as a grid-evaluable callable."""
    pot = potential or LeftwardPotential(disks)

    def u(x, t):
        return 2.0 - t + pot(x)

    return u


def front_measurement(disks, t: float, bbox, resolution=(400, 400), boundary_samples: int = 20_000,
                      potential: Optional[LeftwardPotential] = None):
    """Grid, contour and bowing depth of the potential front at time t."""
    pot = potential or LeftwardPotential(disks)
    dom = DomainGeometry.exterior_disks([c for c, _ in pot.disks], [r for _, r in pot.disks])
    fld = evaluate_grid(potential_field(disks, pot), dom, bbox, resolution, t,
                        boundary_samples=boundary_samples, lipschitz=1.0)
    contours = extract_zero_level(fld)
    return fld, contours, bowing_depth(contours, t)
