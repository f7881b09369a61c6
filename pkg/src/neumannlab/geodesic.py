"""Exact shortest paths around disk obstacles and the closed-form examples built on them.

Shortest paths in the plane minus a union of disks consist of tangent
segments and boundary arcs. ``VisibilityGraph`` enumerates those pieces;
``LeftwardPotential`` specialises the construction to the distance towards
the far left, which is the potential whose level sets are the moving front
for u0 = x1 + 2 and the Hamiltonian |p|^2.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError, Infeasible

TWO_PI = 2.0 * np.pi
SEG_TOL = 1e-9
FEAS_TOL = 1e-9

Disk = tuple  # (center, radius)


def _as_disks(disks) -> list:
    return [(np.asarray(c, dtype=float), float(r)) for c, r in disks]


def _check_feasible(disks, x):
    x = np.asarray(x, dtype=float)
    for c, r in disks:
        if np.any(np.linalg.norm(x - c, axis=-1) < r - FEAS_TOL):
            raise Infeasible(f"point lies strictly inside the disk at {c.tolist()}")


def segment_clearance(disks, a, b):
    """min_k (dist(c_k, [a, b]) - R_k); a, b may be stacked."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    dd = np.sum(d * d, axis=-1)
    out = np.full(np.broadcast_shapes(a.shape, b.shape)[:-1], np.inf)
    for c, r in disks:
        s = np.where(dd > 0, np.sum((c - a) * d, axis=-1) / np.where(dd > 0, dd, 1.0), 0.0)
        s = np.clip(s, 0.0, 1.0)
        closest = a + s[..., None] * d
        out = np.minimum(out, np.linalg.norm(closest - c, axis=-1) - r)
    return out


def _covered_intervals(disks, i):
    """Angular intervals (center, half-width) of circle i lying inside other disks."""
    ci, ri = disks[i]
    out = []
    for j, (cj, rj) in enumerate(disks):
        if j == i:
            continue
        d = np.linalg.norm(cj - ci)
        if d >= ri + rj or d + ri <= rj or d + rj <= ri:
            if d + ri <= rj:
                out.append((0.0, np.pi))  # swallowed entirely
            continue
        w = np.arccos(np.clip((ri * ri + d * d - rj * rj) / (2 * ri * d), -1.0, 1.0))
        out.append((float(np.arctan2(*(cj - ci)[::-1])), float(w)))
    return out


def _arc_blocked(theta_from, span, intervals):
    """Does the ccw arc [theta_from, theta_from + span] meet any covered interval?"""
    theta_from = np.asarray(theta_from, dtype=float)
    span = np.asarray(span, dtype=float)
    blocked = np.zeros(np.broadcast_shapes(theta_from.shape, span.shape), dtype=bool)
    for psi, w in intervals:
        start = psi - w
        hits_start = np.mod(start - theta_from, TWO_PI) < span
        inside = np.mod(theta_from - start, TWO_PI) < 2 * w
        blocked |= hits_start | inside
    return blocked


def point_tangents(center, radius, x):
    """The two tangent points from x to the circle (coincide when x is on it)."""
    x = np.asarray(x, dtype=float)
    d = x - center
    dist = np.linalg.norm(d, axis=-1)
    beta = np.arctan2(d[..., 1], d[..., 0])
    delta = np.arccos(np.clip(radius / np.maximum(dist, radius), -1.0, 1.0))
    angles = np.stack([beta + delta, beta - delta], axis=-1)
    pts = center + radius * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    return pts, angles


def common_tangents(ci, ri, cj, rj):
    """Tangent points (on i, on j) of the outer and inner common tangents."""
    d_vec = cj - ci
    d = float(np.linalg.norm(d_vec))
    beta = float(np.arctan2(d_vec[1], d_vec[0]))
    pairs = []
    if d > abs(ri - rj):
        phi = np.arccos((ri - rj) / d)
        for s in (1.0, -1.0):
            n = np.array([np.cos(beta + s * phi), np.sin(beta + s * phi)])
            pairs.append((ci + ri * n, cj + rj * n))
    if d > ri + rj:
        phi = np.arccos((ri + rj) / d)
        for s in (1.0, -1.0):
            n = np.array([np.cos(beta + s * phi), np.sin(beta + s * phi)])
            pairs.append((ci + ri * n, cj - rj * n))
    return pairs


# -- visibility graph ---------------------------------------------------------

@dataclass
class VisibilityGraph:
    """Nodes are points (optionally on a circle); edges carry a length and a kind."""

    disks: list
    nodes: list = field(default_factory=list)  # (point, circle index or None)
    edges: dict = field(default_factory=dict)  # node -> list of (node, length, kind)

    def add_node(self, point, circle: Optional[int] = None) -> int:
        self.nodes.append((np.asarray(point, dtype=float), circle))
        self.edges[len(self.nodes) - 1] = []
        return len(self.nodes) - 1

    def add_edge(self, a: int, b: int, length: float, kind):
        self.edges[a].append((b, float(length), kind))
        self.edges[b].append((a, float(length), kind))

    def node_angle(self, k: int) -> float:
        p, i = self.nodes[k]
        c = self.disks[i][0]
        return float(np.arctan2(p[1] - c[1], p[0] - c[0]))

    def covered(self, point, own: Optional[int]) -> bool:
        for j, (c, r) in enumerate(self.disks):
            if j != own and np.linalg.norm(point - c) < r - FEAS_TOL:
                return True
        return False

    def add_arcs(self):
        """Arcs between angularly consecutive nodes on every circle."""
        for i, (c, r) in enumerate(self.disks):
            on = [k for k, (_, ci) in enumerate(self.nodes) if ci == i]
            if len(on) < 2:
                continue
            on.sort(key=lambda k: (self.node_angle(k), k))
            intervals = _covered_intervals(self.disks, i)
            angles = [self.node_angle(k) for k in on]
            for a in range(len(on)):
                b = (a + 1) % len(on)
                span = float(np.mod(angles[b] - angles[a], TWO_PI))
                if span == 0.0 and on[a] != on[b]:
                    self.add_edge(on[a], on[b], 0.0, ("arc", i, 0.0))
                    continue
                if not _arc_blocked(angles[a], span, intervals):
                    self.add_edge(on[a], on[b], r * span, ("arc", i, span))

    def shortest(self, sources: dict) -> dict:
        """Multi-source shortest distances; ``sources`` maps node -> initial cost."""
        dist = {}
        heap = [(d0, k) for k, d0 in sources.items()]
        heapq.heapify(heap)
        while heap:
            d, k = heapq.heappop(heap)
            if k in dist:
                continue
            dist[k] = d
            for m, length, _ in self.edges[k]:
                if m not in dist:
                    heapq.heappush(heap, (d + length, m))
        return dist


def _add_circle_pair_tangents(graph: VisibilityGraph):
    disks = graph.disks
    for i in range(len(disks)):
        for j in range(i + 1, len(disks)):
            for ti, tj in common_tangents(*disks[i], *disks[j]):
                if graph.covered(ti, i) or graph.covered(tj, j):
                    continue
                if segment_clearance(disks, ti, tj) < -SEG_TOL:
                    continue
                a = graph.add_node(ti, i)
                b = graph.add_node(tj, j)
                graph.add_edge(a, b, np.linalg.norm(tj - ti), ("segment",))


def _add_query_point(graph: VisibilityGraph, x) -> int:
    x = np.asarray(x, dtype=float)
    disks = graph.disks
    on_circle = None
    for i, (c, r) in enumerate(disks):
        if abs(np.linalg.norm(x - c) - r) <= 1e-12:
            on_circle = i
    k = graph.add_node(x, on_circle)
    for i, (c, r) in enumerate(disks):
        if i == on_circle:
            continue
        pts, _ = point_tangents(c, r, x)
        for t in pts:
            if graph.covered(t, i) or segment_clearance(disks, x, t) < -SEG_TOL:
                continue
            m = graph.add_node(t, i)
            graph.add_edge(k, m, np.linalg.norm(t - x), ("segment",))
    return k


def build_graph(disks, points: Sequence) -> tuple:
    disks = _as_disks(disks)
    graph = VisibilityGraph(disks)
    ids = [_add_query_point(graph, p) for p in points]
    # direct segments between query points
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            pa, pb = graph.nodes[ids[a]][0], graph.nodes[ids[b]][0]
            if not disks or segment_clearance(disks, pa, pb) >= -SEG_TOL:
                graph.add_edge(ids[a], ids[b], np.linalg.norm(pb - pa), ("segment",))
    _add_circle_pair_tangents(graph)
    graph.add_arcs()
    return graph, ids


def geodesic_distance(disks, a, b) -> float:
    """Length of the shortest path from a to b avoiding the open disks."""
    disks = _as_disks(disks)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_feasible(disks, a)
    _check_feasible(disks, b)
    if not disks or segment_clearance(disks, a, b) >= -SEG_TOL:
        return float(np.linalg.norm(b - a))
    graph, (ia, ib) = build_graph(disks, [a, b])
    dist = graph.shortest({ia: 0.0})
    return float(dist[ib])


# -- leftward potential -------------------------------------------------------

def ray_clear(disks, x, tol=1e-12):
    """Is the leftward horizontal ray from x free of open disks?"""
    x = np.asarray(x, dtype=float)
    clear = np.ones(x.shape[:-1], dtype=bool)
    for c, r in disks:
        dy = np.abs(x[..., 1] - c[1])
        half = np.sqrt(np.maximum(r * r - dy * dy, 0.0))
        clear &= ~((dy < r - tol) & (x[..., 0] > c[0] - half + tol))
    return clear


class LeftwardPotential:
    """l(x): shortest distance from x to the far left, measured relative to x1 = 0.

    Where the leftward ray is unobstructed l(x) = x1. Otherwise the path
    wraps around the disks and leaves horizontally from the top or bottom
    point of some circle, costing that point's x1 for the final leg.
    """

    def __init__(self, disks):
        self.disks = _as_disks(disks)
        graph = VisibilityGraph(self.disks)
        _add_circle_pair_tangents(graph)
        sources = {}
        for i, (c, r) in enumerate(self.disks):
            for s in (1.0, -1.0):
                e = c + np.array([0.0, s * r])
                if graph.covered(e, i) or not ray_clear(self.disks, e):
                    continue
                sources[graph.add_node(e, i)] = float(e[0])
        graph.add_arcs()
        self.graph = graph
        self.node_potential = graph.shortest(sources)
        self._per_circle = []
        for i in range(len(self.disks)):
            ks = [k for k, (_, ci) in enumerate(graph.nodes) if ci == i and k in self.node_potential]
            self._per_circle.append((np.array([graph.node_angle(k) for k in ks]),
                                     np.array([self.node_potential[k] for k in ks]),
                                     _covered_intervals(self.disks, i)))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        _check_feasible(self.disks, x)
        best = np.where(ray_clear(self.disks, x), x[..., 0], np.inf)
        for i, (c, r) in enumerate(self.disks):
            node_angles, node_pot, intervals = self._per_circle[i]
            if len(node_angles) == 0:
                continue
            pts, angles = point_tangents(c, r, x)
            for side in range(2):
                t, th = pts[..., side, :], angles[..., side]
                seg = np.linalg.norm(t - x, axis=-1)
                ok = segment_clearance(self.disks, x, t) >= -SEG_TOL
                for j, (c2, r2) in enumerate(self.disks):
                    if j != i:
                        ok &= np.linalg.norm(t - c2, axis=-1) >= r2 - FEAS_TOL
                for a, pot in zip(node_angles, node_pot):
                    ccw = np.mod(a - th, TWO_PI)
                    cw = np.mod(th - a, TWO_PI)
                    for span, start in ((ccw, th), (cw, a + 0.0 * th)):
                        free = ~_arc_blocked(start, span, intervals)
                        cand = np.where(ok & free, seg + r * span + pot, np.inf)
                        best = np.minimum(best, cand)
        return best


def leftward_potential(disks, x):
    return LeftwardPotential(disks)(x)


# -- closed forms -------------------------------------------------------------

def disk_solution(r, phi, t):
    """Value for u0 = x1 + 2, H = |p|^2 outside the unit disk, in polar coordinates."""
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    x1 = r * np.cos(phi)
    x2 = r * np.sin(phi)
    root = np.sqrt(np.maximum(r * r - 1.0, 0.0))
    acos = np.arccos(np.clip(1.0 / np.maximum(r, 1.0), -1.0, 1.0))
    upper = -t + (np.pi / 2 - acos - phi) + root + 2.0
    lower = -t + (np.pi / 2 - acos + phi) + root + 2.0
    free = -t + r * np.cos(phi) + 2.0
    in1 = (x1 > 0) & (x2 >= 0) & (x2 <= 1)
    in2 = (x1 > 0) & (x2 >= -1) & (x2 < 0)
    return np.where(in1, upper, np.where(in2, lower, free))


def disk_solution_xy(x, t):
    x = np.asarray(x, dtype=float)
    return disk_solution(np.linalg.norm(x, axis=-1), np.arctan2(x[..., 1], x[..., 0]), t)


def disk_urr(r):
    """Radial second derivative of the disk solution in the shadow regions."""
    r = np.asarray(r, dtype=float)
    return 1.0 / (r * r * np.sqrt(r * r - 1.0))


def two_hole_disks(h: float) -> list:
    return [(np.array([0.0, 0.0]), 1.0), (np.array([2.0, 2.0 - h]), 1.0)]


def theta0(h):
    return 2.0 * np.arctan((2.0 - h) / 2.0) + h / 2.0


def f_h(h):
    th = theta0(h)
    return np.abs(np.sin(th) + th - np.pi)


def f_prime(h):
    """Closed-form derivative of f on (0, 2)."""
    h = np.asarray(h, dtype=float)
    return h * (4.0 - h) * np.cos(h / 4.0 + np.arctan(1.0 - h / 2.0)) ** 2 / (h * h - 4.0 * h + 8.0)


def _theta0_by_tangents(h: float):
    """theta0 from equating the two optimal trajectory lengths, solving for alpha~ numerically."""
    o2 = np.array([2.0, 2.0 - h])

    def a_point(alpha):
        return o2 + np.array([-np.sin(alpha), -np.cos(alpha)])

    def constraint(alpha):
        x = a_point(alpha)
        rt = np.linalg.norm(x)
        # the angle term is the polar angle of the tangent point on the second circle
        return alpha + np.arccos(1.0 / rt) + np.arctan2(x[1], x[0]) - np.pi / 2

    alpha = brentq(constraint, 1e-12, np.pi / 2 - 1e-12, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    rt = np.linalg.norm(a_point(alpha))
    tangent = np.sqrt(rt * rt - 1.0)
    return (np.pi + 2.0 - 2.0 * alpha - tangent) / 2.0, alpha, tangent


@dataclass
class TwoHolesReport:
    h: float
    theta0: float
    t1: float
    t2: float
    D1: float
    f_h: float
    z: np.ndarray
    alpha_tilde: float
    theta0_reconstructed: float
    geodesic_t2: float
    cross_check_agrees: bool

    def row(self) -> str:
        vals = [self.h, self.theta0, self.t1, self.t2, self.D1, self.f_h, self.z[0]]
        return "\t".join(f"{v:.17g}" for v in vals)

    HEADER = "h\ttheta0\tt1\tt2\tD1\tf_h\tz1"


def boundary_max_potential(pot: LeftwardPotential, i: int, samples: int = 10_000, refine: bool = True):
    """max over the i-th circle of the potential, returned with the maximizing point."""
    c, r = pot.disks[i]
    ang = np.linspace(-np.pi, np.pi, samples, endpoint=False)
    pts = c + r * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    vals = pot(pts)
    k = int(np.argmax(vals))
    best_a, best_v = ang[k], vals[k]
    if refine:
        step = TWO_PI / samples
        res = minimize_scalar(lambda a: -float(pot(c + r * np.array([np.cos(a), np.sin(a)]))),
                              bounds=(best_a - step, best_a + step), method="bounded",
                              options={"xatol": 1e-12})
        if -res.fun > best_v:
            best_a, best_v = res.x, -res.fun
    return float(best_v), c + r * np.array([np.cos(best_a), np.sin(best_a)])


def two_holes(h: float, samples: int = 10_000, tol: float = 1e-3) -> TwoHolesReport:
    if not 0.0 < h < 2.0:
        raise DomainError(f"h must lie in (0, 2), got {h}")
    th = float(theta0(h))
    th_rec, alpha, tangent = _theta0_by_tangents(h)
    if abs(th_rec - th) > 1e-12:
        raise AssertionError(f"tangent reconstruction of theta0 disagrees: {th_rec} vs {th}")
    t2 = 4.0 + np.pi - th
    pot = LeftwardPotential(two_hole_disks(h))
    geo_max, _ = boundary_max_potential(pot, 1, samples)
    z = np.array([2.0 + np.sin(th), 2.0 - h - np.cos(th)])
    return TwoHolesReport(
        h=float(h), theta0=th, t1=2.0 + np.pi / 2, t2=float(t2), D1=np.pi / 2 - 1.0,
        f_h=float(f_h(h)), z=z, alpha_tilde=float(alpha), theta0_reconstructed=float(th_rec),
        geodesic_t2=2.0 + geo_max, cross_check_agrees=bool(abs(2.0 + geo_max - t2) <= tol),
    )


def disk_seam_distance(x):
    """Distance to the lines where the disk solution switches branch, and to the circle."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    d = r - 1.0
    right = x[..., 0] > 0
    for level in (-1.0, 0.0, 1.0):
        d = np.minimum(d, np.where(right, np.abs(x[..., 1] - level), np.inf))
    # endpoints of the seams on the x2 axis
    for level in (-1.0, 0.0, 1.0):
        d = np.minimum(d, np.hypot(x[..., 0], x[..., 1] - level))
    return d
