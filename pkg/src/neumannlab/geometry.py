"""Implicit planar domains described by their signed distance.

Sign convention: ``b < 0`` strictly inside the domain, ``b > 0`` strictly
outside (inside an obstacle), ``b == 0`` on the boundary. The outward normal is
``Db`` and points out of the domain, i.e. into the obstacle for exterior
domains.

All point arguments accept arrays of shape ``(..., 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import AmbiguousProjection, OutsideTube

AMBIGUITY_TOL = 1e-12


class DomainKind(str, Enum):
    HALF_SPACE = "half_space"
    EXTERIOR_DISKS = "exterior_disks"
    BOUNDED_BALL = "bounded_ball"
    FREE_SPACE = "free_space"


@dataclass(frozen=True)
class DomainGeometry:
    """A domain Omega in the plane.

    ``HalfSpace`` stores the *outward* unit normal ``normal`` and an offset, so
    that Omega = {x : normal . x < offset}. ``ExteriorDisks`` is the plane minus
    the closed disks, ``BoundedBall`` the open ball, ``FreeSpace`` the whole
    plane.
    """

    kind: DomainKind
    centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    radii: np.ndarray = field(default_factory=lambda: np.zeros(0))
    normal: np.ndarray = field(default_factory=lambda: np.zeros(2))
    offset: float = 0.0
    tube_radius: float = np.inf

    def __post_init__(self):
        object.__setattr__(self, "centers", np.asarray(self.centers, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "radii", np.asarray(self.radii, dtype=float).reshape(-1))
        object.__setattr__(self, "normal", np.asarray(self.normal, dtype=float).reshape(2))
        if not self.tube_radius > 0:
            raise ValueError("tube_radius must be positive")
        if len(self.centers) != len(self.radii):
            raise ValueError("centers and radii differ in length")
        if np.any(self.radii <= 0):
            raise ValueError("disk radii must be positive")
        if self.kind == DomainKind.EXTERIOR_DISKS:
            if len(self.radii) == 0:
                raise ValueError("ExteriorDisks needs at least one disk")
            if self.tube_radius > self.radii.min():
                raise ValueError("tube_radius must not exceed the smallest radius")
        if self.kind == DomainKind.BOUNDED_BALL and len(self.radii) != 1:
            raise ValueError("BoundedBall takes exactly one center and radius")
        if self.kind == DomainKind.HALF_SPACE:
            n = np.linalg.norm(self.normal)
            if not np.isclose(n, 1.0, atol=1e-12):
                raise ValueError("half-space normal must be a unit vector")

    # -- constructors -------------------------------------------------------

    @classmethod
    def half_space(cls, normal, offset=0.0, tube_radius=1.0):
        return cls(DomainKind.HALF_SPACE, normal=normal, offset=offset, tube_radius=tube_radius)

    @classmethod
    def exterior_disks(cls, centers, radii, tube_radius=None):
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        if tube_radius is None:
            tube_radius = 0.5 * radii.min()
        return cls(DomainKind.EXTERIOR_DISKS, centers=centers, radii=radii, tube_radius=tube_radius)

    @classmethod
    def bounded_ball(cls, center, radius, tube_radius=None):
        if tube_radius is None:
            tube_radius = 0.5 * radius
        return cls(DomainKind.BOUNDED_BALL, centers=[center], radii=[radius], tube_radius=tube_radius)

    @classmethod
    def free_space(cls):
        return cls(DomainKind.FREE_SPACE)

    @property
    def disks(self) -> list[tuple[np.ndarray, float]]:
        return [(c.copy(), float(r)) for c, r in zip(self.centers, self.radii)]

    # -- evaluation ---------------------------------------------------------

    def _disk_values(self, x):
        # R_i - |x - c_i| for every disk, shape (..., K)
        diff = x[..., None, :] - self.centers
        dist = np.linalg.norm(diff, axis=-1)
        return self.radii - dist, diff, dist

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == DomainKind.HALF_SPACE:
            return x @ self.normal - self.offset
        if self.kind == DomainKind.EXTERIOR_DISKS:
            vals, _, _ = self._disk_values(x)
            return vals.max(axis=-1)
        if self.kind == DomainKind.BOUNDED_BALL:
            return np.linalg.norm(x - self.centers[0], axis=-1) - self.radii[0]
        return np.full(x.shape[:-1], -np.inf)

    def _check_tube(self, b):
        if np.any(~(np.abs(b) < self.tube_radius)):
            raise OutsideTube(f"point at signed distance {np.max(np.abs(b)):.3g} "
                              f"is outside the tube of radius {self.tube_radius:.3g}")

    def _radial(self, x):
        """Active center, offset from it and its length for disk/ball domains."""
        if self.kind == DomainKind.EXTERIOR_DISKS:
            vals, diff, dist = self._disk_values(x)
            idx = vals.argmax(axis=-1)
            d = np.take_along_axis(diff, idx[..., None, None], axis=-2)[..., 0, :]
            r = np.take_along_axis(dist, idx[..., None], axis=-1)[..., 0]
            return idx, d, r
        d = x - self.centers[0]
        return np.zeros(x.shape[:-1], dtype=int), d, np.linalg.norm(d, axis=-1)

    def outward_normal(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == DomainKind.FREE_SPACE:
            raise OutsideTube("free space has no boundary")
        b = self.signed_distance(x)
        self._check_tube(b)
        if self.kind == DomainKind.HALF_SPACE:
            return np.broadcast_to(self.normal, x.shape).copy()
        _, d, r = self._radial(x)
        u = d / r[..., None]
        return -u if self.kind == DomainKind.EXTERIOR_DISKS else u

    def hessian_signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == DomainKind.FREE_SPACE:
            raise OutsideTube("free space has no boundary")
        b = self.signed_distance(x)
        self._check_tube(b)
        if self.kind == DomainKind.HALF_SPACE:
            return np.zeros(x.shape[:-1] + (2, 2))
        _, d, r = self._radial(x)
        u = d / r[..., None]
        tangential = np.eye(2) - u[..., :, None] * u[..., None, :]
        hess = tangential / r[..., None, None]
        return -hess if self.kind == DomainKind.EXTERIOR_DISKS else hess

    def project(self, x):
        """Closest point of the closed domain; identity on points already in it."""
        x = np.asarray(x, dtype=float)
        b = self.signed_distance(x)
        if self.kind == DomainKind.FREE_SPACE:
            return x.copy()
        outside = b > 0
        if not np.any(outside):
            return x.copy()
        if self.kind == DomainKind.EXTERIOR_DISKS:
            vals, _, _ = self._disk_values(x)
            top2 = np.sort(vals, axis=-1)[..., -2:] if vals.shape[-1] > 1 else None
            if top2 is not None and np.any(outside & (top2[..., 1] - top2[..., 0] <= AMBIGUITY_TOL)):
                raise AmbiguousProjection("point is equidistant to two obstacle boundaries")
        if self.kind in (DomainKind.EXTERIOR_DISKS, DomainKind.BOUNDED_BALL):
            _, d, r = self._radial(x)
            if np.any(outside & (r <= AMBIGUITY_TOL)):
                raise AmbiguousProjection("point sits at an obstacle center")
        self._check_tube(np.where(outside, b, 0.0))
        if self.kind == DomainKind.HALF_SPACE:
            y = x - np.maximum(b, 0.0)[..., None] * self.normal
        else:
            idx, d, r = self._radial(x)
            c = self.centers[idx]
            rad = self.radii[idx]
            y_proj = c + d * (rad / r)[..., None]
            y = np.where(outside[..., None], y_proj, x)
        if np.any(self.signed_distance(y) > AMBIGUITY_TOL):
            raise AmbiguousProjection("projection lands inside another obstacle")
        return y

    def project_to_boundary(self, x):
        """Closest boundary point ``x - b(x) Db(x)``, valid inside the tube."""
        x = np.asarray(x, dtype=float)
        b = self.signed_distance(x)
        nu = self.outward_normal(x)
        return x - b[..., None] * nu

    def contains(self, x, tol=AMBIGUITY_TOL):
        return self.signed_distance(x) <= tol


# Function forms of the methods above.

def signed_distance(dom: DomainGeometry, x):
    return dom.signed_distance(x)


def outward_normal(dom: DomainGeometry, x):
    return dom.outward_normal(x)


def hessian_signed_distance(dom: DomainGeometry, x):
    return dom.hessian_signed_distance(x)


def project(dom: DomainGeometry, x):
    return dom.project(x)
