"""Closed convex domains: projections, normal cones and interior-ball constants.

Every domain is immutable, supports single-point and batched Euclidean
projection, exact normal-cone membership tests per kind, and exposes a flat
parameter encoding consumed by the compiled kernel.  Batched projections are
written so the numpy implementation performs the same floating-point
operations, in the same order, as the compiled kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import constants as C


class DomainError(ValueError):
    pass


class ProjectionError(RuntimeError):
    """Iterative projection failed to converge; carries the final residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


# kernel domain ids
DOM_FREE = 0
DOM_HALFSPACE = 1
DOM_BOX = 2
DOM_BALL = 3
DOM_POLYTOPE = 4


class ConvexDomain:
    """Base class: a closed convex subset of R^m with non-empty interior."""

    kind: str = ""

    def __init__(self, dim: int):
        self.dim = int(dim)
        if self.dim < 1:
            raise DomainError("dimension must be positive")

    # -- core surface -----------------------------------------------------
    def project_batch(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def project(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise DomainError("cannot project a non-finite point")
        return self.project_batch(x[None, :])[0]

    def contains(self, x, tol: float = C.CONTAINS_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        p = self.project(x)
        return float(np.linalg.norm(x - p)) <= tol

    def normal_cone_contains(self, x, y, tol: float = C.NORMAL_CONE_TOL) -> bool:
        """Whether y lies in the outward normal cone at x (x must be in the set)."""
        raise NotImplementedError

    def interior_point(self) -> np.ndarray:
        raise NotImplementedError

    def boundary_distance(self, a) -> float:
        """Distance from an interior point `a` to the boundary (inf if none)."""
        raise NotImplementedError

    # -- sampling (used by property checks) --------------------------------
    def sample_points(self, rng: np.random.Generator, n: int, scale: float = 3.0) -> np.ndarray:
        """n points inside the set: projections of Gaussian draws around the
        interior point (mix of interior and boundary points)."""
        g = self.interior_point()[None, :] + scale * rng.standard_normal((n, self.dim))
        return self.project_batch(g)

    def sample_boundary(self, rng: np.random.Generator, n: int):
        """(points, unit outward normals); empty arrays if there is no boundary."""
        raise NotImplementedError

    def kernel_encoding(self):
        """(dom_id, params 1-d float array, n_faces)."""
        raise NotImplementedError

    def _check_member(self, x, tol):
        if not self.contains(x, tol):
            raise DomainError("point not in domain")


class HalfSpace(ConvexDomain):
    """{x : <normal, x> >= offset} with a unit normal (inward direction)."""

    kind = "half-space"

    def __init__(self, normal, offset: float, interior=None):
        normal = np.asarray(normal, dtype=float)
        super().__init__(normal.size)
        nrm = float(np.linalg.norm(normal))
        if nrm <= 0:
            raise DomainError("half-space normal must be nonzero")
        self.normal = normal / nrm
        self.offset = float(offset) / nrm
        if interior is None:
            self._interior = self.normal * (self.offset + 1.0)
        else:
            self._interior = np.asarray(interior, dtype=float)
            if float(self._interior @ self.normal) <= self.offset:
                raise DomainError("stored interior point is not strictly interior")

    def project_batch(self, y):
        y = np.asarray(y, dtype=float)
        s = (y * self.normal).sum(axis=-1)
        t = self.offset - s
        inside = s >= self.offset
        return np.where(inside[:, None], y, y + t[:, None] * self.normal)

    def normal_cone_contains(self, x, y, tol=C.NORMAL_CONE_TOL):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self._check_member(x, tol)
        ynorm = float(np.linalg.norm(y))
        if float(x @ self.normal) - self.offset > tol:  # interior
            return ynorm <= tol
        yn = float(y @ self.normal)
        resid = np.linalg.norm(y - yn * self.normal)
        return yn <= tol and resid <= tol * (1.0 + ynorm)

    def interior_point(self):
        return self._interior.copy()

    def boundary_distance(self, a):
        return float(np.asarray(a, dtype=float) @ self.normal) - self.offset

    def sample_boundary(self, rng, n):
        g = rng.standard_normal((n, self.dim))
        s = g @ self.normal
        pts = g + (self.offset - s)[:, None] * self.normal
        normals = np.tile(-self.normal, (n, 1))
        return pts, normals

    def kernel_encoding(self):
        return DOM_HALFSPACE, np.concatenate([self.normal, [self.offset]]), 0


class AxisBox(ConvexDomain):
    """{x : lo <= x <= hi} componentwise; +-inf bounds allowed.

    With all bounds infinite this is the whole space (the trivial domain of
    an unconstrained equation); the kernel then skips projection entirely.
    """

    kind = "axis-box"

    def __init__(self, lo, hi, interior=None):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DomainError("box bounds must be 1-d arrays of equal length")
        if np.any(lo >= hi):
            raise DomainError("box must have non-empty interior (lo < hi)")
        super().__init__(lo.size)
        self.lo, self.hi = lo, hi
        if interior is None:
            mid = np.zeros(lo.size)
            flo, fhi = np.isfinite(lo), np.isfinite(hi)
            both = flo & fhi
            mid[both] = 0.5 * (lo[both] + hi[both])
            mid[flo & ~fhi] = lo[flo & ~fhi] + 1.0
            mid[~flo & fhi] = hi[~flo & fhi] - 1.0
            self._interior = mid
        else:
            self._interior = np.asarray(interior, dtype=float)
            if np.any(self._interior <= lo) or np.any(self._interior >= hi):
                raise DomainError("stored interior point is not strictly interior")

    @property
    def is_free(self) -> bool:
        return not (np.any(np.isfinite(self.lo)) or np.any(np.isfinite(self.hi)))

    def project_batch(self, y):
        y = np.asarray(y, dtype=float)
        if self.is_free:
            return y.copy()
        return np.clip(y, self.lo, self.hi)

    def normal_cone_contains(self, x, y, tol=C.NORMAL_CONE_TOL):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self._check_member(x, tol)
        ok = np.ones(self.dim, dtype=bool)
        at_lo = x - self.lo <= tol
        at_hi = self.hi - x <= tol
        ok &= np.where(at_lo, y <= tol, True)
        ok &= np.where(at_hi, y >= -tol, True)
        ok &= np.where(~at_lo & ~at_hi, np.abs(y) <= tol, True)
        return bool(ok.all())

    def interior_point(self):
        return self._interior.copy()

    def boundary_distance(self, a):
        a = np.asarray(a, dtype=float)
        gaps = []
        if np.any(np.isfinite(self.lo)):
            gaps.append(np.min((a - self.lo)[np.isfinite(self.lo)]))
        if np.any(np.isfinite(self.hi)):
            gaps.append(np.min((self.hi - a)[np.isfinite(self.hi)]))
        return float(min(gaps)) if gaps else np.inf

    def sample_boundary(self, rng, n):
        faces = []
        for i in range(self.dim):
            if np.isfinite(self.lo[i]):
                faces.append((i, self.lo[i], -1.0))
            if np.isfinite(self.hi[i]):
                faces.append((i, self.hi[i], +1.0))
        if not faces:
            return np.empty((0, self.dim)), np.empty((0, self.dim))
        pts = self.sample_points(rng, n)
        normals = np.zeros((n, self.dim))
        idx = rng.integers(0, len(faces), size=n)
        for k in range(n):
            i, val, sign = faces[idx[k]]
            pts[k, i] = val
            normals[k, i] = sign
        return pts, normals

    def kernel_encoding(self):
        if self.is_free:
            return DOM_FREE, np.empty(0), 0
        return DOM_BOX, np.concatenate([self.lo, self.hi]), 0


def free_space(dim: int) -> AxisBox:
    """The whole of R^dim (trivial constraint)."""
    return AxisBox(np.full(dim, -np.inf), np.full(dim, np.inf))


class EuclideanBall(ConvexDomain):
    kind = "euclidean-ball"

    def __init__(self, center, radius: float, interior=None):
        center = np.asarray(center, dtype=float)
        super().__init__(center.size)
        if radius <= 0:
            raise DomainError("ball radius must be positive")
        self.center = center
        self.radius = float(radius)
        self._interior = center.copy() if interior is None else np.asarray(interior, dtype=float)
        if float(np.linalg.norm(self._interior - center)) >= self.radius:
            raise DomainError("stored interior point is not strictly interior")

    def project_batch(self, y):
        y = np.asarray(y, dtype=float)
        d = y - self.center
        nrm = np.sqrt((d * d).sum(axis=-1))
        inside = nrm <= self.radius
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(inside, 1.0, self.radius / nrm)
        return np.where(inside[:, None], y, self.center + d * scale[:, None])

    def normal_cone_contains(self, x, y, tol=C.NORMAL_CONE_TOL):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self._check_member(x, tol)
        d = x - self.center
        r = float(np.linalg.norm(d))
        ynorm = float(np.linalg.norm(y))
        if self.radius - r > tol:  # interior
            return ynorm <= tol
        u = d / r
        yu = float(y @ u)
        resid = np.linalg.norm(y - yu * u)
        return yu >= -tol and resid <= tol * (1.0 + ynorm)

    def interior_point(self):
        return self._interior.copy()

    def boundary_distance(self, a):
        return self.radius - float(np.linalg.norm(np.asarray(a, dtype=float) - self.center))

    def sample_boundary(self, rng, n):
        g = rng.standard_normal((n, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return self.center + self.radius * g, g

    def kernel_encoding(self):
        return DOM_BALL, np.concatenate([self.center, [self.radius]]), 0


class Polytope(ConvexDomain):
    """Intersection of half-spaces {x : <n_j, x> >= c_j}, projected by
    Dykstra's alternating scheme (exact for intersections of half-spaces).

    A strictly interior point must be supplied; it is validated against every
    face.
    """

    kind = "polytope"

    def __init__(self, normals, offsets, interior):
        normals = np.asarray(normals, dtype=float)
        offsets = np.asarray(offsets, dtype=float)
        if normals.ndim != 2 or offsets.ndim != 1 or normals.shape[0] != offsets.size:
            raise DomainError("need normals (F, m) and offsets (F,)")
        super().__init__(normals.shape[1])
        nrms = np.linalg.norm(normals, axis=1)
        if np.any(nrms <= 0):
            raise DomainError("polytope face normals must be nonzero")
        self.normals = normals / nrms[:, None]
        self.offsets = offsets / nrms
        self._interior = np.asarray(interior, dtype=float)
        slack = self.normals @ self._interior - self.offsets
        if np.any(slack <= 0):
            raise DomainError("stored interior point does not satisfy all faces strictly")

    @property
    def n_faces(self) -> int:
        return self.normals.shape[0]

    def project_batch(self, y):
        # Dykstra with face corrections; convergence requires both the
        # iterate and all corrections to stabilize over a sweep (the iterate
        # alone can plateau for many sweeps while the active set resolves).
        y = np.asarray(y, dtype=float)
        n = y.shape[0]
        z = y.copy()
        p = np.zeros((self.n_faces, n, self.dim))
        active = np.ones(n, dtype=bool)
        final_delta = np.zeros(n)
        for _ in range(C.DYKSTRA_MAX_SWEEPS):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            z_start = z[idx].copy()
            p_start = p[:, idx].copy()
            za = z[idx]
            for f in range(self.n_faces):
                w = za + p[f, idx]
                s = (w * self.normals[f]).sum(axis=-1)
                t = self.offsets[f] - s
                outside = s < self.offsets[f]
                zn = np.where(outside[:, None], w + t[:, None] * self.normals[f], w)
                p[f, idx] = w - zn
                za = zn
            z[idx] = za
            delta = np.abs(za - z_start).max(axis=-1)
            delta = np.maximum(delta, np.abs(p[:, idx] - p_start).max(axis=(0, 2)))
            final_delta[idx] = delta
            active[idx] = delta > C.DYKSTRA_TOL
        if active.any():
            raise ProjectionError(
                f"Dykstra projection did not converge within {C.DYKSTRA_MAX_SWEEPS} sweeps",
                residual=float(final_delta[active].max()),
            )
        return z

    def normal_cone_contains(self, x, y, tol=C.NORMAL_CONE_TOL):
        from scipy.optimize import nnls

        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self._check_member(x, tol)
        slack = self.normals @ x - self.offsets
        act = slack <= tol
        ynorm = float(np.linalg.norm(y))
        if not act.any():
            return ynorm <= tol
        # outward cone is the nonnegative span of -n_j over active faces
        A = -self.normals[act].T
        _, resid = nnls(A, y)
        return resid <= 1e-9 * (1.0 + ynorm)

    def interior_point(self):
        return self._interior.copy()

    def boundary_distance(self, a):
        return float(np.min(self.normals @ np.asarray(a, dtype=float) - self.offsets))

    def sample_boundary(self, rng, n):
        g = self._interior[None, :] + 5.0 * rng.standard_normal((2 * n, self.dim))
        proj = self.project_batch(g)
        d = g - proj
        nrm = np.linalg.norm(d, axis=1)
        keep = nrm > 1e-9
        pts, normals = proj[keep][:n], (d[keep] / nrm[keep, None])[:n]
        return pts, normals

    def kernel_encoding(self):
        params = np.concatenate(
            [np.concatenate([self.normals[f], [self.offsets[f]]]) for f in range(self.n_faces)]
        )
        return DOM_POLYTOPE, params, self.n_faces


@dataclass(frozen=True)
class InteriorBallConstants:
    """(anchor, radius, value_bound): a closed ball B(anchor, radius) inside
    the domain plus a bound on the operator values over that ball.  These are
    the constants entering the compensator total-variation lower bound."""

    anchor: np.ndarray
    radius: float
    value_bound: float


def interior_ball_constants(domain: ConvexDomain) -> InteriorBallConstants:
    """Constructive choice: anchor at the stored interior point, radius half
    the boundary distance (capped for boundaryless domains), value bound 0
    (indicator subdifferentials vanish on the interior ball)."""
    a = domain.interior_point()
    dist = domain.boundary_distance(a)
    if dist < C.DEGENERATE_INTERIOR_TOL:
        raise DomainError("degenerate domain: interior point too close to the boundary")
    radius = min(dist / 2.0, C.UNBOUNDED_RADIUS_CAP)
    return InteriorBallConstants(anchor=a, radius=radius, value_bound=0.0)


_DOMAIN_KINDS = {
    "half-space": HalfSpace,
    "axis-box": AxisBox,
    "euclidean-ball": EuclideanBall,
    "polytope": Polytope,
}


def domain_from_config(cfg: dict) -> ConvexDomain:
    kind = cfg["kind"]
    params = cfg.get("params", {})
    if kind == "half-space":
        return HalfSpace(params["normal"], params["offset"], params.get("interior_point"))
    if kind == "axis-box":
        lo = [(-np.inf if v is None else v) for v in params["lo"]]
        hi = [(np.inf if v is None else v) for v in params["hi"]]
        return AxisBox(lo, hi, params.get("interior_point"))
    if kind == "euclidean-ball":
        return EuclideanBall(params["center"], params["radius"], params.get("interior_point"))
    if kind == "polytope":
        return Polytope(params["normals"], params["offsets"], params["interior_point"])
    raise DomainError(f"unknown domain kind {kind!r}")
