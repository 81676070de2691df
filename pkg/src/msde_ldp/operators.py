"""Maximal monotone operators: resolvents, Yosida approximations and
empirical monotonicity checks.

Three variants are provided:

* ``IndicatorOperator`` -- subdifferential of the indicator of a convex
  domain (the reflecting case; resolvent = Euclidean projection),
* ``FilledGraph1D`` -- a one-dimensional nondecreasing step graph whose
  jumps are filled with the closed gap (resolvent by monotone bisection),
* ``LipschitzSum`` -- one of the above plus a single-valued monotone
  Lipschitz map (resolvent by fixed-point iteration).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import constants as C
from .domains import ConvexDomain, InteriorBallConstants, interior_ball_constants

_EPS_BALANCE = 0.5  # split of sampled graph points between pieces and jumps


class ResolventError(RuntimeError):
    pass


class MonotoneOperator:
    """Base class.  All operators are immutable and safe to share."""

    variant: str = ""

    def __init__(self, dim: int):
        self.dim = int(dim)

    def resolvent_batch(self, lam: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def resolvent(self, lam: float, x) -> np.ndarray:
        """The unique z with x in z + lam * A(z)."""
        if lam <= 0:
            raise ValueError("lam must be positive")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.resolvent_batch(lam, x[None, :])[0]

    def yosida(self, lam: float, x) -> np.ndarray:
        """Single-valued Lipschitz surrogate (x - resolvent(lam, x)) / lam."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return (x - self.resolvent(lam, x)) / lam

    def yosida_batch(self, lam: float, x: np.ndarray) -> np.ndarray:
        return (x - self.resolvent_batch(lam, x)) / lam

    def domain_contains(self, x, tol: float = C.CONTAINS_TOL) -> bool:
        """Whether x lies in the closure of the operator's domain."""
        raise NotImplementedError

    def graph_points(self, rng: np.random.Generator, n: int):
        """n exact graph pairs (x, y) with y in A(x), as (n, m) arrays."""
        raise NotImplementedError


class IndicatorOperator(MonotoneOperator):
    """Subdifferential of the indicator of a convex set: 0 on the interior,
    the outward normal cone on the boundary, empty outside."""

    variant = "indicator-subdifferential"

    def __init__(self, domain: ConvexDomain):
        super().__init__(domain.dim)
        self.domain = domain

    def resolvent_batch(self, lam, x):
        return self.domain.project_batch(np.asarray(x, dtype=float))

    def domain_contains(self, x, tol=C.CONTAINS_TOL):
        return self.domain.contains(x, tol)

    def graph_points(self, rng, n):
        n_int = n // 2
        xs_int = self.domain.sample_points(rng, n_int)
        ys_int = np.zeros_like(xs_int)
        pts, normals = self.domain.sample_boundary(rng, n - n_int)
        if pts.shape[0] == 0:  # boundaryless domain
            extra = self.domain.sample_points(rng, n - n_int)
            return np.vstack([xs_int, extra]), np.vstack([ys_int, np.zeros_like(extra)])
        scales = np.abs(rng.standard_normal(pts.shape[0]))[:, None]
        return np.vstack([xs_int, pts]), np.vstack([ys_int, scales * normals])

    def interior_ball(self) -> InteriorBallConstants:
        return interior_ball_constants(self.domain)


class FilledGraph1D(MonotoneOperator):
    """Nondecreasing step graph on R with jumps filled by closed intervals.

    ``breakpoints`` are strictly increasing; ``values`` has one more entry
    and gives the constant value on each open piece, so the graph at
    breakpoint b_i is the closed interval [values[i], values[i+1]].
    Non-monotone values are representable (the empirical checks must be able
    to witness violations) but the resolvent is only guaranteed for
    nondecreasing values.
    """

    variant = "filled-1d-graph"

    def __init__(self, breakpoints, values):
        super().__init__(1)
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.breakpoints.ndim != 1 or self.values.ndim != 1:
            raise ValueError("breakpoints and values must be 1-d")
        if self.values.size != self.breakpoints.size + 1:
            raise ValueError("need len(values) == len(breakpoints) + 1")
        if self.breakpoints.size and np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")

    def _piece_bounds(self, z):
        lo = self.values[np.searchsorted(self.breakpoints, z, side="left")]
        hi = self.values[np.searchsorted(self.breakpoints, z, side="right")]
        return lo, hi

    def resolvent_batch(self, lam, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        vmin, vmax = self.values[0], self.values[-1]
        lo = np.minimum(x - lam * vmax, x - lam * vmin)
        hi = np.maximum(x - lam * vmax, x - lam * vmin)
        # widen one ulp-ish so the bracket always straddles the root
        span = 1e-9 * (1.0 + np.abs(x))
        lo -= span
        hi += span
        z = 0.5 * (lo + hi)
        for _ in range(200):
            flo = z + lam * self._piece_bounds(z)[0]
            fhi = z + lam * self._piece_bounds(z)[1]
            go_left = x < flo
            go_right = x > fhi
            done = ~(go_left | go_right)
            hi = np.where(go_left, z, hi)
            lo = np.where(go_right, z, lo)
            if done.all() or float(np.max(hi - lo)) < C.BISECTION_TOL:
                break
            z = np.where(done, z, 0.5 * (lo + hi))
        flo = z + lam * self._piece_bounds(z)[0]
        fhi = z + lam * self._piece_bounds(z)[1]
        bad = (x < flo - 1e-6) | (x > fhi + 1e-6)
        if bad.any():
            raise ResolventError(
                "bisection bracket failure (graph not maximal monotone?) at "
                f"x={x[bad][0]!r}"
            )
        return z[:, None]

    def domain_contains(self, x, tol=C.CONTAINS_TOL):
        return True  # the filled graph is defined on all of R

    def graph_points(self, rng, n):
        n_jump = min(n // 3, 2 * self.breakpoints.size)
        xs, ys = [], []
        if n_jump and self.breakpoints.size:
            idx = rng.integers(0, self.breakpoints.size, size=n_jump)
            frac = rng.uniform(size=n_jump)
            b = self.breakpoints[idx]
            lo, hi = self.values[idx], self.values[idx + 1]
            xs.append(b)
            ys.append(np.minimum(lo, hi) + frac * np.abs(hi - lo))
        z = rng.uniform(-5.0, 5.0, size=n - n_jump)
        piece = np.searchsorted(self.breakpoints, z, side="left")
        on_break = np.isin(z, self.breakpoints)
        z = np.where(on_break, z + 1e-9, z)
        xs.append(z)
        ys.append(self.values[piece])
        return np.concatenate(xs)[:, None], np.concatenate(ys)[:, None]


def sign_graph() -> FilledGraph1D:
    """The filled sign graph: -1 for z<0, [-1, 1] at 0, +1 for z>0."""
    return FilledGraph1D([0.0], [-1.0, 1.0])


class LipschitzSum(MonotoneOperator):
    """base operator + single-valued Lipschitz map f (monotone when the map
    is; deliberately non-monotone maps are allowed so checks can fail)."""

    variant = "sum-with-lipschitz-monotone-map"

    def __init__(self, base: MonotoneOperator, func, lipschitz: float, label: str = "custom"):
        super().__init__(base.dim)
        self.base = base
        self.func = func
        self.lipschitz = float(lipschitz)
        self.label = label

    def resolvent_batch(self, lam, x):
        x = np.asarray(x, dtype=float)
        if lam * self.lipschitz >= 1.0:
            raise ResolventError(
                f"fixed-point resolvent needs lam * L < 1 (lam={lam}, L={self.lipschitz})"
            )
        z = self.base.resolvent_batch(lam, x)
        for _ in range(C.FIXED_POINT_MAX_ITER):
            z_new = self.base.resolvent_batch(lam, x - lam * self.func(z))
            delta = float(np.max(np.abs(z_new - z)))
            z = z_new
            if delta < C.FIXED_POINT_TOL:
                return z
        raise ResolventError(f"resolvent fixed-point iteration stalled (delta={delta:.3e})")

    def domain_contains(self, x, tol=C.CONTAINS_TOL):
        return self.base.domain_contains(x, tol)

    def graph_points(self, rng, n):
        xs, ys = self.base.graph_points(rng, n)
        return xs, ys + self.func(xs)

    def interior_ball(self) -> InteriorBallConstants:
        """Anchor/radius from the base domain; the value bound is the sampled
        supremum of |f| over the interior ball, inflated by 10% (sampling
        underestimates suprema)."""
        if not isinstance(self.base, IndicatorOperator):
            raise ResolventError("interior-ball constants need an indicator base")
        ball = interior_ball_constants(self.base.domain)
        rng = np.random.default_rng(0)
        g = rng.standard_normal((4096, self.dim))
        g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
        radii = ball.radius * rng.uniform(size=(4096, 1)) ** (1.0 / self.dim)
        pts = ball.anchor[None, :] + radii * g
        sup = float(np.max(np.linalg.norm(self.func(pts), axis=1)))
        return InteriorBallConstants(ball.anchor, ball.radius, C.VALUE_BOUND_MARGIN * sup)


def monotone_map(name: str, **params):
    """Catalog of single-valued maps for ``LipschitzSum`` (vectorized over
    rows).  'linear': slope*x; 'tanh': scale*tanh(x) componentwise."""
    if name == "linear":
        slope = float(params.get("slope", 1.0))
        return (lambda x: slope * np.asarray(x, dtype=float)), abs(slope)
    if name == "tanh":
        scale = float(params.get("scale", 1.0))
        return (lambda x: scale * np.tanh(np.asarray(x, dtype=float))), abs(scale)
    raise ValueError(f"unknown map {name!r}")


@dataclass(frozen=True)
class MonotonicityReport:
    min_inner: float
    passed: bool
    samples: int
    witness: tuple | None  # ((x1, y1), (x2, y2)) attaining the minimum


def verify_monotone(op: MonotoneOperator, sample_count: int, rng_seed: int,
                    lam: float = C.MONOTONE_SAMPLE_LAMBDA, radius: float = 5.0) -> MonotonicityReport:
    """Sample approximate graph pairs through the resolvent at a small lam
    (the canonical single-valued accessor to the graph) and report the
    minimum of <y1 - y2, x1 - x2> over sampled pairs."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed)]))
    a = radius * rng.standard_normal((sample_count, op.dim))
    b = radius * rng.standard_normal((sample_count, op.dim))
    xa, ya = op.resolvent_batch(lam, a), op.yosida_batch(lam, a)
    xb, yb = op.resolvent_batch(lam, b), op.yosida_batch(lam, b)
    inner = ((ya - yb) * (xa - xb)).sum(axis=1)
    k = int(np.argmin(inner))
    min_inner = float(inner[k])
    return MonotonicityReport(
        min_inner=min_inner,
        passed=min_inner >= C.MONOTONE_PASS_TOL,
        samples=sample_count,
        witness=((xa[k].copy(), ya[k].copy()), (xb[k].copy(), yb[k].copy())),
    )


def operator_from_config(cfg: dict, domain: ConvexDomain | None) -> MonotoneOperator:
    variant = cfg["variant"]
    params = cfg.get("params", {})
    if variant == "indicator-subdifferential":
        if domain is None:
            raise ValueError("indicator operator needs a domain section")
        return IndicatorOperator(domain)
    if variant == "filled-1d-graph":
        return FilledGraph1D(params["breakpoints"], params["values"])
    if variant == "sum-with-lipschitz-monotone-map":
        if domain is None:
            raise ValueError("sum operator needs a domain section")
        func, lip = monotone_map(params["map"]["name"], **{
            k: v for k, v in params["map"].items() if k != "name"
        })
        return LipschitzSum(IndicatorOperator(domain), func, lip, label=params["map"]["name"])
    raise ValueError(f"unknown operator variant {variant!r}")
