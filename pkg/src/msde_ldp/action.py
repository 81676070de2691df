"""Deterministic controlled limit paths and rate estimates by action
minimization over piecewise-constant controls.

The rate of an endpoint event is estimated by minimizing

    0.5 * ||hdot||^2_{L^2}  +  (rho/2) * |X^h(T) - target|^2

by gradient descent with Armijo backtracking, with penalty continuation over
rho (the forward map through the resolvent is only piecewise smooth at the
constraint boundary, so penalties keep the problem unconstrained).  Gradients
default to forward finite differences per control coordinate; a discrete
adjoint is available as a fast path and must agree with the finite
differences wherever no constraint is active.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ensemble
from .domains import AxisBox, ConvexDomain, EuclideanBall, HalfSpace, Polytope
from .functionals import PathFunctional
from .grids import Control, TimeGrid
from .models import Model
from .operators import IndicatorOperator, MonotoneOperator
from .simulate import SolutionPath, simulate_controlled


def action_norm(h: Control) -> float:
    """Squared control norm: integral of |hdot|^2 (exact for piecewise
    constants)."""
    return h.squared_norm()


def solve_skeleton(model: Model, op: MonotoneOperator, x0, h: Control,
                   grid: TimeGrid) -> SolutionPath:
    """The zero-noise controlled path (resolvent-step Euler with drift
    b + sigma hdot)."""
    return simulate_controlled(model, op, x0, 0.0, h, grid)


@dataclass(frozen=True)
class RateOptions:
    n_ctrl: int = 32
    n_steps: int = 512
    tol: float = 1e-6            # gradient norm for `converged`
    resid: float = 1e-4          # endpoint residual for `converged`
    restarts: int = 3
    restart_scale: float = 1.0
    penalties: tuple = (1e2, 1e3, 1e4)
    max_iter: int = 500          # per penalty stage
    gradient: str = "fd"         # "fd" | "adjoint"
    fd_step: float = 1e-6
    seed: int = 0


@dataclass
class RateResult:
    value: float
    control: Control
    skeleton: SolutionPath
    residual: float
    iterations: int
    grad_norm: float
    converged: bool
    runs: list = field(default_factory=list, repr=False)


class _EndpointProblem:
    def __init__(self, model, op, x0, target, sim_grid, ctrl_grid):
        self.model = model
        self.op = op
        self.x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        self.target = np.atleast_1d(np.asarray(target, dtype=float))
        self.sim_grid = sim_grid
        self.ctrl_grid = ctrl_grid
        self.repeat = sim_grid.steps // ctrl_grid.steps
        self.dt_c = ctrl_grid.dt

    def values(self, hmats: np.ndarray, rho: float) -> np.ndarray:
        """Objective for a stack of controls (B, M, d)."""
        hdots = np.repeat(hmats, self.repeat, axis=1)
        summ = ensemble.skeleton_summaries(self.model, self.op, self.x0,
                                           self.sim_grid, hdots)
        act = 0.5 * (hmats * hmats).sum(axis=(1, 2)) * self.dt_c
        d = summ["x_end"] - self.target
        return act + 0.5 * rho * (d * d).sum(axis=-1)

    def endpoint(self, h: np.ndarray) -> np.ndarray:
        hdots = np.repeat(h[None, :, :], self.repeat, axis=1)
        return ensemble.skeleton_summaries(self.model, self.op, self.x0,
                                           self.sim_grid, hdots)["x_end"][0]


class _FunctionalProblem:
    def __init__(self, model, op, x0, functional: PathFunctional, sim_grid, ctrl_grid):
        self.model = model
        self.op = op
        self.x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        self.functional = functional
        self.sim_grid = sim_grid
        self.ctrl_grid = ctrl_grid
        self.repeat = sim_grid.steps // ctrl_grid.steps
        self.dt_c = ctrl_grid.dt

    def values(self, hmats: np.ndarray, rho: float = 0.0) -> np.ndarray:
        hdots = np.repeat(hmats, self.repeat, axis=1)
        summ = ensemble.skeleton_summaries(self.model, self.op, self.x0,
                                           self.sim_grid, hdots,
                                           run_dir=self.functional.run_dir)
        act = 0.5 * (hmats * hmats).sum(axis=(1, 2)) * self.dt_c
        return act + self.functional.of_summaries(summ["x_end"], summ["run_max"])


def _fd_gradient(problem, h: np.ndarray, rho: float, fd_step: float):
    """Forward differences of the full objective per control coordinate,
    batched through one stack of deterministic solves."""
    M, d = h.shape
    deltas = fd_step * (1.0 + np.abs(h))
    batch = np.repeat(h[None, :, :], 1 + M * d, axis=0)
    for idx in range(M * d):
        j, l = divmod(idx, d)
        batch[1 + idx, j, l] += deltas[j, l]
    vals = problem.values(batch, rho)
    g = (vals[1:] - vals[0]).reshape(M, d) / deltas
    return g, float(vals[0])


def _descend(problem, h0: np.ndarray, rho: float, opts: RateOptions, grad_fn):
    """Armijo-backtracking gradient descent; returns (h, f, grad_norm, iters).

    Stops on the gradient tolerance, on a failed line search, or after a few
    iterations of stagnant objective (the finite-difference gradient has an
    O(fd_step) bias floor, below which further descent is noise)."""
    h = h0.copy()
    alpha = 1.0
    g, f = grad_fn(problem, h, rho)
    gn = float(np.sqrt((g * g).sum()))
    iters = 0
    stalled = 0
    for _ in range(opts.max_iter):
        if gn < opts.tol:
            break
        alpha = min(alpha * 2.0, 1e3)
        while True:
            h_try = h - alpha * g
            f_try = float(problem.values(h_try[None, :, :], rho)[0])
            if f_try <= f - 1e-4 * alpha * gn * gn:
                break
            alpha *= 0.5
            if alpha < 1e-16:
                return h, f, gn, iters
        stalled = stalled + 1 if f - f_try <= 1e-13 * max(1.0, abs(f)) else 0
        h = h_try
        iters += 1
        g, f = grad_fn(problem, h, rho)
        gn = float(np.sqrt((g * g).sum()))
        if stalled >= 3:
            break
    return h, f, gn, iters


def _minimize_multistart(problem, noise_dim, opts: RateOptions, grad_fn, penalties):
    M = problem.ctrl_grid.steps
    rng = np.random.default_rng(np.random.SeedSequence([int(opts.seed), 77]))
    starts = [np.zeros((M, noise_dim))]
    for _ in range(opts.restarts):
        starts.append(opts.restart_scale * rng.standard_normal((M, noise_dim)))
    runs = []
    for order, h0 in enumerate(starts):
        h = h0
        total_iters = 0
        for rho in penalties:
            h, f, gn, iters = _descend(problem, h, rho, opts, grad_fn)
            total_iters += iters
        runs.append({"order": order, "h": h, "grad_norm": gn, "iterations": total_iters})
    return runs


def minimize_endpoint_rate(model: Model, op: MonotoneOperator, x0, target,
                           T: float, opts: RateOptions | None = None) -> RateResult:
    """Rate of the endpoint event {X(T) = target}: half the squared norm of
    the cheapest control steering the zero-noise path to the target."""
    opts = opts or RateOptions()
    if opts.n_steps % opts.n_ctrl != 0:
        raise ValueError("n_steps must be a multiple of n_ctrl")
    sim_grid = TimeGrid(T, opts.n_steps)
    ctrl_grid = TimeGrid(T, opts.n_ctrl)
    problem = _EndpointProblem(model, op, x0, target, sim_grid, ctrl_grid)
    grad_fn = _gradient_function(opts, problem)
    runs = _minimize_multistart(problem, model.noise_dim, opts, grad_fn, opts.penalties)

    for run in runs:
        e = problem.endpoint(run["h"])
        run["residual"] = float(np.linalg.norm(e - problem.target))
        run["value"] = 0.5 * float((run["h"] ** 2).sum()) * ctrl_grid.dt
        run["feasible"] = run["residual"] <= opts.resid
    feasible = [r for r in runs if r["feasible"]]
    pool = feasible if feasible else runs
    best = min(pool, key=lambda r: (round(r["value"], 12), r["order"]))

    control = Control(ctrl_grid, best["h"])
    skeleton = solve_skeleton(model, op, problem.x0, control, sim_grid)
    return RateResult(
        value=best["value"],
        control=control,
        skeleton=skeleton,
        residual=best["residual"],
        iterations=best["iterations"],
        grad_norm=best["grad_norm"],
        converged=bool(best["grad_norm"] < opts.tol and best["residual"] <= opts.resid),
        runs=[{k: v for k, v in r.items() if k != "h"} for r in runs],
    )


def _gradient_function(opts, problem):
    if opts.gradient == "fd":
        return lambda p, h, rho: _fd_gradient(p, h, rho, opts.fd_step)
    if opts.gradient == "adjoint":
        if not isinstance(problem, _EndpointProblem):
            raise ValueError("adjoint gradients are implemented for endpoint objectives")

        def g(p, h, rho):
            grad = adjoint_gradient(p.model, p.op, p.x0, p.target, p.sim_grid,
                                    p.ctrl_grid, h, rho)
            f = float(p.values(h[None, :, :], rho)[0])
            return grad, f

        return g
    raise ValueError(f"unknown gradient mode {opts.gradient!r}")


@dataclass
class FunctionalMinimum:
    value: float
    control: Control
    iterations: int
    grad_norm: float


def minimize_functional_cost(model: Model, op: MonotoneOperator, x0,
                             functional: PathFunctional, T: float,
                             opts: RateOptions | None = None) -> FunctionalMinimum:
    """inf over controls of g(X^h) + 0.5 ||hdot||^2 for a catalog functional
    g; this is the deterministic side of the Laplace-principle comparison."""
    opts = opts or RateOptions()
    if opts.n_steps % opts.n_ctrl != 0:
        raise ValueError("n_steps must be a multiple of n_ctrl")
    sim_grid = TimeGrid(T, opts.n_steps)
    ctrl_grid = TimeGrid(T, opts.n_ctrl)
    problem = _FunctionalProblem(model, op, x0, functional, sim_grid, ctrl_grid)
    grad_fn = lambda p, h, rho: _fd_gradient(p, h, rho, opts.fd_step)
    runs = _minimize_multistart(problem, model.noise_dim, opts, grad_fn, (0.0,))
    for run in runs:
        run["value"] = float(problem.values(run["h"][None, :, :])[0])
    best = min(runs, key=lambda r: (round(r["value"], 12), r["order"]))
    return FunctionalMinimum(
        value=best["value"],
        control=Control(ctrl_grid, best["h"]),
        iterations=best["iterations"],
        grad_norm=best["grad_norm"],
    )


# ---------------------------------------------------------------------------
# discrete adjoint
# ---------------------------------------------------------------------------

def _projection_jacobian_apply(domain: ConvexDomain, y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Apply the (symmetric) generalized Jacobian of the projection at the
    pre-projection point y; on the boundary this selects the active-face
    projection."""
    if isinstance(domain, AxisBox):
        if domain.is_free:
            return w
        active = (y < domain.lo) | (y > domain.hi)
        out = w.copy()
        out[active] = 0.0
        return out
    if isinstance(domain, HalfSpace):
        if float(y @ domain.normal) >= domain.offset:
            return w
        return w - domain.normal * float(domain.normal @ w)
    if isinstance(domain, EuclideanBall):
        d = y - domain.center
        nrm = float(np.linalg.norm(d))
        if nrm <= domain.radius:
            return w
        u = d / nrm
        return (domain.radius / nrm) * (w - u * float(u @ w))
    if isinstance(domain, Polytope):
        slack = domain.normals @ domain.project(y) - domain.offsets
        act = slack <= 1e-9
        if not act.any():
            return w
        N = domain.normals[act]
        coef, *_ = np.linalg.lstsq(N @ N.T, N @ w, rcond=None)
        return w - N.T @ coef
    raise ValueError(f"no projection Jacobian for domain kind {domain.kind!r}")


def adjoint_gradient(model: Model, op: MonotoneOperator, x0, target,
                     sim_grid: TimeGrid, ctrl_grid: TimeGrid,
                     h: np.ndarray, rho: float) -> np.ndarray:
    """Gradient of 0.5||hdot||^2 + (rho/2)|X^h(T) - target|^2 by one backward
    pass over the stored forward path."""
    if not isinstance(op, IndicatorOperator):
        raise ValueError("adjoint gradients require an indicator operator")
    target = np.atleast_1d(np.asarray(target, dtype=float))
    control = Control(ctrl_grid, h)
    path = simulate_controlled(model, op, x0, 0.0, control, sim_grid, store_pre=True)
    hdot = control.on_grid(sim_grid)
    repeat = sim_grid.steps // ctrl_grid.steps
    dt = sim_grid.dt

    g = h * ctrl_grid.dt
    lam = rho * (path.X[-1] - target)
    for k in range(sim_grid.steps - 1, -1, -1):
        lam_post = _projection_jacobian_apply(op.domain, path.pre_points[k], lam)
        xk = path.X[k]
        g[k // repeat] += model.sigma_transpose_apply(xk, lam_post) * dt
        lam = lam_post + dt * (model.drift_jacobian(xk).T @ lam_post)
        dsig = model.sigma_apply_jacobian(xk, hdot[k])
        if dsig.any():
            lam = lam + dt * (dsig.T @ lam_post)
    return g


def fd_endpoint_gradient(model: Model, op: MonotoneOperator, x0, target,
                         sim_grid: TimeGrid, ctrl_grid: TimeGrid,
                         h: np.ndarray, rho: float, fd_step: float = 1e-6) -> np.ndarray:
    """Forward-difference gradient of the same penalized endpoint objective
    (the reference for gradient checks)."""
    problem = _EndpointProblem(model, op, x0, target, sim_grid, ctrl_grid)
    g, _ = _fd_gradient(problem, h, rho, fd_step)
    return g
