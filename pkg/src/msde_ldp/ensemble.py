"""Batched Monte Carlo path ensembles.

Paths are generated in fixed-size batches with counter-derived RNG streams
(one child seed per (seed, stream, batch index) triple), so results are
independent of the worker count and identical across runs: batch outputs are
written into preallocated slices and all downstream reductions run over
arrays assembled in batch order.  Reusing the same (seed, stream) for several
noise levels yields common random numbers across levels.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import kernels
from .grids import Control, TimeGrid
from .models import Model
from .operators import IndicatorOperator, MonotoneOperator
from .simulate import _propagate

BATCH_SIZE = 4096

SUMMARY_KEYS = ("x_end", "logw", "tv_end", "sup_norm", "sup_ref", "run_max")


def batch_rng(seed: int, stream: int, batch_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), int(stream), int(batch_index)])
    )


def _domain_of(op: MonotoneOperator):
    """Kernel-eligible domain, or None when the operator needs the general
    stepping loop."""
    if isinstance(op, IndicatorOperator):
        return op.domain
    return None


def _map_batches(fn, n_batches: int, workers: int):
    if workers <= 1 or n_batches <= 1:
        for b in range(n_batches):
            fn(b)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fn, range(n_batches)))


def _batch_bounds(n_paths: int):
    n_batches = (n_paths + BATCH_SIZE - 1) // BATCH_SIZE
    return n_batches, [(b * BATCH_SIZE, min((b + 1) * BATCH_SIZE, n_paths)) for b in range(n_batches)]


def _general_summaries(model, op, x0, eps, grid, dw, hdot, ref, run_dir):
    """Sequential single-path fallback for operators without a kernel domain
    (1-d filled graphs, Lipschitz sums); used at small path counts only."""
    n = dw.shape[0] if dw is not None else (hdot.shape[0] if hdot is not None else 1)
    out = {k: np.zeros(n) for k in SUMMARY_KEYS if k != "x_end"}
    out["x_end"] = np.empty((n, model.dim))
    sqrt_eps = np.sqrt(eps) if eps > 0 else 0.0
    hshared = hdot is not None and hdot.shape[0] == 1
    for i in range(n):
        hrow = None if hdot is None else (hdot[0] if hshared else hdot[i])
        dwrow = None if dw is None else dw[i]
        path = _propagate(model, op, x0, eps, grid, dw=dwrow, hdot=hrow)
        out["x_end"][i] = path.X[-1]
        out["tv_end"][i] = path.total_variation[-1]
        out["sup_norm"][i] = np.sqrt((path.X * path.X).sum(axis=1)).max()
        if ref is not None:
            d = path.X - ref
            out["sup_ref"][i] = np.sqrt((d * d).sum(axis=1)).max()
        if run_dir is not None:
            out["run_max"][i] = (path.X * run_dir).sum(axis=1).max()
        if hrow is not None and dwrow is not None and eps > 0:
            a = (hrow * dwrow).sum(axis=1)
            q = (hrow * hrow).sum(axis=1)
            out["logw"][i] = float((-(a / sqrt_eps) - q * (grid.dt / (2.0 * eps))).sum())
    return out


def run_summaries(model: Model, op: MonotoneOperator, x0, eps: float, grid: TimeGrid,
                  n_paths: int, seed: int, stream: int = 0,
                  control: Control | None = None, ref=None, run_dir=None,
                  workers: int = 1) -> dict:
    """Per-path summaries (endpoint, log Girsanov weight, total variation,
    running sup norms) over a seeded batched ensemble."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    hdot = control.on_grid(grid)[None, :, :] if control is not None else None
    ref = None if ref is None else np.ascontiguousarray(ref, dtype=float)
    run_dir = None if run_dir is None else np.ascontiguousarray(run_dir, dtype=float)
    domain = _domain_of(op)

    out = {k: np.empty(n_paths) for k in SUMMARY_KEYS if k != "x_end"}
    out["x_end"] = np.empty((n_paths, model.dim))
    n_batches, bounds = _batch_bounds(n_paths)

    def do_batch(b):
        lo, hi = bounds[b]
        rng = batch_rng(seed, stream, b)
        dw = rng.standard_normal((hi - lo, grid.steps, model.noise_dim)) * np.sqrt(grid.dt)
        if domain is not None:
            res = kernels.run_batch(model, domain, x0, eps, grid.dt, grid.steps,
                                    hi - lo, dw=dw, hdot=hdot, ref=ref, run_dir=run_dir)
        else:
            res = _general_summaries(model, op, x0, eps, grid, dw, hdot, ref, run_dir)
        for k in SUMMARY_KEYS:
            out[k][lo:hi] = res[k]

    _map_batches(do_batch, n_batches, workers)
    return out


def run_path_ensemble(model: Model, op: MonotoneOperator, x0, eps: float, grid: TimeGrid,
                      n_paths: int, seed: int, stream: int = 0,
                      control: Control | None = None, workers: int = 1) -> dict:
    """Full-path ensemble: X (n, N+1, m), K, tv.  Memory scales with
    n_paths * steps; intended for moderate ensembles."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    hdot = control.on_grid(grid)[None, :, :] if control is not None else None
    domain = _domain_of(op)
    m = model.dim
    out = {
        "X": np.empty((n_paths, grid.steps + 1, m)),
        "K": np.empty((n_paths, grid.steps + 1, m)),
        "tv": np.empty((n_paths, grid.steps + 1)),
    }
    n_batches, bounds = _batch_bounds(n_paths)

    def do_batch(b):
        lo, hi = bounds[b]
        rng = batch_rng(seed, stream, b)
        dw = rng.standard_normal((hi - lo, grid.steps, model.noise_dim)) * np.sqrt(grid.dt)
        if domain is not None:
            res = kernels.run_batch(model, domain, x0, eps, grid.dt, grid.steps,
                                    hi - lo, dw=dw, hdot=hdot, want_paths=True)
            out["X"][lo:hi] = res["X"]
            out["K"][lo:hi] = res["K"]
            out["tv"][lo:hi] = res["tv"]
        else:
            hshared = hdot is not None and hdot.shape[0] == 1
            for i in range(hi - lo):
                hrow = None if hdot is None else (hdot[0] if hshared else hdot[i])
                path = _propagate(model, op, x0, eps, grid, dw=dw[i], hdot=hrow)
                out["X"][lo + i] = path.X
                out["K"][lo + i] = path.K
                out["tv"][lo + i] = path.total_variation

    _map_batches(do_batch, n_batches, workers)
    return out


def skeleton_summaries(model: Model, op: MonotoneOperator, x0, grid: TimeGrid,
                       hdots: np.ndarray, run_dir=None) -> dict:
    """Deterministic controlled paths for a stack of controls (B, N, d),
    e.g. the finite-difference perturbations of an optimizer iterate."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    domain = _domain_of(op)
    run_dir = None if run_dir is None else np.ascontiguousarray(run_dir, dtype=float)
    if domain is not None:
        return kernels.run_batch(model, domain, x0, 0.0, grid.dt, grid.steps,
                                 hdots.shape[0], hdot=hdots, run_dir=run_dir)
    return _general_summaries(model, op, x0, 0.0, grid, None, hdots, None, run_dir)


def lipschitz_uniformity(model: Model, op: MonotoneOperator, x0, delta, eps_list,
                         grid: TimeGrid, n_paths: int, seed: int, stream: int = 5,
                         workers: int = 1) -> dict:
    """E[sup_t |X(t, x0) - X(t, x0 + delta)|^2] / |delta|^2 per noise level.

    Reusing the same (seed, stream) makes the noise common across levels and
    between the two starting points."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    xb = x0 + delta
    d2 = float((delta * delta).sum())
    ratios = {}
    for eps in eps_list:
        ra = run_path_ensemble(model, op, x0, eps, grid, n_paths, seed, stream=stream,
                               workers=workers)
        rb = run_path_ensemble(model, op, xb, eps, grid, n_paths, seed, stream=stream,
                               workers=workers)
        diff = ra["X"] - rb["X"]
        sup = np.sqrt((diff * diff).sum(axis=2)).max(axis=1)
        ratios[float(eps)] = float((sup * sup).mean() / d2)
    return ratios


def moment_uniformity(model: Model, op: MonotoneOperator, x0, eps_list,
                      grid: TimeGrid, n_paths: int, seed: int, stream: int = 6,
                      workers: int = 1) -> dict:
    """E[sup_t |X|^2] + E|K|_T per noise level (common noise across levels)."""
    out = {}
    for eps in eps_list:
        s = run_summaries(model, op, x0, eps, grid, n_paths, seed, stream=stream,
                          workers=workers)
        sup2 = float((s["sup_norm"] ** 2).mean())
        tv = float(s["tv_end"].mean())
        out[float(eps)] = {"sup_sq": sup2, "tv": tv, "combined": sup2 + tv}
    return out
