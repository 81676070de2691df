"""Monte Carlo verification of the small-noise asymptotics: rare-event
probabilities across a noise-level grid, Girsanov-tilted importance
sampling, affine extrapolation of -eps*log(p) to eps -> 0, Laplace-integral
estimates and the controlled-limit convergence report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ensemble
from .action import solve_skeleton
from .functionals import PathFunctional
from .grids import Control, TimeGrid
from .models import Model
from .operators import MonotoneOperator


class LdpError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------

class EventSpec:
    """A measurable set of discrete paths, decided from per-path summaries."""

    kind: str = ""
    closed: bool = True
    run_dir = None      # direction for the running-max summary, if needed
    reference = None    # reference path for the sup-distance summary, if needed

    @property
    def event_id(self) -> str:
        raise NotImplementedError

    def indicator(self, summaries: dict) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class EndpointBeyondLevel(EventSpec):
    """{<direction, X(T)> >= level} (closed) or strict (open)."""

    direction: np.ndarray
    level: float
    closed: bool = True
    kind: str = "endpoint-beyond-level"

    def __post_init__(self):
        object.__setattr__(self, "direction", np.atleast_1d(np.asarray(self.direction, dtype=float)))

    @property
    def event_id(self):
        return f"{self.kind}:{self.level}:{'closed' if self.closed else 'open'}"

    def indicator(self, summaries):
        v = (summaries["x_end"] * self.direction).sum(axis=-1)
        return v >= self.level if self.closed else v > self.level


@dataclass(frozen=True)
class EndpointInBall(EventSpec):
    """{|X(T) - center| <= radius} (closed) or strict (open)."""

    center: np.ndarray
    radius: float
    closed: bool = True
    kind: str = "endpoint-in-ball"

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))

    @property
    def event_id(self):
        return f"{self.kind}:{self.radius}:{'closed' if self.closed else 'open'}"

    def indicator(self, summaries):
        d = summaries["x_end"] - self.center
        r = np.sqrt((d * d).sum(axis=-1))
        return r <= self.radius if self.closed else r < self.radius


@dataclass(frozen=True)
class SupTube(EventSpec):
    """{sup_t |X(t) - phi(t)| <= delta} for a reference path phi on the
    simulation grid."""

    reference_path: np.ndarray
    delta: float
    closed: bool = True
    kind: str = "sup-norm-tube-around-path"

    def __post_init__(self):
        object.__setattr__(self, "reference_path",
                           np.ascontiguousarray(self.reference_path, dtype=float))

    @property
    def reference(self):
        return self.reference_path

    @property
    def event_id(self):
        return f"{self.kind}:{self.delta}:{'closed' if self.closed else 'open'}"

    def indicator(self, summaries):
        s = summaries["sup_ref"]
        return s <= self.delta if self.closed else s < self.delta


@dataclass(frozen=True)
class RunningMaxAboveLevel(EventSpec):
    """{max_t <direction, X(t)> >= level}."""

    direction: np.ndarray
    level: float
    closed: bool = True
    kind: str = "running-max-above-level"

    def __post_init__(self):
        object.__setattr__(self, "direction", np.atleast_1d(np.asarray(self.direction, dtype=float)))

    @property
    def run_dir(self):
        return self.direction

    @property
    def event_id(self):
        return f"{self.kind}:{self.level}:{'closed' if self.closed else 'open'}"

    def indicator(self, summaries):
        v = summaries["run_max"]
        return v >= self.level if self.closed else v > self.level


def event_from_config(cfg: dict) -> EventSpec:
    kind = cfg["kind"]
    params = cfg.get("params", {})
    closed = bool(cfg.get("closed", True))
    if kind == "endpoint-beyond-level":
        return EndpointBeyondLevel(params["direction"], float(params["level"]), closed)
    if kind == "endpoint-in-ball":
        return EndpointInBall(params["center"], float(params["radius"]), closed)
    if kind == "sup-norm-tube-around-path":
        return SupTube(np.asarray(params["reference_path"], dtype=float),
                       float(params["delta"]), closed)
    if kind == "running-max-above-level":
        return RunningMaxAboveLevel(params["direction"], float(params["level"]), closed)
    raise ValueError(f"unknown event kind {kind!r}")


# ---------------------------------------------------------------------------
# estimates
# ---------------------------------------------------------------------------

@dataclass
class MCEstimate:
    epsilon: float
    event_id: str
    n_paths: int
    p_hat: float
    stderr: float
    neg_eps_log_p: float
    tilt: Control | None = field(default=None, repr=False)
    ess: float | None = None
    degenerate: bool = False

    def csv_row(self) -> list:
        return [self.epsilon, self.p_hat, self.stderr, self.neg_eps_log_p,
                self.ess if self.ess is not None else ""]


MIN_ESS = 10.0


def estimate_event(model: Model, op: MonotoneOperator, x0, eps_list, event: EventSpec,
                   grid: TimeGrid, n_paths: int, rng_seed: int,
                   tilt: Control | None = None, workers: int = 1,
                   stream: int = 1) -> list[MCEstimate]:
    """Event probability per noise level; in tilted mode the paths follow the
    controlled dynamics and are reweighted by the discrete Girsanov factor
    exp(sum_k [-hdot_k . dW_k / sqrt(eps) - |hdot_k|^2 dt / (2 eps)]), which
    makes the estimator unbiased for the discrete dynamics.  The same seed
    stream is reused across levels (common random numbers)."""
    if n_paths < 100:
        raise ValueError("n_paths must be >= 100")
    eps_list = [float(e) for e in eps_list]
    if any(not (0 < e <= 1) for e in eps_list):
        raise ValueError("all eps must lie in (0, 1]")
    estimates = []
    for eps in eps_list:
        summ = ensemble.run_summaries(
            model, op, x0, eps, grid, n_paths, rng_seed, stream=stream,
            control=tilt, ref=event.reference, run_dir=event.run_dir,
            workers=workers,
        )
        ind = event.indicator(summ)
        ess = None
        if tilt is not None:
            w = np.exp(summ["logw"])
            vals = w * ind
            # effective count of the contributing terms w*1_event (weights
            # off the event do not enter the estimator)
            s1, s2 = vals.sum(), (vals * vals).sum()
            ess = float(s1 * s1 / s2) if s2 > 0 else 0.0
        else:
            vals = ind.astype(float)
        p = float(vals.mean())
        sd = float(vals.std(ddof=1)) if n_paths > 1 else 0.0
        neg = float(-eps * np.log(p)) if p > 0 else np.inf
        estimates.append(MCEstimate(
            epsilon=eps, event_id=event.event_id, n_paths=n_paths,
            p_hat=p, stderr=sd / np.sqrt(n_paths), neg_eps_log_p=neg,
            tilt=tilt, ess=ess,
            degenerate=(p <= 0) or (ess is not None and ess < MIN_ESS),
        ))
    return estimates


@dataclass(frozen=True)
class SlopeReport:
    """Affine extrapolation -eps*log(p) ~ intercept + slope*eps; the
    intercept is the eps -> 0 rate estimate."""

    intercept: float
    slope: float
    eps_used: tuple
    residuals: tuple
    excluded: tuple
    reference_rate: float | None = None


def extrapolate_rate(estimates: list[MCEstimate], min_points: int = 3,
                     reference_rate: float | None = None) -> SlopeReport:
    """Least-squares affine fit of neg_eps_log_p against eps over the
    non-degenerate estimates."""
    good = [e for e in estimates if not e.degenerate and np.isfinite(e.neg_eps_log_p)]
    excluded = tuple(e.epsilon for e in estimates
                     if e.degenerate or not np.isfinite(e.neg_eps_log_p))
    if len({e.epsilon for e in good}) < min_points:
        raise LdpError(
            f"need >= {min_points} distinct non-degenerate eps; excluded: {list(excluded)}"
        )
    x = np.array([e.epsilon for e in good])
    y = np.array([e.neg_eps_log_p for e in good])
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (coef[0] + coef[1] * x)
    return SlopeReport(
        intercept=float(coef[0]), slope=float(coef[1]),
        eps_used=tuple(float(v) for v in x),
        residuals=tuple(float(v) for v in resid),
        excluded=excluded,
        reference_rate=reference_rate,
    )


def laplace_estimate(model: Model, op: MonotoneOperator, x0, eps: float,
                     functional: PathFunctional, grid: TimeGrid, n_paths: int,
                     rng_seed: int, workers: int = 1, stream: int = 2) -> float:
    """eps * log E[exp(-g(X)/eps)] by plain Monte Carlo, evaluated in
    shifted (log-sum-exp) form."""
    summ = ensemble.run_summaries(model, op, x0, eps, grid, n_paths, rng_seed,
                                  stream=stream, run_dir=functional.run_dir,
                                  workers=workers)
    g = functional.of_summaries(summ["x_end"], summ["run_max"])
    if not np.all(np.isfinite(g)):
        raise LdpError("functional produced non-finite values")
    gmin = float(g.min())
    mean = float(np.exp(-(g - gmin) / eps).mean())
    if mean <= 0 or not np.isfinite(mean):
        raise LdpError("all Laplace exponents underflowed")
    return float(-gmin + eps * np.log(mean))


@dataclass(frozen=True)
class ControlledLimitReport:
    """E[sup_t |X^{eps,h} - X^h|^2] per noise level under common noise."""

    eps_list: tuple
    estimates: tuple
    threshold: float
    decreasing: bool
    small_enough: bool
    passed: bool


def controlled_limit_report(model: Model, op: MonotoneOperator, x0, h: Control,
                            eps_list, grid: TimeGrid, n_paths: int, rng_seed: int,
                            threshold_frac: float = 0.05, workers: int = 1,
                            stream: int = 3) -> ControlledLimitReport:
    """Convergence of the controlled stochastic paths to the deterministic
    controlled limit as the noise vanishes: the estimates must decrease in
    eps and the smallest-eps value must fall below
    threshold_frac * sup_t |X^h|^2 + 0.01."""
    skeleton = solve_skeleton(model, op, x0, h, grid)
    ref = np.ascontiguousarray(skeleton.X)
    eps_sorted = sorted(float(e) for e in eps_list)
    ests = {}
    for eps in eps_sorted:
        summ = ensemble.run_summaries(model, op, x0, eps, grid, n_paths, rng_seed,
                                      stream=stream, control=h, ref=ref,
                                      workers=workers)
        ests[eps] = float((summ["sup_ref"] ** 2).mean())
    ordered = [ests[e] for e in eps_sorted]          # increasing eps
    decreasing = all(ordered[i] < ordered[i + 1] for i in range(len(ordered) - 1))
    sup_sq = float((np.sqrt((skeleton.X * skeleton.X).sum(axis=1)).max()) ** 2)
    threshold = threshold_frac * sup_sq + 0.01
    small_enough = ordered[0] < threshold
    return ControlledLimitReport(
        eps_list=tuple(eps_sorted),
        estimates=tuple(ordered),
        threshold=threshold,
        decreasing=decreasing,
        small_enough=small_enough,
        passed=decreasing and small_enough,
    )
