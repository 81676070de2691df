"""Bounded continuous path functionals (the catalog shared by the
variational minimizer and the Monte Carlo Laplace estimator).

Each functional is evaluated from per-path summaries (endpoint, running
directional maximum), so both the optimizer's deterministic paths and the
sampled stochastic paths use the same code.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class PathFunctional:
    functional_id: str = ""
    run_dir = None  # direction needed in the running-max summary, if any

    def of_summaries(self, x_end: np.ndarray, run_max: np.ndarray) -> np.ndarray:
        """Vectorized over paths: x_end (B, m), run_max (B,) -> (B,)."""
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantFunctional(PathFunctional):
    value: float
    functional_id: str = "constant"

    def of_summaries(self, x_end, run_max):
        return np.full(x_end.shape[0], self.value)


@dataclass(frozen=True)
class EndpointDistanceCap(PathFunctional):
    """g(f) = min(cap, |f(T) - target|^2)."""

    target: np.ndarray
    cap: float = 1.0
    functional_id: str = "endpoint-cap"

    def __post_init__(self):
        object.__setattr__(self, "target", np.atleast_1d(np.asarray(self.target, dtype=float)))

    def of_summaries(self, x_end, run_max):
        d = x_end - self.target
        return np.minimum(self.cap, (d * d).sum(axis=-1))


@dataclass(frozen=True)
class RunningMaxCap(PathFunctional):
    """g(f) = min(cap, max(0, level - max_t <dir, f(t)>)^2): the shortfall of
    the running directional maximum below a level, squared and capped."""

    direction: np.ndarray
    level: float
    cap: float = 1.0
    functional_id: str = "runmax-cap"

    def __post_init__(self):
        object.__setattr__(self, "direction", np.atleast_1d(np.asarray(self.direction, dtype=float)))

    @property
    def run_dir(self):
        return self.direction

    def of_summaries(self, x_end, run_max):
        short = np.maximum(0.0, self.level - run_max)
        return np.minimum(self.cap, short * short)


def functional_from_config(cfg: dict) -> PathFunctional:
    fid = cfg["id"]
    params = cfg.get("params", {})
    if fid == "constant":
        return ConstantFunctional(float(params["value"]))
    if fid == "endpoint-cap":
        return EndpointDistanceCap(params["target"], float(params.get("cap", 1.0)))
    if fid == "runmax-cap":
        return RunningMaxCap(params["direction"], float(params["level"]),
                             float(params.get("cap", 1.0)))
    raise ValueError(f"unknown functional id {fid!r}")
