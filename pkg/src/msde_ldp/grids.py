"""Time grids, piecewise-constant controls and Brownian driving paths."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, horizon] with `steps` intervals."""

    horizon: float
    steps: int

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt


@dataclass(frozen=True)
class Control:
    """Piecewise-constant control: `values[j]` is the derivative on the j-th
    interval of `grid`.  Shape (M, d) with M = grid.steps."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.steps:
            raise ValueError(
                f"control has {v.shape[0]} rows, grid has {self.grid.steps} intervals"
            )
        object.__setattr__(self, "values", v)

    @property
    def noise_dim(self) -> int:
        return self.values.shape[1]

    def squared_norm(self) -> float:
        """Exact integral of |values|^2 over [0, horizon]."""
        return float((self.values**2).sum() * self.grid.dt)

    def on_grid(self, sim_grid: TimeGrid) -> np.ndarray:
        """Expand to a finer uniform grid, (sim_grid.steps, d).

        The simulation grid must refine the control grid (same horizon,
        step count a multiple of M); with a dyadic refinement factor the
        expansion preserves the squared norm exactly.
        """
        if not math.isclose(sim_grid.horizon, self.grid.horizon, rel_tol=1e-12):
            raise ValueError("control and simulation grids have different horizons")
        if sim_grid.steps % self.grid.steps != 0:
            raise ValueError(
                f"simulation steps {sim_grid.steps} not a multiple of control intervals {self.grid.steps}"
            )
        r = sim_grid.steps // self.grid.steps
        return np.repeat(self.values, r, axis=0)

    @classmethod
    def zero(cls, grid: TimeGrid, noise_dim: int) -> "Control":
        return cls(grid, np.zeros((grid.steps, noise_dim)))

    @classmethod
    def constant(cls, grid: TimeGrid, value) -> "Control":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.tile(v, (grid.steps, 1)))


@dataclass(frozen=True)
class BrownianPath:
    """Brownian increments on a grid: `increments[k]` ~ N(0, dt I_d)."""

    grid: TimeGrid
    increments: np.ndarray
    seed: int | None = field(default=None)

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim == 1:
            inc = inc[:, None]
        if inc.shape[0] != self.grid.steps:
            raise ValueError("increments must have grid.steps rows")
        object.__setattr__(self, "increments", inc)

    @property
    def noise_dim(self) -> int:
        return self.increments.shape[1]

    @classmethod
    def generate(cls, grid: TimeGrid, noise_dim: int, seed: int) -> "BrownianPath":
        rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
        inc = rng.standard_normal((grid.steps, noise_dim)) * np.sqrt(grid.dt)
        return cls(grid, inc, seed=int(seed))
