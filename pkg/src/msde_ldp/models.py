"""Drift/diffusion models with declared one-sided and Lipschitz constants.

The coefficient hypotheses (one-sided drift monotonicity, Hilbert-Schmidt
Lipschitz diffusion, polynomial drift growth) are global analytic conditions;
``verify_coefficient_bounds`` checks them empirically on sampled pairs inside
a radius, which is the testable surrogate.

Built-ins: ``brownian`` (zero drift, identity diffusion), ``ou``
(b(x) = -lam*x), ``doublewell`` (1-d gradient of (x^2-1)^2/4) and
``statedep`` (diagonal diffusion 1 + c*min(|x_i|, clip)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# kernel model ids
MODEL_BROWNIAN = 0
MODEL_OU = 1
MODEL_DOUBLEWELL = 2
MODEL_STATEDEP = 3


class ModelEvalError(RuntimeError):
    pass


class Model:
    """Base class.  Subclasses define batched coefficients; all evaluation is
    pure and deterministic."""

    name: str = ""
    has_drift: bool = True

    def __init__(self, dim: int, noise_dim: int, c_b: float, c_sigma: float,
                 c_b_prime: float, growth_n: int):
        self.dim = int(dim)
        self.noise_dim = int(noise_dim)
        self.c_b = float(c_b)
        self.c_sigma = float(c_sigma)
        self.c_b_prime = float(c_b_prime)
        self.growth_n = int(growth_n)

    # -- batched coefficients (rows are states) ----------------------------
    def drift_batch(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sigma_apply_batch(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """sigma(x) @ v rows; v may have a single broadcast row."""
        raise NotImplementedError

    # -- single-point surface ----------------------------------------------
    def drift(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        b = self.drift_batch(x[None, :])[0]
        if not np.all(np.isfinite(b)):
            raise ModelEvalError(f"drift overflow at |x| = {np.linalg.norm(x):.3e}")
        return b

    def diffusion(self, x) -> np.ndarray:
        """The full (dim, noise_dim) matrix."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        cols = self.sigma_apply_batch(
            np.tile(x, (self.noise_dim, 1)), np.eye(self.noise_dim)
        )
        mat = cols.T
        if not np.all(np.isfinite(mat)):
            raise ModelEvalError(f"diffusion overflow at |x| = {np.linalg.norm(x):.3e}")
        return mat

    # -- derivatives for the adjoint pass -----------------------------------
    def drift_jacobian(self, x) -> np.ndarray:
        raise NotImplementedError

    def sigma_apply_jacobian(self, x, v) -> np.ndarray:
        """d/dx [sigma(x) @ v] as a (dim, dim) matrix."""
        return np.zeros((self.dim, self.dim))

    def sigma_transpose_apply(self, x, w) -> np.ndarray:
        """sigma(x)^T @ w, (noise_dim,)."""
        return self.diffusion(x).T @ np.asarray(w, dtype=float)

    def sigma_hs_distance_batch(self, x, y) -> np.ndarray:
        """Rowwise Hilbert-Schmidt distance |sigma(x) - sigma(y)|_HS."""
        return np.array([
            np.linalg.norm(self.diffusion(a) - self.diffusion(b)) for a, b in zip(x, y)
        ])

    def kernel_encoding(self):
        """(model_id, params 1-d float array)."""
        raise NotImplementedError


class _IdentityDiffusion(Model):
    """Rectangular identity diffusion shared by brownian/ou/doublewell."""

    def sigma_apply_batch(self, x, v):
        v = np.asarray(v, dtype=float)
        if self.dim == self.noise_dim:
            return v
        md = min(self.dim, self.noise_dim)
        out = np.zeros((v.shape[0], self.dim))
        out[:, :md] = v[:, :md]
        return out

    def sigma_hs_distance_batch(self, x, y):
        return np.zeros(x.shape[0])

    def sigma_transpose_apply(self, x, w):
        w = np.asarray(w, dtype=float)
        out = np.zeros(self.noise_dim)
        md = min(self.dim, self.noise_dim)
        out[:md] = w[:md]
        return out


class Brownian(_IdentityDiffusion):
    name = "brownian"
    has_drift = False

    def __init__(self, dim: int, noise_dim: int | None = None):
        super().__init__(dim, noise_dim or dim, c_b=0.0, c_sigma=0.0, c_b_prime=0.0, growth_n=1)

    def drift_batch(self, x):
        return np.zeros_like(x)

    def drift_jacobian(self, x):
        return np.zeros((self.dim, self.dim))

    def kernel_encoding(self):
        return MODEL_BROWNIAN, np.empty(0)


class OrnsteinUhlenbeck(_IdentityDiffusion):
    name = "ou"

    def __init__(self, dim: int, lam: float = 1.0, noise_dim: int | None = None):
        if lam <= 0:
            raise ValueError("lam must be positive")
        # one-sided constant of -lam*x is -lam; 0 is a valid declared bound
        super().__init__(dim, noise_dim or dim, c_b=0.0, c_sigma=0.0, c_b_prime=lam, growth_n=1)
        self.lam = float(lam)

    def drift_batch(self, x):
        return (-self.lam) * x

    def drift_jacobian(self, x):
        return -self.lam * np.eye(self.dim)

    def kernel_encoding(self):
        return MODEL_OU, np.array([self.lam])


class DoubleWell(_IdentityDiffusion):
    """1-d gradient descent in the double-well potential (x^2 - 1)^2 / 4,
    i.e. b(x) = x - x^3.  The one-sided constant is sup b' = 1 (at x = 0)."""

    name = "doublewell"

    def __init__(self):
        super().__init__(1, 1, c_b=1.0, c_sigma=0.0, c_b_prime=1.0, growth_n=3)

    def drift_batch(self, x):
        return x - x * x * x

    def drift_jacobian(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.array([[1.0 - 3.0 * x[0] * x[0]]])

    def kernel_encoding(self):
        return MODEL_DOUBLEWELL, np.empty(0)


class StateDependentDiffusion(Model):
    """Zero drift, diagonal diffusion sigma_ii(x) = 1 + c * min(|x_i|, clip).
    The clip keeps sigma bounded; the Lipschitz constant is c either way."""

    name = "statedep"
    has_drift = False

    def __init__(self, dim: int, c: float = 0.5, clip: float = 10.0):
        super().__init__(dim, dim, c_b=0.0, c_sigma=c, c_b_prime=0.0, growth_n=1)
        self.c = float(c)
        self.clip = float(clip)

    def drift_batch(self, x):
        return np.zeros_like(x)

    def drift_jacobian(self, x):
        return np.zeros((self.dim, self.dim))

    def sigma_apply_batch(self, x, v):
        return (1.0 + self.c * np.minimum(np.abs(x), self.clip)) * v

    def sigma_apply_jacobian(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        inner = self.c * np.sign(x) * (np.abs(x) < self.clip) * v
        return np.diag(inner)

    def sigma_hs_distance_batch(self, x, y):
        d = self.c * (np.minimum(np.abs(x), self.clip) - np.minimum(np.abs(y), self.clip))
        return np.sqrt((d * d).sum(axis=1))

    def sigma_transpose_apply(self, x, w):
        return (1.0 + self.c * np.minimum(np.abs(x), self.clip)) * np.asarray(w, dtype=float)

    def kernel_encoding(self):
        return MODEL_STATEDEP, np.array([self.c, self.clip])


def make_model(name: str, dim: int = 1, noise_dim: int | None = None, **params) -> Model:
    if name == "brownian":
        return Brownian(dim, noise_dim)
    if name == "ou":
        return OrnsteinUhlenbeck(dim, params.get("lam", 1.0), noise_dim)
    if name == "doublewell":
        if dim != 1 or (noise_dim or 1) != 1:
            raise ValueError("doublewell is one-dimensional")
        return DoubleWell()
    if name == "statedep":
        if noise_dim is not None and noise_dim != dim:
            raise ValueError("statedep has diagonal diffusion (noise_dim == dim)")
        return StateDependentDiffusion(dim, params.get("c", 0.5), params.get("clip", 10.0))
    raise ValueError(f"unknown model {name!r}")


def model_from_config(cfg: dict) -> Model:
    params = dict(cfg.get("params", {}))
    dim = int(cfg.get("dim", 1))
    model = make_model(cfg["name"], dim=dim, noise_dim=cfg.get("noise_dim"), **params)
    consts = cfg.get("constants")
    if consts:
        model.c_b = float(consts.get("c_b", model.c_b))
        model.c_sigma = float(consts.get("c_sigma", model.c_sigma))
        model.c_b_prime = float(consts.get("c_b_prime", model.c_b_prime))
        model.growth_n = int(consts.get("growth_n", model.growth_n))
    return model


@dataclass(frozen=True)
class CoefficientBoundReport:
    max_one_sided: float
    max_sigma_ratio: float
    max_growth_ratio: float
    declared: tuple
    passed: bool


def verify_coefficient_bounds(model: Model, sample_count: int, radius: float,
                              rng_seed: int, tol: float = 1e-6) -> CoefficientBoundReport:
    """Empirical maxima of the three coefficient ratios over sampled pairs in
    a ball, compared against the declared constants."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed)]))

    def ball(n):
        g = rng.standard_normal((n, model.dim))
        g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
        return radius * rng.uniform(size=(n, 1)) ** (1.0 / model.dim) * g

    x, y = ball(sample_count), ball(sample_count)
    dx = x - y
    nrm2 = (dx * dx).sum(axis=1)
    keep = nrm2 > 1e-20
    x, y, dx, nrm2 = x[keep], y[keep], dx[keep], nrm2[keep]

    one_sided = ((dx * (model.drift_batch(x) - model.drift_batch(y))).sum(axis=1)) / nrm2
    max_one_sided = float(one_sided.max())

    sig_hs = model.sigma_hs_distance_batch(x, y)
    max_sigma_ratio = float((sig_hs / np.sqrt(nrm2)).max())

    bx = model.drift_batch(x)
    growth = np.linalg.norm(bx, axis=1) / (1.0 + np.linalg.norm(x, axis=1) ** model.growth_n)
    max_growth_ratio = float(growth.max())

    passed = (
        max_one_sided <= model.c_b + tol
        and max_sigma_ratio <= model.c_sigma + tol
        and max_growth_ratio <= model.c_b_prime + tol
    )
    return CoefficientBoundReport(
        max_one_sided=max_one_sided,
        max_sigma_ratio=max_sigma_ratio,
        max_growth_ratio=max_growth_ratio,
        declared=(model.c_b, model.c_sigma, model.c_b_prime, model.growth_n),
        passed=passed,
    )
