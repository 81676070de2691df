"""Bundled acceptance experiments.

Each criterion runs a fixed, seeded experiment and reports pass/fail with
details; the CLI `suite` subcommand and the acceptance tests both run these.
Criteria use their stated tolerances; where a stated tolerance is not
attainable with the mandated scheme the criterion is still asserted as
stated (an honest failure beats a loosened check).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import constants as C
from . import ensemble
from .action import RateOptions, adjoint_gradient, fd_endpoint_gradient, \
    minimize_endpoint_rate, minimize_functional_cost
from .domains import AxisBox, EuclideanBall, HalfSpace, Polytope, free_space
from .functionals import EndpointDistanceCap
from .grids import Control, TimeGrid
from .ldp import EndpointBeyondLevel, MCEstimate, controlled_limit_report, \
    estimate_event, extrapolate_rate, laplace_estimate
from .models import make_model
from .operators import IndicatorOperator, sign_graph, verify_monotone
from .simulate import SolutionPath, check_solution_properties

DEFAULT_SEED = 1234


@dataclass
class CriterionResult:
    cid: int
    title: str
    passed: bool
    seconds: float
    budget: float
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "id": self.cid, "title": self.title, "passed": bool(self.passed),
            "seconds": round(self.seconds, 3), "budget": self.budget,
            "details": self.details,
        }


def _domain_zoo():
    return {
        "half-space": HalfSpace([1.0, 0.0], 0.0),
        "axis-box": AxisBox([0.0, 0.0], [1.0, 1.0]),
        "euclidean-ball": EuclideanBall([0.0, 0.0], 1.0),
        "polytope": Polytope(
            normals=[[1, 0], [0, 1], [-1, 0], [0, -1], [-1, -1]],
            offsets=[0, 0, -1, -1, -1.5],
            interior=[0.4, 0.4],
        ),
    }


def criterion_1(seed: int, workers: int = 1) -> CriterionResult:
    """Operator property suite over all domain kinds, 10^4 samples each."""
    t0 = time.perf_counter()
    n = 10_000
    details = {}
    ok = True
    rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
    for kind, dom in _domain_zoo().items():
        op = IndicatorOperator(dom)
        x = 3.0 * rng.standard_normal((n, 2))
        y = 3.0 * rng.standard_normal((n, 2))
        px, py = dom.project_batch(x), dom.project_batch(y)
        idem = float(np.abs(dom.project_batch(px) - px).max())
        nonexp = float((np.linalg.norm(px - py, axis=1) - np.linalg.norm(x - y, axis=1)).max())
        inner = dom.sample_points(rng, 1000)
        varineq = float((((x[:, None, :] - px[:, None, :]) *
                          (inner[None, :, :] - px[:, None, :])).sum(-1)).max())
        firm = float((np.linalg.norm(px - py, axis=1) ** 2
                      - ((px - py) * (x - y)).sum(axis=1)).max())
        mono = verify_monotone(op, n, seed + 7)
        kind_ok = (idem <= 1e-12 and nonexp <= 1e-12 and varineq <= 1e-10
                   and firm <= 1e-10 and mono.passed)
        details[kind] = {
            "idempotence": idem, "non_expansiveness": nonexp,
            "variational_inequality": varineq, "firm_non_expansiveness": firm,
            "min_monotone_inner": mono.min_inner, "ok": kind_ok,
        }
        ok = ok and kind_ok
    mono_graph = verify_monotone(sign_graph(), n, seed + 8)
    details["filled-sign-graph"] = {"min_monotone_inner": mono_graph.min_inner,
                                    "ok": mono_graph.passed}
    ok = ok and mono_graph.passed
    dt_run = time.perf_counter() - t0
    return CriterionResult(1, "operator property suite", ok and dt_run < 10, dt_run, 10.0, details)


def _reference_systems():
    half = IndicatorOperator(HalfSpace([1.0], 0.0))
    disc = IndicatorOperator(EuclideanBall([0.0, 0.0], 1.0))
    return [
        ("brownian-halfline", make_model("brownian", dim=1), half, [0.0]),
        ("ou-halfline", make_model("ou", dim=1, lam=1.0), half, [0.0]),
        ("brownian-disc", make_model("brownian", dim=2), disc, [0.9, 0.0]),
        ("ou-disc", make_model("ou", dim=2, lam=1.0), disc, [0.9, 0.0]),
    ]


def criterion_2(seed: int, workers: int = 1) -> CriterionResult:
    """Solution-property suite on the four reference reflected systems."""
    t0 = time.perf_counter()
    grid = TimeGrid(1.0, 2048)
    n_paths = 100
    tol = C.PROPERTY_SLACK_C * np.sqrt(grid.dt)
    details = {"tol": tol}
    ok = True
    for name, model, op, x0 in _reference_systems():
        res = ensemble.run_path_ensemble(model, op, x0, 1.0, grid, n_paths,
                                         seed, stream=20, workers=workers)
        slacks = {"probe": np.inf, "pairwise": np.inf, "variation_bound": np.inf}
        ball = op.interior_ball()
        for i in range(n_paths):
            path = SolutionPath(grid, res["X"][i], res["K"][i], res["tv"][i], 1.0)
            other = SolutionPath(grid, res["X"][(i + 50) % n_paths],
                                 res["K"][(i + 50) % n_paths],
                                 res["tv"][(i + 50) % n_paths], 1.0)
            rep = check_solution_properties(path, op, probe_count=32,
                                            rng_seed=seed + i, other=other, ball=ball)
            for key, v in rep.slacks().items():
                slacks[key] = min(slacks[key], v)
        sys_ok = all(v >= -tol for v in slacks.values())
        details[name] = {**{k: float(v) for k, v in slacks.items()}, "ok": sys_ok}
        ok = ok and sys_ok
    dt_run = time.perf_counter() - t0
    return CriterionResult(2, "solution-property suite", ok and dt_run < 30, dt_run, 30.0, details)


def criterion_3(seed: int, workers: int = 1) -> CriterionResult:
    """Reflected-law oracle: terminal law of reflected Brownian motion from 0
    against |N(0,1)|, KS below the 1% critical value.

    Note: the projected Euler scheme carries an O(sqrt(dt)) boundary bias
    (the discrete running minimum undershoots the continuous one by about
    0.5826*sqrt(dt)), which exceeds the KS critical value at N = 2048; the
    criterion is asserted as stated regardless.
    """
    t0 = time.perf_counter()
    model = make_model("brownian", dim=1)
    op = IndicatorOperator(HalfSpace([1.0], 0.0))
    grid = TimeGrid(1.0, 2048)
    n = 100_000
    summ = ensemble.run_summaries(model, op, [0.0], 1.0, grid, n, seed,
                                  stream=30, workers=workers)
    xT = summ["x_end"][:, 0]
    ks = stats.kstest(xT, lambda t: np.clip(2.0 * stats.norm.cdf(t) - 1.0, 0.0, 1.0))
    crit = float(stats.kstwo.ppf(0.99, n))
    ok = bool(ks.statistic < crit)
    dt_run = time.perf_counter() - t0
    return CriterionResult(
        3, "reflected-law oracle (KS)", ok and dt_run < 60, dt_run, 60.0,
        {"ks_statistic": float(ks.statistic), "critical_1pct": crit,
         "predicted_bias": 0.5826 * 2.0 * stats.norm.pdf(0) * np.sqrt(grid.dt)},
    )


def _ou_discrete_rate_oracle(lam: float, x0: float, target: float, T: float, n: int) -> float:
    """Independent fine-grid quadratic-minimization oracle for the
    constant-coefficient linear-drift endpoint rate: the discrete endpoint is
    linear in the control, so the least-norm control is explicit."""
    dt = T / n
    w = (1.0 - lam * dt) ** np.arange(n - 1, -1, -1)
    gap = target - x0 * (1.0 - lam * dt) ** n
    s = float((w * w).sum() * dt)
    return 0.5 * gap * gap / s


def criterion_4(seed: int, workers: int = 1) -> CriterionResult:
    """Endpoint rate oracles: free Brownian, Ornstein-Uhlenbeck (validated
    against the fine-grid oracle) and boundary-avoiding reflected case."""
    t0 = time.perf_counter()
    opts = RateOptions(seed=seed)
    free_op = IndicatorOperator(free_space(1))
    brown = make_model("brownian", dim=1)
    ou = make_model("ou", dim=1, lam=1.0)

    res_free = minimize_endpoint_rate(brown, free_op, [0.0], [1.0], 1.0, opts)
    a_ok = abs(res_free.value - 0.5) < 1e-3

    closed_form = 1.0 / (1.0 - np.exp(-2.0))
    oracle = _ou_discrete_rate_oracle(1.0, 0.0, 1.0, 1.0, 8192)
    oracle_ok = abs(oracle - closed_form) < 1e-3
    res_ou = minimize_endpoint_rate(ou, free_op, [0.0], [1.0], 1.0, opts)
    b_ok = abs(res_ou.value - closed_form) < 1e-2 and oracle_ok

    refl_op = IndicatorOperator(HalfSpace([1.0], 0.0))
    res_refl = minimize_endpoint_rate(brown, refl_op, [0.0], [1.0], 1.0, opts)
    c_ok = abs(res_refl.value - res_free.value) < 1e-3

    ok = a_ok and b_ok and c_ok
    dt_run = time.perf_counter() - t0
    return CriterionResult(
        4, "rate-function oracles", ok and dt_run < 60, dt_run, 60.0,
        {
            "free_value": res_free.value, "free_ok": a_ok,
            "ou_value": res_ou.value, "ou_closed_form": closed_form,
            "ou_grid_oracle": oracle, "ou_ok": b_ok,
            "reflected_value": res_refl.value, "reflected_ok": c_ok,
        },
    )


def criterion_5(seed: int, workers: int = 1) -> CriterionResult:
    """Adjoint vs forward finite differences at random interior configs."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 501]))
    sim_grid, ctrl_grid = TimeGrid(1.0, 512), TimeGrid(1.0, 32)
    domains = [free_space(1), AxisBox([-50.0], [50.0]), EuclideanBall([0.0], 50.0)]
    models = [make_model("brownian", dim=1), make_model("ou", dim=1, lam=1.0),
              make_model("doublewell")]
    worst = 0.0
    for _ in range(20):
        model = models[rng.integers(0, len(models))]
        op = IndicatorOperator(domains[rng.integers(0, len(domains))])
        h = 0.3 * rng.standard_normal((32, 1))
        x0 = [float(rng.uniform(-0.5, 0.5))]
        target = [float(rng.uniform(0.5, 1.5) * (1 if rng.uniform() < 0.5 else -1))]
        ga = adjoint_gradient(model, op, x0, target, sim_grid, ctrl_grid, h, 1e3)
        gf = fd_endpoint_gradient(model, op, x0, target, sim_grid, ctrl_grid, h, 1e3)
        rel = float(np.linalg.norm(ga - gf) / max(np.linalg.norm(gf), 1e-300))
        worst = max(worst, rel)
    ok = worst < 1e-4
    dt_run = time.perf_counter() - t0
    return CriterionResult(5, "adjoint gradient check", ok and dt_run < 10, dt_run, 10.0,
                           {"worst_rel_error": worst, "configs": 20})


def _phibar(x):
    from scipy.special import erfc
    return 0.5 * erfc(x / np.sqrt(2.0))


def criterion_6(seed: int, workers: int = 1) -> CriterionResult:
    """LDP extrapolation for the free Brownian endpoint event {X(T) >= 1}.

    Asserted as stated: affine intercept of -eps*log(p_hat) within 10% of
    0.5 and the exact-oracle sequence within 2%.  On this eps grid the exact
    sequence itself extrapolates to ~0.562 (the Gaussian tail has a
    sqrt(eps) prefactor, so -eps*log(p) = 0.5 + (eps/2)*log(1/eps) + ...,
    which an affine model cannot absorb), so both assertions fail by
    construction; see the details for the measured values.
    """
    t0 = time.perf_counter()
    eps_list = [0.4, 0.2, 0.1, 0.05]
    model = make_model("brownian", dim=1)
    op = IndicatorOperator(free_space(1))
    grid = TimeGrid(1.0, 256)
    event = EndpointBeyondLevel([1.0], 1.0)

    res = minimize_endpoint_rate(model, op, [0.0], [1.0], 1.0, RateOptions(seed=seed))
    ests = estimate_event(model, op, [0.0], eps_list, event, grid, 100_000,
                          seed, tilt=res.control, workers=workers)
    fit = extrapolate_rate(ests, reference_rate=res.value)
    mc_rel = abs(fit.intercept - 0.5) / 0.5

    oracle = [
        MCEstimate(epsilon=e, event_id="oracle", n_paths=0,
                   p_hat=float(_phibar(1.0 / np.sqrt(e))), stderr=0.0,
                   neg_eps_log_p=float(-e * np.log(_phibar(1.0 / np.sqrt(e)))))
        for e in eps_list
    ]
    fit_oracle = extrapolate_rate(oracle)
    oracle_rel = abs(fit_oracle.intercept - 0.5) / 0.5

    ok = mc_rel < 0.10 and oracle_rel < 0.02
    dt_run = time.perf_counter() - t0
    return CriterionResult(
        6, "LDP extrapolation (tilted MC)", ok and dt_run < 120, dt_run, 120.0,
        {
            "mc_intercept": fit.intercept, "mc_rel_error": mc_rel,
            "oracle_intercept": fit_oracle.intercept, "oracle_rel_error": oracle_rel,
            "estimates": [{"eps": e.epsilon, "p_hat": e.p_hat, "ess": e.ess}
                          for e in ests],
            "reference_rate": res.value,
        },
    )


def criterion_7(seed: int, workers: int = 1) -> CriterionResult:
    """Laplace principle for g(f) = min(1, |f(T) - 1|^2), free Brownian."""
    t0 = time.perf_counter()
    eps_list = [0.4, 0.2, 0.1, 0.05]
    model = make_model("brownian", dim=1)
    op = IndicatorOperator(free_space(1))
    grid = TimeGrid(1.0, 256)
    g = EndpointDistanceCap([1.0], cap=1.0)

    cand = minimize_functional_cost(model, op, [0.0], g, 1.0, RateOptions(seed=seed))
    vals = [laplace_estimate(model, op, [0.0], e, g, grid, 100_000, seed, workers=workers)
            for e in eps_list]
    A = np.vstack([np.ones(len(eps_list)), eps_list]).T
    coef, *_ = np.linalg.lstsq(A, np.array(vals), rcond=None)
    intercept = float(coef[0])
    rel = abs(intercept - (-cand.value)) / abs(cand.value)
    ok = rel < 0.15
    dt_run = time.perf_counter() - t0
    return CriterionResult(
        7, "Laplace principle (MC vs variational)", ok and dt_run < 120, dt_run, 120.0,
        {"mc_intercept": intercept, "candidate_value": cand.value,
         "rel_error": rel, "mc_values": [float(v) for v in vals]},
    )


def criterion_8(seed: int, workers: int = 1) -> CriterionResult:
    """Vanishing-noise convergence of controlled paths (common noise)."""
    t0 = time.perf_counter()
    eps_list = [0.4, 0.1, 0.025]
    grid = TimeGrid(1.0, 512)
    ou = make_model("ou", dim=1, lam=1.0)
    op = IndicatorOperator(HalfSpace([1.0], 0.0))
    h = Control.constant(TimeGrid(1.0, 32), [1.0])
    rep = controlled_limit_report(ou, op, [0.0], h, eps_list, grid, 1000, seed,
                                  workers=workers)

    brown = make_model("brownian", dim=1)
    op_free = IndicatorOperator(free_space(1))
    h0 = Control.zero(TimeGrid(1.0, 32), 1)
    rep_free = controlled_limit_report(brown, op_free, [0.0], h0, eps_list, grid,
                                       1000, seed, workers=workers)
    prop_ok = True
    base = rep_free.estimates[0] / rep_free.eps_list[0]
    for e, v in zip(rep_free.eps_list, rep_free.estimates):
        ratio = (v / e) / base
        prop_ok = prop_ok and (0.8 <= ratio <= 1.2)

    ok = rep.passed and prop_ok
    dt_run = time.perf_counter() - t0
    return CriterionResult(
        8, "vanishing-noise controlled convergence", ok and dt_run < 60, dt_run, 60.0,
        {"reflected_estimates": list(rep.estimates), "decreasing": rep.decreasing,
         "threshold": rep.threshold, "free_estimates": list(rep_free.estimates),
         "free_proportional": prop_ok},
    )


def criterion_9(seed: int, workers: int = 1) -> CriterionResult:
    """Uniformity in the noise level of the Lipschitz-in-x and
    moment/variation estimators (within a factor of 3 across eps)."""
    t0 = time.perf_counter()
    eps_list = [0.1, 0.5, 1.0]
    grid = TimeGrid(1.0, 512)
    ou = make_model("ou", dim=1, lam=1.0)
    op = IndicatorOperator(HalfSpace([1.0], 0.0))
    details = {}
    ok = True
    for delta in (0.1, 0.01):
        ratios = ensemble.lipschitz_uniformity(ou, op, [0.5], [delta], eps_list,
                                               grid, 1000, seed, workers=workers)
        spread = max(ratios.values()) / min(ratios.values())
        details[f"lipschitz_delta_{delta}"] = {"ratios": {str(k): v for k, v in ratios.items()},
                                               "spread": spread}
        ok = ok and spread < 3.0
    moments = ensemble.moment_uniformity(ou, op, [0.5], eps_list, grid, 1000, seed,
                                         workers=workers)
    combined = {e: v["combined"] for e, v in moments.items()}
    spread = max(combined.values()) / min(combined.values())
    details["moment_variation"] = {"combined": {str(k): v for k, v in combined.items()},
                                   "spread": spread}
    ok = ok and spread < 3.0
    dt_run = time.perf_counter() - t0
    return CriterionResult(9, "uniformity in the noise level", ok and dt_run < 60,
                           dt_run, 60.0, details)


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
    9: criterion_9,
}


def run_suite(seed: int = DEFAULT_SEED, criteria=None, workers: int = 1) -> dict:
    chosen = sorted(criteria) if criteria else sorted(CRITERIA)
    results = []
    for cid in chosen:
        res = CRITERIA[cid](seed, workers)
        results.append(res)
        print(f"criterion {res.cid}: {'PASS' if res.passed else 'FAIL'} "
              f"({res.seconds:.1f}s / {res.budget:.0f}s) - {res.title}")
    return {
        "seed": seed,
        "criteria": [r.to_dict() for r in results],
        "all_passed": all(r.passed for r in results),
    }
