"""Pure-numpy batch stepping kernel (vectorized across paths).

This backend performs, per path, the same floating-point operations in the
same order as the compiled kernel, so the two produce identical results
(the extension is compiled with FMA contraction disabled).
"""

from __future__ import annotations

import numpy as np


def run_batch(model, domain, x0, eps, dt, n_steps, n_paths,
              dw=None, hdot=None, ref=None, run_dir=None, want_paths=False):
    m = model.dim
    sqrt_eps = np.sqrt(eps) if eps > 0 else 0.0
    half_dt_over_eps = dt / (2.0 * eps) if eps > 0 else 0.0
    use_noise = dw is not None and eps > 0
    weigh = use_noise and hdot is not None

    xc = np.tile(np.asarray(x0, dtype=float), (n_paths, 1))
    kc = np.zeros((n_paths, m))
    tv = np.zeros(n_paths)
    logw = np.zeros(n_paths)

    sup_norm = np.sqrt((xc * xc).sum(axis=-1))
    sup_ref = None
    if ref is not None:
        d0 = xc - ref[0]
        sup_ref = np.sqrt((d0 * d0).sum(axis=-1))
    run_max = (xc * run_dir).sum(axis=-1) if run_dir is not None else None

    if want_paths:
        xs = np.empty((n_paths, n_steps + 1, m))
        ks = np.empty((n_paths, n_steps + 1, m))
        tvs = np.empty((n_paths, n_steps + 1))
        xs[:, 0] = xc
        ks[:, 0] = 0.0
        tvs[:, 0] = 0.0

    free = domain is None
    for k in range(n_steps):
        if model.has_drift:
            y = xc + model.drift_batch(xc) * dt
        else:
            y = xc.copy()
        if hdot is not None:
            u = hdot[:, k, :]
            y = y + model.sigma_apply_batch(xc, u) * dt
        if use_noise:
            dwk = dw[:, k, :]
            y = y + sqrt_eps * model.sigma_apply_batch(xc, dwk)
        xn = y if free else domain.project_batch(y)
        if not free:
            dk = y - xn
            kc = kc + dk
            tv = tv + np.sqrt((dk * dk).sum(axis=-1))
        if weigh:
            a = (u * dwk).sum(axis=-1)
            q = (u * u).sum(axis=-1)
            logw = logw - a / sqrt_eps
            logw = logw - q * half_dt_over_eps
        xc = xn
        sup_norm = np.maximum(sup_norm, np.sqrt((xc * xc).sum(axis=-1)))
        if sup_ref is not None:
            dr = xc - ref[k + 1]
            sup_ref = np.maximum(sup_ref, np.sqrt((dr * dr).sum(axis=-1)))
        if run_max is not None:
            run_max = np.maximum(run_max, (xc * run_dir).sum(axis=-1))
        if want_paths:
            xs[:, k + 1] = xc
            ks[:, k + 1] = kc
            tvs[:, k + 1] = tv

    if not np.all(np.isfinite(xc)):
        bad = int(np.nonzero(~np.isfinite(xc).all(axis=1))[0][0])
        raise FloatingPointError(f"non-finite state in path {bad}")

    out = {
        "x_end": xc,
        "logw": logw,
        "tv_end": tv,
        "sup_norm": sup_norm,
        "sup_ref": sup_ref if sup_ref is not None else np.zeros(n_paths),
        "run_max": run_max if run_max is not None else np.zeros(n_paths),
    }
    if want_paths:
        out["X"] = xs
        out["K"] = ks
        out["tv"] = tvs
    return out
