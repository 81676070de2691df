# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch stepping kernel.

Performs, per path, the same floating-point operations in the same order as
kernels/fallback.py; built with -ffp-contract=off so results are bit-for-bit
identical to the numpy backend.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, fmin, fmax

cnp.import_array()

DEF MAXDIM = 32

# model ids (mirror models.py)
DEF M_BROWNIAN = 0
DEF M_OU = 1
DEF M_DOUBLEWELL = 2
DEF M_STATEDEP = 3

# domain ids (mirror domains.py)
DEF D_FREE = 0
DEF D_HALFSPACE = 1
DEF D_BOX = 2
DEF D_BALL = 3
DEF D_POLYTOPE = 4

DEF DYKSTRA_TOL = 1e-12
DEF DYKSTRA_MAX_SWEEPS = 10000


cdef inline void _drift(int model_id, double* mp, double* x, int m, double* out) noexcept nogil:
    cdef int j
    if model_id == M_OU:
        for j in range(m):
            out[j] = (-mp[0]) * x[j]
    elif model_id == M_DOUBLEWELL:
        out[0] = x[0] - x[0] * x[0] * x[0]


cdef inline void _sigma_apply(int model_id, double* mp, double* x, double* v,
                              int m, int d, double* out) noexcept nogil:
    cdef int j
    cdef int md = m if m < d else d
    if model_id == M_STATEDEP:
        for j in range(m):
            out[j] = (1.0 + mp[0] * fmin(fabs(x[j]), mp[1])) * v[j]
    else:
        for j in range(m):
            out[j] = v[j] if j < md else 0.0


cdef inline int _project(int dom_id, double* dp, int n_faces, double* y, int m,
                         double* out, double* pbuf, double* zprev) noexcept nogil:
    """Project y onto the domain; returns 0 on success, -1 if the polytope
    sweep cap is hit (out then holds the last iterate)."""
    cdef int j, f, it, base
    cdef double s, t, nrm, scale, c, delta, w, zn
    if dom_id == D_FREE:
        for j in range(m):
            out[j] = y[j]
    elif dom_id == D_HALFSPACE:
        s = 0.0
        for j in range(m):
            s += y[j] * dp[j]
        if s >= dp[m]:
            for j in range(m):
                out[j] = y[j]
        else:
            t = dp[m] - s
            for j in range(m):
                out[j] = y[j] + t * dp[j]
    elif dom_id == D_BOX:
        for j in range(m):
            out[j] = fmin(fmax(y[j], dp[j]), dp[m + j])
    elif dom_id == D_BALL:
        nrm = 0.0
        for j in range(m):
            s = y[j] - dp[j]
            nrm += s * s
        nrm = sqrt(nrm)
        if nrm <= dp[m]:
            for j in range(m):
                out[j] = y[j]
        else:
            scale = dp[m] / nrm
            for j in range(m):
                out[j] = dp[j] + (y[j] - dp[j]) * scale
    else:  # polytope, Dykstra over half-space faces; pbuf holds the face
           # corrections followed by their previous-sweep copies
        for j in range(m):
            out[j] = y[j]
        for f in range(n_faces * m):
            pbuf[f] = 0.0
        for it in range(DYKSTRA_MAX_SWEEPS):
            for j in range(m):
                zprev[j] = out[j]
            for f in range(n_faces * m):
                pbuf[n_faces * m + f] = pbuf[f]
            for f in range(n_faces):
                base = f * (m + 1)
                s = 0.0
                for j in range(m):
                    w = out[j] + pbuf[f * m + j]
                    pbuf[f * m + j] = w          # stash w
                    s += dp[base + j] * w
                c = dp[base + m]
                if s >= c:
                    for j in range(m):
                        out[j] = pbuf[f * m + j]
                        pbuf[f * m + j] = 0.0
                else:
                    t = c - s
                    for j in range(m):
                        w = pbuf[f * m + j]
                        zn = w + t * dp[base + j]
                        pbuf[f * m + j] = w - zn
                        out[j] = zn
            delta = 0.0
            for j in range(m):
                delta = fmax(delta, fabs(out[j] - zprev[j]))
            for f in range(n_faces * m):
                delta = fmax(delta, fabs(pbuf[f] - pbuf[n_faces * m + f]))
            if delta <= DYKSTRA_TOL:
                return 0
        return -1
    return 0


def run_batch(int model_id, double[::1] mp, int dom_id, double[::1] dp, int n_faces,
              int m, int d, double[::1] x0, double eps, double dt,
              int n_steps, int n_paths,
              object dw_obj, object hdot_obj, object ref_obj, object dir_obj,
              bint want_paths):
    if m > MAXDIM or d > MAXDIM:
        raise ValueError(f"compiled kernel supports dimensions up to {MAXDIM}")

    cdef bint use_noise = dw_obj is not None and eps > 0.0
    cdef bint has_h = hdot_obj is not None
    cdef bint weigh = use_noise and has_h
    cdef bint has_ref = ref_obj is not None
    cdef bint has_dir = dir_obj is not None
    cdef bint has_drift = model_id == M_OU or model_id == M_DOUBLEWELL
    cdef bint free = dom_id == D_FREE

    cdef double[:, :, ::1] dw = dw_obj if dw_obj is not None else \
        np.empty((0, 0, 0), dtype=np.float64)
    cdef double[:, :, ::1] hdot = hdot_obj if hdot_obj is not None else \
        np.empty((0, 0, 0), dtype=np.float64)
    cdef double[:, ::1] ref = ref_obj if ref_obj is not None else \
        np.empty((0, 0), dtype=np.float64)
    cdef double[::1] rdir = dir_obj if dir_obj is not None else \
        np.empty(0, dtype=np.float64)
    cdef bint h_per_path = has_h and hdot.shape[0] > 1

    cdef double sqrt_eps = sqrt(eps) if eps > 0.0 else 0.0
    cdef double half_dt_over_eps = dt / (2.0 * eps) if eps > 0.0 else 0.0

    x_end_a = np.empty((n_paths, m), dtype=np.float64)
    logw_a = np.zeros(n_paths, dtype=np.float64)
    tv_end_a = np.zeros(n_paths, dtype=np.float64)
    sup_norm_a = np.zeros(n_paths, dtype=np.float64)
    sup_ref_a = np.zeros(n_paths, dtype=np.float64)
    run_max_a = np.zeros(n_paths, dtype=np.float64)
    cdef double[:, ::1] x_end = x_end_a
    cdef double[::1] logw = logw_a
    cdef double[::1] tv_end = tv_end_a
    cdef double[::1] sup_norm = sup_norm_a
    cdef double[::1] sup_ref = sup_ref_a
    cdef double[::1] run_max = run_max_a

    cdef double[:, :, ::1] xs = None
    cdef double[:, :, ::1] ks = None
    cdef double[:, ::1] tvs = None
    xs_a = ks_a = tvs_a = None
    if want_paths:
        xs_a = np.empty((n_paths, n_steps + 1, m), dtype=np.float64)
        ks_a = np.empty((n_paths, n_steps + 1, m), dtype=np.float64)
        tvs_a = np.empty((n_paths, n_steps + 1), dtype=np.float64)
        xs = xs_a
        ks = ks_a
        tvs = tvs_a

    pwork_a = np.zeros(max(2 * n_faces * m, 1), dtype=np.float64)
    cdef double[::1] pwork = pwork_a

    cdef double xb[MAXDIM]
    cdef double yb[MAXDIM]
    cdef double bb[MAXDIM]
    cdef double sb[MAXDIM]
    cdef double xn[MAXDIM]
    cdef double kb[MAXDIM]
    cdef double zprev[MAXDIM]

    cdef int i, j, k, hidx
    cdef double tvc, lw, s, v, a, q, dkj, nrm, sn, sr, rm
    cdef int err_path = -1, err_step = -1, dyk_path = -1

    with nogil:
        for i in range(n_paths):
            for j in range(m):
                xb[j] = x0[j]
                kb[j] = 0.0
            tvc = 0.0
            lw = 0.0
            s = 0.0
            for j in range(m):
                s += xb[j] * xb[j]
            sn = sqrt(s)
            if has_ref:
                s = 0.0
                for j in range(m):
                    v = xb[j] - ref[0, j]
                    s += v * v
                sr = sqrt(s)
            else:
                sr = 0.0
            if has_dir:
                rm = 0.0
                for j in range(m):
                    rm += xb[j] * rdir[j]
            else:
                rm = 0.0
            if want_paths:
                for j in range(m):
                    xs[i, 0, j] = xb[j]
                    ks[i, 0, j] = 0.0
                tvs[i, 0] = 0.0
            hidx = i if h_per_path else 0

            for k in range(n_steps):
                if has_drift:
                    _drift(model_id, &mp[0], xb, m, bb)
                    for j in range(m):
                        yb[j] = xb[j] + bb[j] * dt
                else:
                    for j in range(m):
                        yb[j] = xb[j]
                if has_h:
                    _sigma_apply(model_id, &mp[0], xb, &hdot[hidx, k, 0], m, d, sb)
                    for j in range(m):
                        yb[j] = yb[j] + sb[j] * dt
                if use_noise:
                    _sigma_apply(model_id, &mp[0], xb, &dw[i, k, 0], m, d, sb)
                    for j in range(m):
                        yb[j] = yb[j] + sqrt_eps * sb[j]
                if free:
                    for j in range(m):
                        xn[j] = yb[j]
                else:
                    if _project(dom_id, &dp[0], n_faces, yb, m, xn, &pwork[0], zprev) < 0:
                        dyk_path = i
                        err_step = k
                        break
                    nrm = 0.0
                    for j in range(m):
                        dkj = yb[j] - xn[j]
                        kb[j] = kb[j] + dkj
                        nrm += dkj * dkj
                    tvc = tvc + sqrt(nrm)
                if weigh:
                    a = 0.0
                    q = 0.0
                    for j in range(d):
                        a += hdot[hidx, k, j] * dw[i, k, j]
                        q += hdot[hidx, k, j] * hdot[hidx, k, j]
                    lw = lw - a / sqrt_eps
                    lw = lw - q * half_dt_over_eps
                for j in range(m):
                    xb[j] = xn[j]
                s = 0.0
                for j in range(m):
                    s += xb[j] * xb[j]
                v = sqrt(s)
                if v != v or v > 1e300:
                    err_path = i
                    err_step = k
                    break
                if v > sn:
                    sn = v
                if has_ref:
                    s = 0.0
                    for j in range(m):
                        v = xb[j] - ref[k + 1, j]
                        s += v * v
                    v = sqrt(s)
                    if v > sr:
                        sr = v
                if has_dir:
                    s = 0.0
                    for j in range(m):
                        s += xb[j] * rdir[j]
                    if s > rm:
                        rm = s
                if want_paths:
                    for j in range(m):
                        xs[i, k + 1, j] = xb[j]
                        ks[i, k + 1, j] = kb[j]
                    tvs[i, k + 1] = tvc
            if err_path >= 0 or dyk_path >= 0:
                break
            for j in range(m):
                x_end[i, j] = xb[j]
            logw[i] = lw
            tv_end[i] = tvc
            sup_norm[i] = sn
            sup_ref[i] = sr
            run_max[i] = rm

    if dyk_path >= 0:
        raise RuntimeError(
            f"Dykstra projection did not converge (path {dyk_path}, step {err_step})"
        )
    if err_path >= 0:
        raise FloatingPointError(
            f"non-finite state in path {err_path} at step {err_step}"
        )

    out = {
        "x_end": x_end_a,
        "logw": logw_a,
        "tv_end": tv_end_a,
        "sup_norm": sup_norm_a,
        "sup_ref": sup_ref_a,
        "run_max": run_max_a,
    }
    if want_paths:
        out["X"] = xs_a
        out["K"] = ks_a
        out["tv"] = tvs_a
    return out
