"""Batch stepping kernels: compiled extension when available, numpy fallback
otherwise.

The backend is selected at import time; set ``MSDE_LDP_KERNEL=python`` (or
``compiled``) to force one.  Both backends produce bit-identical results; the
compiled one is faster on small batches (optimizer inner loops) while the
fallback relies on numpy vectorization across paths.
"""

from __future__ import annotations

import os

import numpy as np

from .. import constants as C
from . import fallback

try:
    from . import _core
except ImportError:  # extension not built; pure-python install
    _core = None

_FORCED = os.environ.get("MSDE_LDP_KERNEL", "auto").lower()
if _FORCED not in ("auto", "python", "compiled"):
    raise RuntimeError(f"MSDE_LDP_KERNEL must be auto|python|compiled, got {_FORCED!r}")
if _FORCED == "compiled" and _core is None:
    raise RuntimeError("MSDE_LDP_KERNEL=compiled but the extension is not built")

HAVE_COMPILED = _core is not None


def backend_name() -> str:
    if _FORCED == "python" or _core is None:
        return "python"
    return "compiled"


def _compiled_eligible(model, domain) -> bool:
    try:
        model.kernel_encoding()
    except NotImplementedError:
        return False
    if model.dim > C.KERNEL_MAX_DIM or model.noise_dim > C.KERNEL_MAX_DIM:
        return False
    if domain is not None:
        try:
            domain.kernel_encoding()
        except NotImplementedError:
            return False
    return True


def run_batch(model, domain, x0, eps, dt, n_steps, n_paths,
              dw=None, hdot=None, ref=None, run_dir=None,
              want_paths=False, backend=None):
    """Simulate a batch of resolvent-step Euler paths and return per-path
    summaries (and optionally full paths).

    ``domain=None`` means the unconstrained equation.  ``hdot`` has shape
    (1, n_steps, d) for a shared control or (n_paths, n_steps, d) for
    per-path controls; ``dw`` has shape (n_paths, n_steps, d).
    """
    backend = backend or backend_name()
    if backend == "compiled" and not _compiled_eligible(model, domain):
        backend = "python"
    if backend == "python":
        return fallback.run_batch(model, domain, x0, eps, dt, n_steps, n_paths,
                                  dw=dw, hdot=hdot, ref=ref, run_dir=run_dir,
                                  want_paths=want_paths)

    model_id, mp = model.kernel_encoding()
    if domain is None:
        dom_id, dp, n_faces = 0, np.empty(0), 0
    else:
        dom_id, dp, n_faces = domain.kernel_encoding()
    mp = np.ascontiguousarray(mp if mp.size else [0.0], dtype=np.float64)
    dp = np.ascontiguousarray(dp if dp.size else [0.0], dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)

    def _c(a):
        return None if a is None else np.ascontiguousarray(a, dtype=np.float64)

    return _core.run_batch(
        int(model_id), mp, int(dom_id), dp, int(n_faces),
        int(model.dim), int(model.noise_dim), x0,
        float(eps), float(dt), int(n_steps), int(n_paths),
        _c(dw), _c(hdot), _c(ref), _c(run_dir), bool(want_paths),
    )
