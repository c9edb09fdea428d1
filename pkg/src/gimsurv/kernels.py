"""Backend selection for the Monte Carlo hot loop.

The compiled Cython kernel is used when it imports; otherwise, or when the
environment variable ``GIMSURV_BACKEND=python`` is set, the pure-Python
fallback runs instead. Both expose ``relative_likelihoods`` with the same
signature and semantics.
"""

from __future__ import annotations

import logging
import os

import numpy as np

from . import _fallback
from .models import Family, Side

log = logging.getLogger(__name__)

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

STATUS_OK, STATUS_DEGENERATE, STATUS_NOT_CONVERGED = 0, 1, 2


def _initial_backend() -> str:
    requested = os.environ.get("GIMSURV_BACKEND", "").strip().lower()
    if requested:
        if requested not in BACKENDS:
            log.warning("backend %r unavailable, using %s", requested, sorted(BACKENDS))
        else:
            return requested
    return "cython" if "cython" in BACKENDS else "python"


_active = _initial_backend()


def get_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}")
    _active = name


def relative_likelihoods(family: Family, side: Side, T, D, theta, backend: str | None = None):
    """Per-row MLE fit and relative likelihood at ``theta`` for a batch of datasets.

    ``T`` and ``D`` are ``(M, n)`` arrays of times and status flags. Returns
    ``(R, status, estimates, iterations)``; see the status constants above.
    """
    impl = BACKENDS[backend or _active]
    T = np.ascontiguousarray(T, dtype=np.float64)
    D = np.ascontiguousarray(D, dtype=np.int8)
    side_code = 0 if Side(side) is Side.RIGHT else 1
    theta = np.asarray(theta, dtype=np.float64).ravel()
    return impl.relative_likelihoods(Family(family).code, side_code, T, D, theta)
