"""Hot Monte Carlo loops, dispatched to the compiled core when it is built.

Set ``STEINDRIFT_PURE_PYTHON=1`` to force the numpy fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

if os.environ.get("STEINDRIFT_PURE_PYTHON", "") not in ("", "0") or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def _impl(backend):
    try:
        return _BACKENDS[backend or BACKEND]
    except KeyError:
        raise ValueError(f"backend {backend!r} not available; have {available_backends()}") from None


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def inverse_quadratic_prefix(eta, weights, shift, n_min: int, backend: str | None = None) -> np.ndarray:
    """``out[s, j] = 1 / sum_{l < n_min + j} (weights_l (eta[s, l] + shift_l))**2``.

    Column ``j`` corresponds to dimension ``n_min + j``; a zero sum gives ``inf``.
    """
    eta = _c(np.atleast_2d(eta))
    L = eta.shape[1]
    if not 1 <= n_min <= L:
        raise ValueError(f"n_min={n_min} outside 1..{L}")
    return _impl(backend).inverse_quadratic_prefix(eta, _c(weights).reshape(L), _c(shift).reshape(L), int(n_min))


def l2_losses(resid, V, modes_grid, weights, backend: str | None = None) -> np.ndarray:
    """Per row: ``int r**2``, ``int (r + c)**2``, ``int c**2`` with ``c = V @ modes_grid``.

    ``resid`` is ``(B, P)``, ``V`` is ``(B, n)``, ``modes_grid`` is ``(n, P)`` and
    ``weights`` are the ``P`` quadrature weights.
    """
    resid = _c(np.atleast_2d(resid))
    V = _c(np.atleast_2d(V))
    ET = _c(np.asarray(modes_grid).T)
    if V.shape[0] != resid.shape[0] or ET.shape != (resid.shape[1], V.shape[1]):
        raise ValueError("inconsistent shapes for l2_losses")
    return _impl(backend).l2_losses(resid, V, ET, _c(weights))
