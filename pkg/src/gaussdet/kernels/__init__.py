"""Batch divergence kernels with a compiled core and a NumPy fallback.

At import time the compiled Cython module is preferred; when it is missing
(no compiler at install time) the NumPy backend provides the same functions
with identical semantics. ``BACKEND`` names the one in use.
"""

import numpy as np

from gaussdet.kernels import _numpy_backend

try:
    from gaussdet.kernels import _native as _impl

    BACKEND = "native"
except ImportError:  # extension was not built
    _impl = _numpy_backend
    BACKEND = "numpy"


def _as_params(arr) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.ndim != 2 or out.shape[1] != 5:
        raise ValueError(f"parameter array must be (N, 5), got {out.shape}")
    return out


def kl_pairs(p, q) -> np.ndarray:
    """Directed KL for matching rows of two (N, 5) parameter arrays."""
    p, q = _as_params(p), _as_params(q)
    if p.shape != q.shape:
        raise ValueError(f"row counts differ: {p.shape} vs {q.shape}")
    return _impl.kl_pairs(p, q)


def sym_kl_pairs(p, q) -> np.ndarray:
    """Symmetrized KL for matching rows of two (N, 5) parameter arrays."""
    p, q = _as_params(p), _as_params(q)
    if p.shape != q.shape:
        raise ValueError(f"row counts differ: {p.shape} vs {q.shape}")
    return _impl.sym_kl_pairs(p, q)


def sym_kl_cross(a, b) -> np.ndarray:
    """(N, M) symmetrized KL between all rows of ``a`` and all rows of ``b``."""
    return _impl.sym_kl_cross(_as_params(a), _as_params(b))


def available_backends() -> dict:
    """Importable backend modules keyed by name (for tests and benchmarks)."""
    backends = {"numpy": _numpy_backend}
    try:
        from gaussdet.kernels import _native

        backends["native"] = _native
    except ImportError:
        pass
    return backends
