"""NumPy implementation of the batch divergence kernels.

Parameter arrays are float64 with columns (mu_x, mu_y, sigma_x, sigma_y, rho).
Inputs are assumed valid (positive sigmas, |rho| strictly below 1); the
callers in this package validate before batching.
"""

import numpy as np


def _split(params):
    return (params[..., 0], params[..., 1], params[..., 2], params[..., 3], params[..., 4])


def _kl_arrays(mxp, myp, sxp, syp, rp, mxq, myq, sxq, syq, rq):
    a11 = sxp * sxp
    a22 = syp * syp
    a12 = rp * sxp * syp
    b12 = rq * sxq * syq
    det_p = a11 * a22 - a12 * a12
    det_q = (sxq * sxq) * (syq * syq) - b12 * b12
    i11 = (syq * syq) / det_q
    i22 = (sxq * sxq) / det_q
    i12 = -b12 / det_q
    trace = i11 * a11 + 2.0 * i12 * a12 + i22 * a22
    dx = mxq - mxp
    dy = myq - myp
    maha = i11 * dx * dx + 2.0 * i12 * dx * dy + i22 * dy * dy
    # Provably non-negative; clamp away rounding noise near zero.
    return np.maximum(0.0, 0.5 * (trace + maha - 2.0 + np.log(det_q / det_p)))


def kl_pairs(p, q):
    """Directed KL, elementwise over matching rows of (N, 5) arrays."""
    return _kl_arrays(*_split(p), *_split(q))


def sym_kl_pairs(p, q):
    """Symmetrized KL, elementwise over matching rows."""
    return 0.5 * (kl_pairs(p, q) + kl_pairs(q, p))


def sym_kl_cross(a, b):
    """(N, M) symmetrized KL between every row of ``a`` and every row of ``b``."""
    ap = tuple(col[:, None] for col in _split(a))
    bp = _split(b)
    forward = _kl_arrays(*ap, *bp)
    backward = _kl_arrays(*bp, *ap)
    return 0.5 * (forward + backward)
