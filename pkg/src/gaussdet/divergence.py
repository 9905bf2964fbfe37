"""Closed-form KL divergence between 2D Gaussians, box IoU, and a slow
numerical cross-check.

The closed form is expanded in scalars: the 2x2 inverse comes from the
adjugate, so no linear algebra routine is involved. ``kl_quadrature``
integrates the defining integral directly on a dense grid and exists only
to verify the closed form; it shares no code with it.
"""

from __future__ import annotations

import math

import numpy as np

from gaussdet.core import BoundingBox, Gaussian2D, require_invertible
from gaussdet.errors import ZeroAreaUnion


def kl(p: Gaussian2D, q: Gaussian2D) -> float:
    """Directed divergence KL(p || q); non-negative, zero iff p equals q."""
    det_p = require_invertible(p)
    det_q = require_invertible(q)

    a11 = p.sigma_x**2
    a22 = p.sigma_y**2
    a12 = p.rho * p.sigma_x * p.sigma_y
    b12 = q.rho * q.sigma_x * q.sigma_y

    # Inverse of q's covariance via the adjugate.
    i11 = q.sigma_y**2 / det_q
    i22 = q.sigma_x**2 / det_q
    i12 = -b12 / det_q

    trace = i11 * a11 + 2.0 * i12 * a12 + i22 * a22
    dx = q.mu_x - p.mu_x
    dy = q.mu_y - p.mu_y
    maha = i11 * dx * dx + 2.0 * i12 * dx * dy + i22 * dy * dy
    # Provably non-negative; clamp away rounding noise near zero.
    return max(0.0, 0.5 * (trace + maha - 2.0 + math.log(det_q / det_p)))


def sym_kl(p: Gaussian2D, q: Gaussian2D) -> float:
    """Symmetrized divergence: the mean of the two directed divergences."""
    return 0.5 * (kl(p, q) + kl(q, p))


def kl_quadrature(
    p: Gaussian2D, q: Gaussian2D, span: float = 8.0, step: float = 0.01
) -> float:
    """Directed KL(p || q) by midpoint quadrature of the defining integral.

    The grid covers ``span`` marginal standard deviations of p on each side
    of its mean, sampled every ``step`` standard deviations, so resolution
    tracks the distribution scale. Independent oracle: evaluates the two
    densities pointwise and sums.
    """
    require_invertible(p)
    require_invertible(q)
    n = int(round(2.0 * span / step))
    u = -span + (np.arange(n) + 0.5) * step
    xs = p.mu_x + p.sigma_x * u
    ys = p.mu_y + p.sigma_y * u

    def log_density(g: Gaussian2D) -> np.ndarray:
        zx = (xs[:, None] - g.mu_x) / g.sigma_x
        zy = (ys[None, :] - g.mu_y) / g.sigma_y
        one_m_r2 = 1.0 - g.rho**2
        quad = (zx**2 - 2.0 * g.rho * zx * zy + zy**2) / one_m_r2
        norm = math.log(2.0 * math.pi * g.sigma_x * g.sigma_y * math.sqrt(one_m_r2))
        return -0.5 * quad - norm

    log_p = log_density(p)
    log_q = log_density(q)
    cell = (step * p.sigma_x) * (step * p.sigma_y)
    return float(np.sum(np.exp(log_p) * (log_p - log_q)) * cell)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two axis-aligned boxes."""
    inter_w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    inter_h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(0.0, inter_w) * max(0.0, inter_h)
    union = a.area + b.area - inter
    if union <= 0.0:
        raise ZeroAreaUnion("both boxes have zero area")
    return inter / union
