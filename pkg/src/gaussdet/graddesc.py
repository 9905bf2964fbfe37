"""Analytic gradients of the symmetrized divergence, a finite-difference
oracle, and a first-order fitter that minimizes it.

Optimization runs in the unconstrained encoded space (offsets, log sigmas,
atanh rho) so every iterate decodes to a valid Gaussian.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from gaussdet.core import Gaussian2D, require_invertible
from gaussdet.divergence import sym_kl
from gaussdet.encoding import EncodedParams, decode, encode
from gaussdet.errors import DegenerateCovariance, Diverged, FormatError

_ORIGIN = (0.0, 0.0)


class Space(enum.Enum):
    """Parameterization the gradient is expressed in."""

    NATURAL = "natural"  # (mu_x, mu_y, sigma_x, sigma_y, rho)
    ENCODED = "encoded"  # (dx, dy, log sigma_x, log sigma_y, atanh rho)


def _cov_inverse(g: Gaussian2D):
    det = (g.sigma_x * g.sigma_y) ** 2 * (1.0 - g.rho**2)
    off = g.rho * g.sigma_x * g.sigma_y
    inv = np.array(
        [[g.sigma_y**2, -off], [-off, g.sigma_x**2]], dtype=np.float64
    ) / det
    cov = np.array([[g.sigma_x**2, off], [off, g.sigma_y**2]], dtype=np.float64)
    return cov, inv


def sym_kl_grad(
    pred: Gaussian2D, target: Gaussian2D, space: Space = Space.NATURAL
) -> np.ndarray:
    """Gradient of sym_kl(pred, target) with respect to pred's parameters."""
    require_invertible(pred)
    require_invertible(target)
    a_cov, a_inv = _cov_inverse(pred)
    b_cov, b_inv = _cov_inverse(target)
    delta = np.array(
        [target.mu_x - pred.mu_x, target.mu_y - pred.mu_y], dtype=np.float64
    )

    grad_mu = -0.5 * (a_inv + b_inv) @ delta
    # Matrix derivative of the symmetrized divergence w.r.t. pred covariance;
    # the two log-det contributions cancel.
    grad_cov = 0.25 * (b_inv - a_inv @ (b_cov + np.outer(delta, delta)) @ a_inv)

    sx, sy, r = pred.sigma_x, pred.sigma_y, pred.rho
    g_sx = 2.0 * sx * grad_cov[0, 0] + 2.0 * r * sy * grad_cov[0, 1]
    g_sy = 2.0 * sy * grad_cov[1, 1] + 2.0 * r * sx * grad_cov[0, 1]
    g_r = 2.0 * sx * sy * grad_cov[0, 1]

    natural = np.array([grad_mu[0], grad_mu[1], g_sx, g_sy, g_r])
    if space is Space.NATURAL:
        return natural
    # Chain rule through the encoding: mu = anchor - d, sigma = exp(u),
    # rho = tanh(w).
    return np.array(
        [
            -natural[0],
            -natural[1],
            sx * natural[2],
            sy * natural[3],
            (1.0 - r**2) * natural[4],
        ]
    )


def finite_diff_grad(
    pred: Gaussian2D,
    target: Gaussian2D,
    space: Space = Space.NATURAL,
    rel_step: float = 1e-5,
) -> np.ndarray:
    """Central finite differences of sym_kl(pred, target), the gradient oracle."""
    if space is Space.NATURAL:
        theta = pred.as_array()

        def objective(t):
            return sym_kl(Gaussian2D.from_array(t), target)

    else:
        theta = encode(_ORIGIN, pred).as_array()

        def objective(t):
            return sym_kl(decode(_ORIGIN, EncodedParams.from_array(t)), target)

    grad = np.zeros(5)
    for i in range(5):
        h = rel_step * max(1.0, abs(theta[i]))
        up = theta.copy()
        down = theta.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (objective(up) - objective(down)) / (2.0 * h)
    return grad


def gradient_check(trials: int = 100, seed: int = 0) -> float:
    """Max relative disagreement between analytic and numeric gradients.

    Random (pred, target) pairs are drawn away from the correlation boundary
    and checked in both spaces.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        pred, target = (_random_gaussian(rng) for _ in range(2))
        for space in (Space.NATURAL, Space.ENCODED):
            analytic = sym_kl_grad(pred, target, space)
            numeric = finite_diff_grad(pred, target, space)
            err = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-6)
            worst = max(worst, float(err.max()))
    return worst


def _random_gaussian(rng: np.random.Generator) -> Gaussian2D:
    return Gaussian2D(
        mu_x=float(rng.uniform(-5, 5)),
        mu_y=float(rng.uniform(-5, 5)),
        sigma_x=float(rng.uniform(0.5, 5.0)),
        sigma_y=float(rng.uniform(0.5, 5.0)),
        rho=float(rng.uniform(-0.9, 0.9)),
    )


@dataclass(frozen=True)
class DescentResult:
    gaussian: Gaussian2D
    iterations: int
    divergence: float
    history: tuple[float, ...] | None = None


DIVERGENCE_CEILING = 1e6


def fit_by_descent(
    target: Gaussian2D,
    init: Gaussian2D,
    step: float = 0.5,
    max_iters: int = 10000,
    tol: float = 1e-6,
    backtrack: bool = True,
    keep_history: bool = False,
) -> DescentResult:
    """Minimize sym_kl(candidate, target) by gradient descent in encoded space.

    With backtracking the divergence is non-increasing per iteration. Raises
    Diverged when the objective becomes non-finite or exceeds the ceiling.
    """
    if step <= 0 or tol <= 0 or max_iters < 0:
        raise ValueError("step and tol must be positive, max_iters non-negative")
    state = encode(_ORIGIN, init).as_array()
    current = decode(_ORIGIN, EncodedParams.from_array(state))
    value = sym_kl(current, target)
    history = [value] if keep_history else None

    def result(iterations):
        return DescentResult(
            current, iterations, value, None if history is None else tuple(history)
        )

    for iteration in range(max_iters):
        if not math.isfinite(value) or value > DIVERGENCE_CEILING:
            raise Diverged(f"divergence {value} at iteration {iteration}")
        if value < tol:
            return result(iteration)
        grad = sym_kl_grad(current, target, Space.ENCODED)
        s = step
        accepted = False
        while s >= step * 2.0**-60:
            trial_state = state - s * grad
            try:
                trial = decode(_ORIGIN, EncodedParams.from_array(trial_state))
                trial_value = sym_kl(trial, target)
            except (DegenerateCovariance, FormatError, OverflowError):
                trial_value = math.inf  # off the feasible set; shrink the step
            if math.isfinite(trial_value) and (
                not backtrack or trial_value <= value
            ):
                state, current, value = trial_state, trial, trial_value
                accepted = True
                break
            s *= 0.5
        if history is not None:
            history.append(value)
        if not accepted:
            return result(iteration)
    if not math.isfinite(value) or value > DIVERGENCE_CEILING:
        raise Diverged(f"divergence {value} after {max_iters} iterations")
    return result(max_iters)
