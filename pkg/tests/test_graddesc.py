import numpy as np
import pytest

from gaussdet.core import Gaussian2D, validate_gaussian
from gaussdet.errors import Diverged
from gaussdet.graddesc import (
    Space,
    finite_diff_grad,
    fit_by_descent,
    gradient_check,
    sym_kl_grad,
)
from tests.conftest import random_gaussian

TARGET = Gaussian2D(0, 0, 1, 1, 0)


class TestSymKlGrad:
    def test_zero_at_minimum(self):
        g = Gaussian2D(2, -1, 1.5, 0.8, 0.3)
        assert np.abs(sym_kl_grad(g, g, Space.NATURAL)).max() < 1e-12
        assert np.abs(sym_kl_grad(g, g, Space.ENCODED)).max() < 1e-12

    def test_mean_offset_gradient(self):
        # For a unit offset with shared identity covariance the mean gradient
        # is the offset itself. The sigma_x component is -0.5, not 0: the
        # reverse-direction Mahalanobis term depends on the candidate's
        # covariance. Central differences agree.
        pred = Gaussian2D(1, 0, 1, 1, 0)
        grad = sym_kl_grad(pred, TARGET, Space.NATURAL)
        assert grad[0] == pytest.approx(1.0, abs=1e-12)
        assert grad[1] == 0.0
        assert grad[2] == pytest.approx(-0.5, abs=1e-12)
        assert grad[3] == 0.0
        assert grad[4] == 0.0
        numeric = finite_diff_grad(pred, TARGET, Space.NATURAL)
        assert grad == pytest.approx(numeric, rel=1e-6, abs=1e-9)

    def test_matches_finite_differences_both_spaces(self, rng):
        for _ in range(60):
            pred, target = random_gaussian(rng), random_gaussian(rng)
            for space in Space:
                analytic = sym_kl_grad(pred, target, space)
                numeric = finite_diff_grad(pred, target, space)
                err = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-6)
                assert err.max() < 1e-4

    def test_gradient_check_entry_point(self):
        assert gradient_check(trials=30, seed=3) < 1e-4


class TestFitByDescent:
    def test_already_converged(self):
        res = fit_by_descent(TARGET, TARGET, step=0.5)
        assert res.iterations == 0
        assert res.divergence == 0.0

    def test_pure_mean_shift(self):
        res = fit_by_descent(TARGET, Gaussian2D(3, 2, 1, 1, 0), step=0.5)
        assert res.divergence < 1e-6

    def test_seeded_random_pairs_mostly_converge(self):
        rng = np.random.default_rng(42)
        ok = 0
        for _ in range(30):
            target = random_gaussian(rng, sigma_range=(0.5, 4.0), rho_max=0.8)
            init = random_gaussian(rng, sigma_range=(0.5, 4.0), rho_max=0.8)
            res = fit_by_descent(target, init, step=0.5, max_iters=10000, tol=1e-6)
            ok += res.divergence < 1e-6
        assert ok >= 29

    def test_backtracking_is_monotone(self):
        res = fit_by_descent(
            Gaussian2D(0, 0, 0.6, 3.0, 0.7),
            Gaussian2D(4, -3, 2.5, 0.8, -0.5),
            step=2.0,
            keep_history=True,
        )
        values = np.array(res.history)
        assert np.all(np.diff(values) <= 0)

    def test_iterates_always_decode_to_valid_gaussians(self):
        res = fit_by_descent(
            Gaussian2D(1, 1, 0.5, 0.5, 0.89),
            Gaussian2D(-4, 3, 4.0, 0.6, -0.89),
            step=1.0,
        )
        validate_gaussian(res.gaussian)
        assert res.divergence < 1e-6

    def test_divergence_guard(self):
        with pytest.raises(Diverged):
            fit_by_descent(
                TARGET,
                Gaussian2D(30, 30, 1, 1, 0),
                step=400.0,
                backtrack=False,
                max_iters=50,
            )

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            fit_by_descent(TARGET, TARGET, step=0.0)
