import math

import numpy as np
import pytest

from gaussdet.core import PixelSet, validate_gaussian
from gaussdet.errors import EmptyPixelSet
from gaussdet.fit import VAR_FLOOR, Correction, bbox_of, fit_gaussian
from tests.conftest import random_pixelset


class TestFitExamples:
    def test_four_point_symmetry(self):
        g = fit_gaussian(PixelSet([(0, 0), (2, 0), (0, 2), (2, 2)]))
        assert (g.mu_x, g.mu_y) == (1.0, 1.0)
        assert g.sigma_x == pytest.approx(math.sqrt(1.0 + VAR_FLOOR), abs=1e-12)
        assert g.sigma_y == pytest.approx(math.sqrt(1.0 + VAR_FLOOR), abs=1e-12)
        assert g.rho == 0.0

    def test_single_pixel_floor_only(self):
        g = fit_gaussian(PixelSet([(5, 7)]))
        assert (g.mu_x, g.mu_y) == (5.0, 7.0)
        assert g.sigma_x == pytest.approx(math.sqrt(VAR_FLOOR), abs=1e-15)
        assert g.sigma_y == pytest.approx(math.sqrt(VAR_FLOOR), abs=1e-15)
        assert g.rho == 0.0

    def test_collinear_points(self):
        # Population moments of {(0,0),(1,1),(2,2)}: var = 2/3, cov = 2/3.
        g = fit_gaussian(PixelSet([(0, 0), (1, 1), (2, 2)]))
        var = 2.0 / 3.0
        assert (g.mu_x, g.mu_y) == (1.0, 1.0)
        assert g.sigma_x == pytest.approx(math.sqrt(var + VAR_FLOOR), rel=1e-12)
        assert g.rho == pytest.approx(var / (var + VAR_FLOOR), rel=1e-9)
        assert abs(g.rho) < 1.0

    def test_unit_pixel_correction(self):
        g = fit_gaussian(PixelSet([(5, 7)]), Correction.UNIT_PIXEL)
        assert g.sigma_x == pytest.approx(math.sqrt(1.0 / 12.0 + VAR_FLOOR), rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(EmptyPixelSet):
            fit_gaussian([])


class TestBbox:
    def test_unit_pixel(self):
        assert bbox_of(PixelSet([(0, 0)])).as_list() == [0, 0, 1, 1]

    def test_extents(self):
        assert bbox_of(PixelSet([(0, 0), (2, 2)])).as_list() == [0, 0, 3, 3]

    def test_row(self):
        assert bbox_of(PixelSet([(1, 4), (5, 4)])).as_list() == [1, 4, 6, 5]

    def test_empty_rejected(self):
        with pytest.raises(EmptyPixelSet):
            bbox_of([])


class TestFitProperties:
    def test_translation_equivariance(self, rng):
        for _ in range(300):
            ps = random_pixelset(rng)
            dx, dy = int(rng.integers(-50, 50)), int(rng.integers(-50, 50))
            shifted = fit_gaussian(ps.array + np.array([dx, dy]))
            base = fit_gaussian(ps)
            assert shifted.mu_x == pytest.approx(base.mu_x + dx, abs=1e-9)
            assert shifted.mu_y == pytest.approx(base.mu_y + dy, abs=1e-9)
            assert shifted.sigma_x == pytest.approx(base.sigma_x, rel=1e-9)
            assert shifted.sigma_y == pytest.approx(base.sigma_y, rel=1e-9)
            assert shifted.rho == pytest.approx(base.rho, abs=1e-9)

    def test_scaling_after_removing_floor(self, rng):
        for _ in range(300):
            ps = random_pixelset(rng)
            s = int(rng.integers(2, 6))
            base = fit_gaussian(ps)
            scaled = fit_gaussian(ps.array * s)
            assert scaled.mu_x == pytest.approx(base.mu_x * s, abs=1e-9)
            assert scaled.mu_y == pytest.approx(base.mu_y * s, abs=1e-9)
            # Variances scale by s^2 once the fixed floor is subtracted out.
            raw_x = base.sigma_x**2 - VAR_FLOOR
            raw_y = base.sigma_y**2 - VAR_FLOOR
            assert scaled.sigma_x**2 - VAR_FLOOR == pytest.approx(raw_x * s**2, rel=1e-9, abs=1e-12)
            assert scaled.sigma_y**2 - VAR_FLOOR == pytest.approx(raw_y * s**2, rel=1e-9, abs=1e-12)
            # The un-regularized correlation is scale invariant. Skip sets
            # close enough to collinear that the rho clamp interferes.
            if raw_x > 1e-9 and raw_y > 1e-9 and abs(base.rho) < 0.998:
                raw_cov = base.rho * base.sigma_x * base.sigma_y
                scaled_cov = scaled.rho * scaled.sigma_x * scaled.sigma_y
                assert scaled_cov == pytest.approx(raw_cov * s**2, rel=1e-9, abs=1e-9)

    def test_rho_strictly_inside_for_non_collinear(self, rng):
        count = 0
        while count < 200:
            ps = random_pixelset(rng)
            arr = ps.array
            if len(set(arr[:, 0].tolist())) < 2 or len(set(arr[:, 1].tolist())) < 2:
                continue
            centered = arr - arr.mean(axis=0)
            if np.linalg.matrix_rank(centered.astype(float)) < 2:
                continue  # perfectly collinear
            count += 1
            assert abs(fit_gaussian(ps).rho) < 1.0

    def test_output_always_valid(self, rng):
        for _ in range(200):
            validate_gaussian(fit_gaussian(random_pixelset(rng)))
        validate_gaussian(fit_gaussian(PixelSet([(0, 0), (1, 1)])))
