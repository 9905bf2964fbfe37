import math

import numpy as np
import pytest

from gaussdet.core import Gaussian2D
from gaussdet.encoding import (
    Candidate,
    CandidateSet,
    EncodedParams,
    PredictionGrid,
    decode,
    decode_candidates,
    decode_grid,
    encode,
    select_candidate,
)
from gaussdet.errors import EmptyCandidateSet, FormatError
from tests.conftest import random_gaussian


class TestEncode:
    def test_direct_substitution(self):
        e = encode((5, 7), Gaussian2D(3, 4, 2, 1, 0))
        assert (e.dx, e.dy) == (2.0, 3.0)
        assert e.log_sigma_x == pytest.approx(math.log(2), abs=1e-15)
        assert e.log_sigma_y == 0.0
        assert e.atanh_rho == 0.0

    def test_zero_offset_at_mean(self):
        e = encode((3, 4), Gaussian2D(3, 4, 2, 1, 0))
        assert (e.dx, e.dy) == (0.0, 0.0)

    def test_atanh_of_half(self):
        e = encode((0, 0), Gaussian2D(0, 0, 1, 1, 0.5))
        assert e.atanh_rho == pytest.approx(math.atanh(0.5), abs=1e-15)


class TestDecode:
    def test_inverse_of_encode_example(self):
        g = decode((5, 7), EncodedParams(2, 3, math.log(2), 0, 0))
        assert g == Gaussian2D(3.0, 4.0, 2.0, 1.0, 0.0)

    def test_zero_params_give_unit_gaussian(self):
        assert decode((4, 9), EncodedParams(0, 0, 0, 0, 0)) == Gaussian2D(4, 9, 1, 1, 0)

    def test_roundtrip_random(self, rng):
        for _ in range(300):
            g = random_gaussian(rng, rho_max=1 - 1e-6)
            pixel = (float(rng.integers(-20, 20)), float(rng.integers(-20, 20)))
            back = decode(pixel, encode(pixel, g))
            for a, b in zip(back.as_array(), g.as_array()):
                assert a == pytest.approx(b, abs=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(FormatError):
            decode((0, 0), EncodedParams(float("nan"), 0, 0, 0, 0))

    def test_extreme_atanh_clamps_to_valid(self):
        g = decode((0, 0), EncodedParams(0, 0, 0, 0, 40.0))
        assert abs(g.rho) <= 1 - 1e-6


def _cands(*logits):
    zero = EncodedParams(0, 0, 0, 0, 0)
    return CandidateSet(tuple(Candidate(zero, float(v)) for v in logits))


class TestSelectCandidate:
    def test_argmax(self):
        assert select_candidate(_cands(0.2, 0.5, 0.3)) == 1

    def test_singleton(self):
        assert select_candidate(_cands(0.5)) == 0

    def test_tie_goes_to_lowest_index(self):
        assert select_candidate(_cands(0.5, 0.5)) == 0

    def test_empty_rejected(self):
        with pytest.raises(EmptyCandidateSet):
            select_candidate(CandidateSet(()))

    def test_shift_invariance(self, rng):
        for _ in range(100):
            logits = rng.normal(size=int(rng.integers(1, 6)))
            shift = float(rng.uniform(-100, 100))
            assert select_candidate(_cands(*logits)) == select_candidate(
                _cands(*(logits + shift))
            )


def _grid_from_gaussians(cells, scale=1, n_classes=2):
    """cells[(iy, ix)] = list of (gaussian, logit, class_id of the cell)."""
    height = 1 + max(k[0] for k in cells)
    width = 1 + max(k[1] for k in cells)
    n = max(len(v[0]) for v in cells.values())
    params = np.zeros((height, width, n, 5))
    logits = np.zeros((height, width, n))
    scores = np.zeros((height, width, n_classes))
    for (iy, ix), (gaussians_logits, class_id) in cells.items():
        ax = (ix + 0.5) * scale - 0.5
        ay = (iy + 0.5) * scale - 0.5
        for k, (g, logit) in enumerate(gaussians_logits):
            params[iy, ix, k] = encode((ax, ay), g).as_array()
            logits[iy, ix, k] = logit
        scores[iy, ix, class_id] = 3.0
    return PredictionGrid(width, height, scale, params, logits, scores)


def random_grid(rng, n=None):
    height, width = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    n = n or int(rng.choice([1, 2, 4]))
    n_classes = int(rng.integers(2, 4))
    params = np.stack(
        [
            rng.uniform(-10, 10, (height, width, n)),
            rng.uniform(-10, 10, (height, width, n)),
            rng.uniform(-0.5, 1.5, (height, width, n)),
            rng.uniform(-0.5, 1.5, (height, width, n)),
            rng.uniform(-2, 2, (height, width, n)),
        ],
        axis=3,
    )
    logits = rng.normal(size=(height, width, n))
    scores = rng.normal(size=(height, width, n_classes))
    scale = int(rng.choice([1, 2, 4]))
    return PredictionGrid(width, height, scale, params, logits, scores)


class TestDecodeGrid:
    def test_constant_grid(self):
        g = Gaussian2D(3, 4, 2, 1.5, 0.25)
        cells = {
            (iy, ix): ([(g, 1.0), (Gaussian2D(50, 50, 1, 1, 0), 0.0)], 1)
            for iy in range(2)
            for ix in range(3)
        }
        decoded = decode_grid(_grid_from_gaussians(cells))
        for iy in range(2):
            for ix in range(3):
                assert decoded.params[iy, ix] == pytest.approx(g.as_array(), abs=1e-12)

    def test_two_halves_decode_to_exactly_two_gaussians(self):
        g1 = Gaussian2D(1, 1, 1, 1, 0)
        g2 = Gaussian2D(9, 1, 2, 2, 0.5)
        cells = {}
        for ix in range(4):
            chosen = g1 if ix < 2 else g2
            other = g2 if ix < 2 else g1
            cells[(0, ix)] = ([(chosen, 2.0), (other, 0.0)], 1)
        decoded = decode_grid(_grid_from_gaussians(cells))
        unique = {tuple(np.round(decoded.params[0, ix], 9)) for ix in range(4)}
        assert len(unique) == 2

    def test_scale_four_anchors(self):
        # Anchors of a 2x2 grid at scale 4: (cell + 0.5) * 4 - 0.5.
        expected = {(1.5, 1.5), (5.5, 1.5), (1.5, 5.5), (5.5, 5.5)}
        g = Gaussian2D(0, 0, 1, 1, 0)
        cells = {(iy, ix): ([(g, 1.0)], 1) for iy in range(2) for ix in range(2)}
        grid = _grid_from_gaussians(cells, scale=4)
        ax, ay = grid.anchors()
        got = {(ax[iy, ix], ay[iy, ix]) for iy in range(2) for ix in range(2)}
        assert got == expected
        # Decoding at those anchors still recovers the encoded Gaussian.
        decoded = decode_grid(grid)
        for iy in range(2):
            for ix in range(2):
                assert decoded.params[iy, ix] == pytest.approx(g.as_array(), abs=1e-12)

    def test_never_emits_a_blended_distribution(self, rng):
        for _ in range(100):
            grid = random_grid(rng)
            decoded = decode_grid(grid)
            everything = decode_candidates(grid)
            for iy in range(grid.height):
                for ix in range(grid.width):
                    row = decoded.params[iy, ix]
                    assert any(
                        np.array_equal(row, everything[iy, ix, k])
                        for k in range(grid.n)
                    )

    def test_selection_matches_scalar_op(self, rng):
        for _ in range(50):
            grid = random_grid(rng)
            decoded_sel = np.argmax(grid.logits, axis=2)
            for iy in range(grid.height):
                for ix in range(grid.width):
                    assert decoded_sel[iy, ix] == select_candidate(
                        grid.candidate_set_at(ix, iy)
                    )


class TestGridJson:
    def test_round_trip(self, rng):
        for _ in range(20):
            grid = random_grid(rng)
            back = PredictionGrid.from_json(grid.to_json())
            assert back.scale == grid.scale
            assert np.array_equal(back.params, grid.params)
            assert np.array_equal(back.logits, grid.logits)
            assert np.array_equal(back.class_scores, grid.class_scores)

    def test_wrong_length_rejected(self):
        with pytest.raises(FormatError):
            PredictionGrid.from_json(
                '{"width":2,"height":1,"scale":1,"n":1,"classes":2,"data":[0,0,0]}'
            )
