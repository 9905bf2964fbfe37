import numpy as np
import pytest

from gaussdet import kernels
from gaussdet.core import Gaussian2D
from gaussdet.divergence import kl, sym_kl
from tests.conftest import random_gaussian


def _param_rows(rng, n):
    return np.stack([random_gaussian(rng).as_array() for _ in range(n)])


class TestKernelCorrectness:
    def test_kl_pairs_matches_scalar(self, rng):
        p, q = _param_rows(rng, 64), _param_rows(rng, 64)
        batch = kernels.kl_pairs(p, q)
        for i in range(64):
            scalar = kl(Gaussian2D.from_array(p[i]), Gaussian2D.from_array(q[i]))
            assert batch[i] == pytest.approx(scalar, rel=1e-12, abs=1e-15)

    def test_sym_kl_pairs_matches_scalar(self, rng):
        p, q = _param_rows(rng, 64), _param_rows(rng, 64)
        batch = kernels.sym_kl_pairs(p, q)
        for i in range(64):
            scalar = sym_kl(Gaussian2D.from_array(p[i]), Gaussian2D.from_array(q[i]))
            assert batch[i] == pytest.approx(scalar, rel=1e-12, abs=1e-15)

    def test_cross_matches_scalar(self, rng):
        a, b = _param_rows(rng, 12), _param_rows(rng, 7)
        cross = kernels.sym_kl_cross(a, b)
        assert cross.shape == (12, 7)
        for i in (0, 5, 11):
            for j in (0, 3, 6):
                scalar = sym_kl(Gaussian2D.from_array(a[i]), Gaussian2D.from_array(b[j]))
                assert cross[i, j] == pytest.approx(scalar, rel=1e-12, abs=1e-15)

    def test_non_negative(self, rng):
        p = _param_rows(rng, 100)
        assert np.all(kernels.sym_kl_pairs(p, p) >= 0.0)
        assert np.all(kernels.sym_kl_cross(p[:10], p[:10]) >= 0.0)


class TestKernelApi:
    def test_row_count_mismatch_rejected(self, rng):
        with pytest.raises(ValueError):
            kernels.kl_pairs(_param_rows(rng, 3), _param_rows(rng, 4))

    def test_bad_shape_rejected(self):
        with pytest.raises(ValueError):
            kernels.sym_kl_cross(np.zeros((3, 4)), np.zeros((3, 5)))

    def test_accepts_non_contiguous_input(self, rng):
        wide = np.ascontiguousarray(np.hstack([_param_rows(rng, 8), _param_rows(rng, 8)]))
        view = wide[:, :5]  # non-contiguous view
        assert not view.flags.c_contiguous
        out = kernels.kl_pairs(view, _param_rows(rng, 8))
        assert out.shape == (8,)


class TestBackendAgreement:
    def test_all_backends_agree(self, rng):
        backends = kernels.available_backends()
        assert "numpy" in backends
        a, b = _param_rows(rng, 40), _param_rows(rng, 40)
        reference = backends["numpy"].sym_kl_pairs(a, b)
        cross_ref = backends["numpy"].sym_kl_cross(a, b[:9])
        for name, impl in backends.items():
            assert impl.sym_kl_pairs(a, b) == pytest.approx(reference, rel=1e-12)
            assert impl.sym_kl_cross(a, b[:9]) == pytest.approx(cross_ref, rel=1e-12)

    def test_active_backend_is_reported(self):
        assert kernels.BACKEND in kernels.available_backends()
