import numpy as np
import pytest

from gaussdet.core import Gaussian2D, PixelSet


def random_gaussian(rng, mu_span=5.0, sigma_range=(0.5, 5.0), rho_max=0.9) -> Gaussian2D:
    return Gaussian2D(
        mu_x=float(rng.uniform(-mu_span, mu_span)),
        mu_y=float(rng.uniform(-mu_span, mu_span)),
        sigma_x=float(rng.uniform(*sigma_range)),
        sigma_y=float(rng.uniform(*sigma_range)),
        rho=float(rng.uniform(-rho_max, rho_max)),
    )


def random_pixelset(rng, window=30, max_pixels=40) -> PixelSet:
    k = int(rng.integers(2, max_pixels + 1))
    flat = rng.choice(window * window, size=k, replace=False)
    coords = np.stack([flat % window, flat // window], axis=1)
    return PixelSet(coords)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
