import numpy as np
import pytest

from attnforce.core import GuidanceParams
from attnforce.simulate import GOLDEN, standard_scene


def gaussian(H, W, center, sigma, amp=1.0):
    """Reference blob on a grid, centered at (row, col) in grid units."""
    rr, cc = np.mgrid[0:H, 0:W]
    return amp * np.exp(-((rr - center[0]) ** 2 + (cc - center[1]) ** 2) / (2.0 * sigma**2))


def brute_mean(values, mask):
    total = 0.0
    n = 0
    for h in range(len(values)):
        for w in range(len(values[0])):
            if mask[h][w]:
                total += float(values[h][w])
                n += 1
    return total / n


def brute_mask(region, H, W):
    return [
        [
            (region.x0 <= (w + 0.5) / W <= region.x1) and (region.y0 <= (h + 0.5) / H <= region.y1)
            for w in range(W)
        ]
        for h in range(H)
    ]


@pytest.fixture
def params():
    return GuidanceParams()


@pytest.fixture
def std3():
    return standard_scene()


@pytest.fixture
def golden():
    return GOLDEN


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
