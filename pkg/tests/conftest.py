import numpy as np
import pytest

from hscl.hsi.cube import HyperCube


def random_cube(rng: np.random.Generator, h: int = 4, w: int = 5, c: int = 3) -> HyperCube:
    data = rng.random((h, w, c), dtype=np.float32)
    wl = np.sort(rng.uniform(420.0, 2450.0, size=c)).astype(np.float32)
    while c > 1 and np.any(np.diff(wl) <= 0):  # resample rare duplicate draws
        wl = np.sort(rng.uniform(420.0, 2450.0, size=c)).astype(np.float32)
    return HyperCube(data=data, wavelengths_nm=wl)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
