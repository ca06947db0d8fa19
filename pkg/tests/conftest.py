import numpy as np
import pytest

from modespec.modes import GridSpec, ModeSpectrum, PhysicalFrame, mode_indices


@pytest.fixture(scope="session")
def frame():
    return PhysicalFrame()


@pytest.fixture(scope="session")
def grid():
    return GridSpec()


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(256, 256, 8.0)


def random_spectrum(frame, max_order, seed, n_modes=None):
    rng = np.random.default_rng(seed)
    idx = mode_indices(max_order)
    if n_modes is not None:
        idx = [idx[i] for i in rng.choice(len(idx), size=n_modes, replace=False)]
    c = rng.normal(size=len(idx)) + 1j * rng.normal(size=len(idx))
    return ModeSpectrum(frame, dict(zip(idx, c))).normalized()
