import numpy as np
import pytest

from vinetraj.core import AUG_DIM, CONTROL_DIM, CORNERS, STATE_DIM
from vinetraj.model import N_FEATURES, DynModel


def random_model(rng, cfg=CORNERS["ES"], scale: float = 0.3, quad_scale: float = 0.05) -> DynModel:
    A = rng.normal(scale=scale, size=(STATE_DIM, AUG_DIM))
    B = rng.normal(scale=scale, size=(STATE_DIM, CONTROL_DIM))
    a = rng.normal(scale=quad_scale, size=N_FEATURES)
    return DynModel(A, B, a, cfg)


def random_point(rng):
    return rng.normal(size=AUG_DIM), rng.normal(size=CONTROL_DIM)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def corner_fit():
    """Corner models fitted once on plant data (about 7 s)."""
    from vinetraj.experiments import fit_all_corners

    return fit_all_corners(seed=0)
