import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)


def random_hermitian(rng, dim, scale=1.0):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (g + g.conj().T)
