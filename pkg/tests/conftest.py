import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_hermitian_coef(rng, trunc_n, decay=1.0, scale=1.0):
    """Random half-spectrum coefficients with |c_n| ~ scale / n^decay."""
    n = np.arange(1, trunc_n + 1, dtype=float)
    c = np.zeros(trunc_n + 1, dtype=np.complex128)
    c[1:] = scale * (rng.standard_normal(trunc_n) + 1j * rng.standard_normal(trunc_n)) / n**decay
    c[0] = scale * rng.standard_normal()
    return c
