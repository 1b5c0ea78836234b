import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def random_sgl_problem(rng, n=None, q=None, p=None, snr=2.0):
    """Draw a small random nodewise problem and its raw pieces."""
    n = n or int(rng.integers(20, 61))
    q = q or int(rng.integers(1, 4))
    p = p or int(rng.integers(2, 5))
    m = p - 1
    a_gamma = rng.normal(size=(n, q))
    blocks = [rng.normal(size=(n, m)) for _ in range(q + 1)]
    coef_g = rng.normal(size=q) * rng.binomial(1, 0.6, size=q)
    y = a_gamma @ coef_g
    for b in blocks:
        y = y + b @ (rng.normal(size=m) * rng.binomial(1, 0.5, size=m))
    y = y + rng.normal(size=n) * (np.std(y) / snr + 0.1)
    return y, a_gamma, blocks


@pytest.fixture
def rng():
    return np.random.default_rng(20240813)
