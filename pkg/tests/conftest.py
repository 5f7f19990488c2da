import numpy as np
import pytest

from scov import make_model


@pytest.fixture
def fig1_model():
    return make_model(5, 1, 1.0)


def random_orthonormal(m: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    return q * np.sign(np.diag(r))


def random_sparse(n: int, s: int, rng: np.random.Generator, scale: float = 2.0) -> np.ndarray:
    x = np.zeros(n)
    size = rng.integers(0, s + 1)
    supp = rng.choice(n, size=size, replace=False)
    x[supp] = rng.uniform(0.1, scale, size=size)
    return x


def random_in_domain(x0: np.ndarray, s: int, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Random point of the bound's validity region around the anchor x0."""
    n = x0.size
    x = np.zeros(n)
    size = rng.integers(0, s + 1)
    supp = rng.choice(n, size=size, replace=False)
    for k in supp:
        x[k] = rng.uniform(0.0, 0.95 * (2.0 * x0[k] + sigma2))
    return x
