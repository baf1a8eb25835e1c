import numpy as np
import pytest

from degroot_resist import InfluenceMatrix, OpinionState, ResistanceProfile

# worked 3-node system used throughout
C3 = [[0, 0.5, 0.5], [1, 0, 0], [0.25, 0.75, 0]]
D3 = [0.2, 0.5, 0.8]
W3 = [[0.2, 0.4, 0.4], [0.5, 0.5, 0.0], [0.05, 0.15, 0.8]]
X3 = [0.0, 1.0, 2.0]


@pytest.fixture
def c3():
    return InfluenceMatrix(C3)


@pytest.fixture
def d3():
    return ResistanceProfile(D3)


@pytest.fixture
def x3():
    return OpinionState(X3)


def random_influence(rng: np.random.Generator, n: int, density: float = 1.0) -> InfluenceMatrix:
    """Zero-diagonal row-stochastic matrix with every row nonempty (not necessarily irreducible)."""
    mask = rng.random((n, n)) < density
    np.fill_diagonal(mask, False)
    for i in np.flatnonzero(~mask.any(axis=1)):
        mask[i, (i + 1 + rng.integers(n - 1)) % n] = True
    w = np.where(mask, rng.uniform(0.05, 1.0, (n, n)), 0.0)
    return InfluenceMatrix(w / w.sum(axis=1, keepdims=True))


def random_system(seed: int, n: int, m: int = 1, density: float = 1.0):
    rng = np.random.default_rng(seed)
    c = random_influence(rng, n, density)
    d = ResistanceProfile(rng.uniform(0.05, 0.95, n))
    x = OpinionState(rng.uniform(-1.0, 1.0, (n, m)))
    return c, d, x
