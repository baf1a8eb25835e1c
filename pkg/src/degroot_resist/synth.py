"""Seeded generators for networks, resistances, opinions and measurement noise.

Every draw comes from a Philox (counter-based) generator.  Seeds for the parts
of one experiment are split off a single run seed with :func:`derive_seed`,
which hashes ``(run_seed, *path)`` through ``numpy.random.SeedSequence``.  The
pipeline convention is::

    network     derive_seed(run_seed, NETWORK)
    resistance  derive_seed(run_seed, RESISTANCE)
    opinions    derive_seed(run_seed, OPINIONS)
    noise       derive_seed(run_seed, NOISE)

and replicate ``r`` of a sweep uses ``derive_seed(run_seed, r)`` as its own
run seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InfluenceMatrix, OpinionState, ResistanceProfile, Trajectory, check_structure

NETWORK, RESISTANCE, OPINIONS, NOISE = range(4)

KINDS = ("complete", "ring", "star", "random-sparse")
WEIGHT_SCHEMES = ("uniform", "dirichlet")
DISTRIBUTIONS = ("uniform", "gaussian", "constant")
MAX_RETRIES = 200


def derive_seed(run_seed: int, *path: int) -> int:
    """64-bit seed for the task at ``path`` below ``run_seed``."""
    ss = np.random.SeedSequence([int(run_seed) & (2**64 - 1), *map(int, path)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str = "random-sparse"
    n: int = 50
    seed: int = 0
    density: float = 0.1
    weights: str = "dirichlet"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown network kind {self.kind!r}; expected one of {KINDS}")
        if self.weights not in WEIGHT_SCHEMES:
            raise ValueError(f"unknown weight scheme {self.weights!r}; expected one of {WEIGHT_SCHEMES}")
        if not 0 < self.density <= 1:
            raise ValueError(f"density must lie in (0, 1], got {self.density!r}")
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")


def _adjacency(spec: GeneratorSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.n
    if spec.kind == "complete":
        adj = ~np.eye(n, dtype=bool)
    elif spec.kind == "ring":
        adj = np.zeros((n, n), dtype=bool)
        adj[np.arange(n), (np.arange(n) + 1) % n] = True
    elif spec.kind == "star":
        adj = np.zeros((n, n), dtype=bool)
        adj[0, 1:] = True
        adj[1:, 0] = True
    else:
        for _ in range(MAX_RETRIES):
            adj = rng.random((n, n)) < spec.density
            np.fill_diagonal(adj, False)
            if adj.any(axis=1).all() and check_structure(InfluenceMatrix(_uniform_rows(adj))).irreducible:
                return adj
        raise ValueError(
            f"no strongly connected random-sparse graph with n={n}, density={spec.density} "
            f"after {MAX_RETRIES} attempts"
        )
    return adj


def _uniform_rows(adj: np.ndarray) -> np.ndarray:
    w = adj.astype(float)
    return w / w.sum(axis=1, keepdims=True)


def gen_network(spec: GeneratorSpec) -> InfluenceMatrix:
    """Strongly connected zero-diagonal row-stochastic ``C``.

    ``uniform`` spreads each row evenly over its out-neighbors; ``dirichlet``
    draws each positive weight from U(0.1, 1) before normalizing the row, which
    keeps every edge weight bounded away from zero.
    """
    rng = make_rng(spec.seed)
    adj = _adjacency(spec, rng)
    if spec.weights == "uniform":
        w = _uniform_rows(adj)
    else:
        w = np.where(adj, rng.uniform(0.1, 1.0, size=adj.shape), 0.0)
        w /= w.sum(axis=1, keepdims=True)
    return InfluenceMatrix(w)


def gen_resistance(n: int, low: float = 0.05, high: float = 0.95, seed: int = 0) -> ResistanceProfile:
    if not 0 < low < high < 1:
        raise ValueError(f"need 0 < low < high < 1, got low={low!r}, high={high!r}")
    if n < 1:
        raise ValueError("n must be positive")
    return ResistanceProfile(make_rng(seed).uniform(low, high, size=n))


def gen_opinions(
    n: int,
    m: int = 1,
    distribution: str = "uniform",
    a: float = 0.0,
    b: float = 1.0,
    seed: int = 0,
) -> OpinionState:
    """Initial opinions.

    ``uniform`` draws from U(a, b), ``gaussian`` from N(a, b**2), and
    ``constant`` fills every entry with ``a`` (a consensus start).
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    rng = make_rng(seed)
    if distribution == "uniform":
        if not a < b:
            raise ValueError("uniform opinions need a < b")
        x = rng.uniform(a, b, size=(n, m))
    elif distribution == "gaussian":
        if not b > 0:
            raise ValueError("gaussian opinions need a positive scale b")
        x = rng.normal(a, b, size=(n, m))
    elif distribution == "constant":
        x = np.full((n, m), float(a))
    else:
        raise ValueError(f"unknown distribution {distribution!r}; expected one of {DISTRIBUTIONS}")
    return OpinionState(x)


def perturb(tr: Trajectory, sigma: float, seed: int = 0) -> Trajectory:
    """Add i.i.d. N(0, sigma**2) noise to every observed opinion.

    Noise is drawn in (t, node, column) order, so a shorter trajectory with
    the same seed receives a prefix of the same noise.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma!r}")
    if sigma == 0:
        return tr
    noise = make_rng(seed).standard_normal(tr.states.shape)
    return Trajectory(tr.states + sigma * noise)
