"""Influence networks, resistance profiles and the DeGroot process.

An influence system is described twice over.  The *coupled* form is a single
row-stochastic matrix ``W`` whose diagonal holds every individual's weight on
their own opinion.  The *factored* form splits it into the observable
zero-diagonal interpersonal weights ``C`` and the hidden self-weights ``d``::

    W = (I - D) C + D,        D = diag(d)

Both forms drive the same update ``x(t+1) = W x(t)``.  Opinion states are
``n x m`` arrays, one column per issue; columns never interact.

Matrices with more than ``DENSE_LIMIT`` rows are stored as CSR.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

DENSE_LIMIT = 1024
ROW_SUM_TOL = 1e-12
RENORMALIZE_BAND = 1e-9
DEFAULT_TOL = 1e-10
MAX_STEPS = 10**6
PERRON_TOL = 1e-12

Matrix = Union[np.ndarray, sparse.csr_matrix]


class ConvergenceError(RuntimeError):
    """An iteration hit its step cap before meeting its tolerance."""


class RowSumWarning(UserWarning):
    """Row sums were off by more than ROW_SUM_TOL and got renormalized."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _coerce_matrix(entries, name: str) -> Matrix:
    if sparse.issparse(entries):
        mat = sparse.csr_matrix(entries, dtype=float)
    else:
        mat = np.array(entries, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square, got shape {mat.shape}")
    if mat.shape[0] < 1:
        raise ValueError(f"{name} must have at least one row")
    n = mat.shape[0]
    if sparse.issparse(mat) and n <= DENSE_LIMIT:
        mat = mat.toarray()
    elif not sparse.issparse(mat) and n > DENSE_LIMIT:
        mat = sparse.csr_matrix(mat)
    if sparse.issparse(mat):
        mat.eliminate_zeros()
        mat.sort_indices()
        data = mat.data
    else:
        data = mat
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{name} has non-finite entries")
    if np.any(data < 0):
        i, j = _first_cell(mat, lambda v: v < 0)
        raise ValueError(f"{name} has a negative weight at ({i}, {j})")
    return mat


def _first_cell(mat: Matrix, pred) -> tuple[int, int]:
    coo = sparse.coo_matrix(mat)
    hits = np.flatnonzero(pred(coo.data))
    k = hits[0]
    return int(coo.row[k]), int(coo.col[k])


def _row_sums(mat: Matrix) -> np.ndarray:
    return np.asarray(mat.sum(axis=1)).ravel()


def _diagonal(mat: Matrix) -> np.ndarray:
    return np.asarray(mat.diagonal(), dtype=float)


def _normalize_rows(mat: Matrix, name: str) -> Matrix:
    """Enforce unit row sums: exact within ROW_SUM_TOL, repaired within the band."""
    sums = _row_sums(mat)
    dev = np.abs(sums - 1.0)
    worst = int(np.argmax(dev))
    if dev[worst] <= ROW_SUM_TOL:
        return mat
    if dev[worst] > RENORMALIZE_BAND:
        raise ValueError(
            f"{name} row {worst} sums to {sums[worst]!r}, not 1 "
            f"(renormalization band is {RENORMALIZE_BAND:g})"
        )
    warnings.warn(
        f"{name}: max row-sum deviation {dev[worst]:.3g}; rows renormalized",
        RowSumWarning,
        stacklevel=4,
    )
    if sparse.issparse(mat):
        return sparse.csr_matrix(sparse.diags(1.0 / sums) @ mat)
    return mat / sums[:, None]


def _lock(mat: Matrix) -> Matrix:
    if sparse.issparse(mat):
        for a in (mat.data, mat.indices, mat.indptr):
            a.setflags(write=False)
        return mat
    return _freeze(mat)


class _SquareWeights:
    entries: Matrix

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.entries)

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.entries.toarray()
        return np.array(self.entries)

    def row(self, i: int) -> np.ndarray:
        if self.is_sparse:
            return self.entries.getrow(i).toarray().ravel()
        return np.array(self.entries[i])

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices (ascending) and weights of positive off-diagonal entries of row ``i``."""
        if self.is_sparse:
            lo, hi = self.entries.indptr[i], self.entries.indptr[i + 1]
            idx = np.array(self.entries.indices[lo:hi])
            w = np.array(self.entries.data[lo:hi])
        else:
            idx = np.flatnonzero(self.entries[i])
            w = np.array(self.entries[i, idx])
        keep = (idx != i) & (w > 0)
        return idx[keep], w[keep]


@dataclass(frozen=True, eq=False)
class InfluenceMatrix(_SquareWeights):
    """Relative interpersonal weights ``C``: zero diagonal, nonnegative, unit rows."""

    entries: Matrix

    def __post_init__(self):
        mat = _coerce_matrix(self.entries, "InfluenceMatrix")
        diag = _diagonal(mat)
        if np.any(diag != 0):
            i = int(np.flatnonzero(diag)[0])
            raise ValueError(f"InfluenceMatrix has self-weight {diag[i]!r} at ({i}, {i})")
        mat = _normalize_rows(mat, "InfluenceMatrix")
        object.__setattr__(self, "entries", _lock(mat))


@dataclass(frozen=True, eq=False)
class CoupledWeights(_SquareWeights):
    """Full row-stochastic ``W`` with every self-weight strictly inside (0, 1)."""

    entries: Matrix

    def __post_init__(self):
        mat = _coerce_matrix(self.entries, "CoupledWeights")
        mat = _normalize_rows(mat, "CoupledWeights")
        diag = _diagonal(mat)
        bad = np.flatnonzero((diag <= 0) | (diag >= 1))
        if bad.size:
            i = int(bad[0])
            raise ValueError(f"CoupledWeights self-weight w[{i},{i}] = {diag[i]!r} is outside (0, 1)")
        object.__setattr__(self, "entries", _lock(mat))

    @property
    def diagonal(self) -> np.ndarray:
        return _diagonal(self.entries)


@dataclass(frozen=True, eq=False)
class ResistanceProfile:
    """Self-weights ``d``, each strictly between 0 and 1."""

    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float).reshape(-1)
        if d.size == 0:
            raise ValueError("ResistanceProfile needs at least one value")
        bad = np.flatnonzero(~np.isfinite(d) | (d <= 0) | (d >= 1))
        if bad.size:
            i = int(bad[0])
            raise ValueError(f"resistance d[{i}] = {d[i]!r} is outside the open interval (0, 1)")
        object.__setattr__(self, "d", _freeze(d))

    @property
    def n(self) -> int:
        return self.d.size

    def __len__(self) -> int:
        return self.d.size


@dataclass(frozen=True, eq=False)
class OpinionState:
    """``n x m`` opinions; a 1-D input is read as a single issue column."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"opinion state must be n x m, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("opinion state has non-finite entries")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``x(0), x(1), ...`` stacked into a ``(T+1, n, m)`` array."""

    states: np.ndarray

    def __post_init__(self):
        s = self.states
        if isinstance(s, (list, tuple)):
            s = [x.values if isinstance(x, OpinionState) else OpinionState(x).values for x in s]
            if len({x.shape for x in s}) > 1:
                raise ValueError("all trajectory states must share n and m")
            s = np.stack(s) if s else np.empty((0, 0, 0))
        s = np.array(s, dtype=float)
        if s.ndim == 2:
            s = s[:, :, None]
        if s.ndim != 3 or s.shape[0] < 1 or s.shape[1] < 1 or s.shape[2] < 1:
            raise ValueError(f"trajectory must hold at least one n x m state, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("trajectory has non-finite entries")
        object.__setattr__(self, "states", _freeze(s))

    def __len__(self) -> int:
        return self.states.shape[0]

    def __getitem__(self, t: int) -> OpinionState:
        return OpinionState(self.states[t])

    def __iter__(self):
        return (OpinionState(s) for s in self.states)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def m(self) -> int:
        return self.states.shape[2]

    @property
    def steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def initial(self) -> OpinionState:
        return self[0]

    @property
    def final(self) -> OpinionState:
        return self[-1]

    def truncate(self, steps: int) -> "Trajectory":
        return Trajectory(self.states[: steps + 1])

    def extend(self, other: "Trajectory") -> "Trajectory":
        """Append ``other``, whose first state must repeat this one's last."""
        if other.states.shape[1:] != self.states.shape[1:]:
            raise ValueError("trajectories differ in n or m")
        if not np.array_equal(other.states[0], self.states[-1]):
            raise ValueError("continuation must start from the final state")
        return Trajectory(np.concatenate([self.states, other.states[1:]]))


def _check_n(n: int, *objs) -> None:
    for o in objs:
        if o.n != n:
            raise ValueError(f"dimension mismatch: expected n={n}, got {o.n} ({type(o).__name__})")


def compose_weights(c: InfluenceMatrix, d: ResistanceProfile) -> CoupledWeights:
    """Build ``W`` with ``w_ii = d_i`` and ``w_ij = (1 - d_i) c_ij``."""
    _check_n(c.n, d)
    keep = 1.0 - d.d
    if c.is_sparse:
        w = sparse.diags(keep) @ c.entries + sparse.diags(d.d)
    else:
        w = keep[:, None] * c.entries
        w[np.diag_indices(c.n)] = d.d
    return CoupledWeights(w)


def decompose_weights(w: CoupledWeights) -> tuple[InfluenceMatrix, ResistanceProfile]:
    """Split ``W`` into zero-diagonal ``C`` and self-weights ``d``."""
    d = w.diagonal
    if np.any(d >= 1):
        i = int(np.flatnonzero(d >= 1)[0])
        raise ValueError(f"w[{i},{i}] = 1 leaves no interpersonal weight to normalize")
    if w.is_sparse:
        off = w.entries - sparse.diags(d)
        c = sparse.diags(1.0 / (1.0 - d)) @ off
        c = sparse.csr_matrix(c)
        c.setdiag(0.0)
        c.eliminate_zeros()
    else:
        c = w.dense() / (1.0 - d)[:, None]
        c[np.diag_indices(w.n)] = 0.0
    return InfluenceMatrix(c), ResistanceProfile(d)


def step(w: CoupledWeights, x: OpinionState) -> OpinionState:
    _check_n(w.n, x)
    return OpinionState(w.entries @ x.values)


def step_factored(c: InfluenceMatrix, d: ResistanceProfile, x: OpinionState) -> OpinionState:
    """One update written as ``d_i x_i + (1 - d_i) sum_j c_ij x_j``."""
    _check_n(c.n, d, x)
    dd = d.d[:, None]
    return OpinionState(dd * x.values + (1.0 - dd) * (c.entries @ x.values))


def iterate(
    w: CoupledWeights,
    x0: OpinionState,
    steps: Optional[int] = None,
    tol: Optional[float] = None,
    max_steps: int = MAX_STEPS,
) -> Trajectory:
    """Run ``x <- W x`` from ``x0``.

    Stops after ``steps`` updates, or as soon as the max-norm change between
    successive states drops below ``tol``, whichever comes first.  With neither
    given, ``tol`` defaults to ``DEFAULT_TOL``.  A tolerance-only run that is
    still moving after ``max_steps`` raises ``ConvergenceError``.
    """
    _check_n(w.n, x0)
    if steps is None and tol is None:
        tol = DEFAULT_TOL
    if steps is not None and (int(steps) != steps or steps < 1):
        raise ValueError(f"steps must be a positive integer, got {steps!r}")
    if tol is not None and not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    if max_steps < 1:
        raise ValueError("max_steps must be positive")

    mat = w.entries
    x = np.array(x0.values)
    states = [x]
    limit = int(steps) if steps is not None else max_steps
    for _ in range(limit):
        nxt = np.asarray(mat @ x)
        if not np.all(np.isfinite(nxt)):
            raise FloatingPointError(f"non-finite opinions at t={len(states)}")
        states.append(nxt)
        change = np.max(np.abs(nxt - x))
        x = nxt
        if tol is not None and change < tol:
            break
    else:
        if steps is None:
            raise ConvergenceError(f"max change still >= {tol:g} after {max_steps} steps")
    return Trajectory(np.stack(states))


def simulate(
    c: InfluenceMatrix,
    d: ResistanceProfile,
    x0: OpinionState,
    steps: Optional[int] = None,
    tol: Optional[float] = None,
    max_steps: int = MAX_STEPS,
) -> Trajectory:
    """Trajectory of the system ``(c, d)`` from ``x0``; stop rules as in :func:`iterate`."""
    return iterate(compose_weights(c, d), x0, steps=steps, tol=tol, max_steps=max_steps)


def max_change(tr: Trajectory) -> float:
    """Max-norm difference between the last two states (0 for a single state)."""
    if len(tr) < 2:
        return 0.0
    return float(np.max(np.abs(tr.states[-1] - tr.states[-2])))


@dataclass(frozen=True)
class StructureReport:
    irreducible: bool
    n_components: int
    component_labels: tuple[int, ...]
    # any valid ResistanceProfile puts a positive entry on every diagonal
    aperiodic_with_resistance: bool = True

    @property
    def note(self) -> str:
        if self.irreducible:
            return "strongly connected; positive self-weights make W primitive"
        return f"{self.n_components} strongly connected components; consensus not guaranteed"


def _strong_components(mat: Matrix) -> tuple[int, np.ndarray]:
    pattern = sparse.csr_matrix(mat)
    pattern.setdiag(0.0)
    pattern.eliminate_zeros()
    return connected_components(pattern, directed=True, connection="strong")


def check_structure(c: Union[InfluenceMatrix, CoupledWeights]) -> StructureReport:
    """Strong connectivity of the digraph ``i -> j`` for positive off-diagonal weights."""
    k, labels = _strong_components(c.entries)
    return StructureReport(
        irreducible=bool(k == 1),
        n_components=int(k),
        component_labels=tuple(int(v) for v in labels),
    )


def perron_vector(
    w: CoupledWeights, tol: float = PERRON_TOL, max_iter: int = MAX_STEPS
) -> np.ndarray:
    """Left eigenvector ``v W = v`` summing to one, by power iteration."""
    if not check_structure(w).irreducible:
        raise ValueError("W is reducible; a single consensus value is not guaranteed")
    wt = w.entries.T.tocsr() if w.is_sparse else w.entries.T
    v = np.full(w.n, 1.0 / w.n)
    for _ in range(max_iter):
        nxt = np.asarray(wt @ v)
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - v)) < tol:
            return nxt
        v = nxt
    raise ConvergenceError(f"power iteration not within {tol:g} after {max_iter} iterations")


def consensus_value(w: CoupledWeights, x0: OpinionState, tol: float = PERRON_TOL) -> np.ndarray:
    """Limit opinion (one per column) that the process reaches from ``x0``."""
    _check_n(w.n, x0)
    return perron_vector(w, tol=tol) @ x0.values


def rescale(tr: Trajectory, alpha: float, beta: float = 0.0) -> Trajectory:
    """Map every opinion to ``alpha * x + beta`` (``alpha > 0``)."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    if not np.isfinite(beta):
        raise ValueError("beta must be finite")
    return Trajectory(alpha * tr.states + beta)


def opinion_difference(
    tr: Trajectory,
    i: int,
    j: int,
    t: int,
    k: int = 0,
    alpha: float = 1.0,
    column: Optional[int] = None,
) -> float:
    """``alpha * (x_i(t+k) - x_j(t))`` on one issue column."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    if column is None:
        if tr.m != 1:
            raise ValueError(f"trajectory has m={tr.m} columns; pass column=")
        column = 0
    T = len(tr)
    if not (0 <= t < T and 0 <= t + k < T):
        raise IndexError(f"time indices t={t}, t+k={t + k} outside 0..{T - 1}")
    for name, v in (("i", i), ("j", j)):
        if not 0 <= v < tr.n:
            raise IndexError(f"node {name}={v} outside 0..{tr.n - 1}")
    if not 0 <= column < tr.m:
        raise IndexError(f"column {column} outside 0..{tr.m - 1}")
    return float(alpha * (tr.states[t + k, i, column] - tr.states[t, j, column]))


@dataclass(frozen=True)
class HullViolation:
    t: int
    node: int
    column: int
    value: float
    lower: float
    upper: float

    @property
    def magnitude(self) -> float:
        return float(max(self.lower - self.value, self.value - self.upper))


@dataclass(frozen=True)
class HullReport:
    tolerance: float
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    violations: tuple[HullViolation, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def max_magnitude(self) -> float:
        return max((v.magnitude for v in self.violations), default=0.0)


def hull_check(tr: Trajectory, tolerance: float = DEFAULT_TOL) -> HullReport:
    """Find opinions that leave the per-column range of the initial state."""
    s = tr.states
    lo = s[0].min(axis=0)
    hi = s[0].max(axis=0)
    out = (s < lo - tolerance) | (s > hi + tolerance)
    found = tuple(
        HullViolation(int(t), int(i), int(k), float(s[t, i, k]), float(lo[k]), float(hi[k]))
        for t, i, k in zip(*np.nonzero(out))
    )
    return HullReport(tolerance, tuple(lo.tolist()), tuple(hi.tolist()), found)


@dataclass(frozen=True)
class ConsensusReport:
    tolerance: float
    consensus_columns: tuple[int, ...]
    max_deviation: float

    @property
    def initial_consensus(self) -> bool:
        return bool(self.consensus_columns)

    @property
    def preserved(self) -> bool:
        return self.max_deviation <= self.tolerance

    ok = preserved


def consensus_preservation_check(tr: Trajectory, tolerance: float = ROW_SUM_TOL) -> ConsensusReport:
    """For columns that start in consensus, the largest later departure from it."""
    s = tr.states
    spread = s[0].max(axis=0) - s[0].min(axis=0)
    cols = np.flatnonzero(spread <= tolerance)
    dev = 0.0
    if cols.size:
        dev = float(np.max(np.abs(s[:, :, cols] - s[0, :, cols].T[None])))
    return ConsensusReport(tolerance, tuple(int(k) for k in cols), dev)


def as_state(x: Union[OpinionState, Sequence[float], np.ndarray]) -> OpinionState:
    return x if isinstance(x, OpinionState) else OpinionState(np.asarray(x, dtype=float))


def stack_states(states: Iterable[OpinionState]) -> Trajectory:
    return Trajectory(list(states))
