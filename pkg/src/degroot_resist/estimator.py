"""Recover hidden self-weights from observed opinion trajectories.

Writing one update as ``x_i(t+1) - x_i(t) = (1 - d_i) (s_i(t) - x_i(t))``,
with ``s_i(t) = sum_j c_ij x_j(t)`` the social term, gives the single-sample
estimate ``d_i = 1 - (x_i(t+1) - x_i(t)) / (s_i(t) - x_i(t))``.  Because the
rows of ``C`` sum to one, any shift of the opinion scale cancels in both
differences and any positive stretch cancels in the ratio, so the estimate
does not depend on the units opinions are measured in.

Only node ``i``'s own row of ``C`` and the opinions of its positive-weight
neighbors enter the estimate.

Degeneracy is judged on the range-normalized denominator: a sample is dropped
when ``|s_i(t) - x_i(t)| <= epsilon * r``, where ``r`` is the spread of
``x_i(t)`` and its neighbors' opinions at ``t`` in that column.  The
denominator is accumulated as ``sum_j c_ij (x_j - x_i)`` so that a local
consensus yields exactly zero.  A denominator within ``ROUNDOFF`` of the
local opinion magnitude is rounding noise (a drifted consensus) and is also
dropped.

Multi-column opinions are treated as independent observations of the same
``d_i``; this is an extension of the scalar formula.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import CoupledWeights, InfluenceMatrix, OpinionState, ResistanceProfile, Trajectory, compose_weights

DEFAULT_EPSILON = 1e-9
# agreement required between per-column single-step estimates
COLUMN_TOL = 1e-6
DISPERSION_TOL = 1e-6
# denominators below this fraction of max |x| in the local set count as zero
ROUNDOFF = 1e-12


class Status(str, enum.Enum):
    OK = "Ok"
    DEGENERATE = "Degenerate"
    OUT_OF_RANGE_LOW = "OutOfRangeLow"
    OUT_OF_RANGE_HIGH = "OutOfRangeHigh"
    BOUNDARY_ZERO = "BoundaryZero"
    BOUNDARY_ONE = "BoundaryOne"

    def __str__(self) -> str:
        return self.value

    @property
    def has_value(self) -> bool:
        return self in (Status.OK, Status.BOUNDARY_ZERO, Status.BOUNDARY_ONE)

    @property
    def out_of_range(self) -> bool:
        return self in (Status.OUT_OF_RANGE_LOW, Status.OUT_OF_RANGE_HIGH)


@dataclass(frozen=True)
class NodeEstimate:
    """Estimate for one node (static) or one node at one time (time-varying).

    ``value`` is set only for Ok and boundary statuses.  ``raw`` always carries
    the unclipped pooled value when there was at least one usable
    sample, so out-of-range fits stay inspectable.
    """

    node: int
    value: Optional[float]
    status: Status
    samples_used: int
    residual_rms: float
    raw: Optional[float] = None
    t: Optional[int] = None

    def __post_init__(self):
        if (self.value is not None) != self.status.has_value:
            raise ValueError(f"value presence inconsistent with status {self.status}")
        if self.status is Status.OK and not 0 < self.value < 1:
            raise ValueError(f"Ok estimate {self.value!r} outside (0, 1)")


@dataclass(frozen=True)
class EstimationReport:
    estimates: tuple[NodeEstimate, ...]
    epsilon: float
    mode: str  # "static" or "varying"
    n: int
    # time-varying only: per-node spread of the per-step estimates
    dispersion: Mapping[int, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.estimates)

    def __iter__(self):
        return iter(self.estimates)

    @property
    def values(self) -> np.ndarray:
        """Static mode: length-n values, NaN where no value is reported."""
        self._require_static()
        out = np.full(self.n, np.nan)
        for e in self.estimates:
            if e.value is not None:
                out[e.node] = e.value
        return out

    @property
    def statuses(self) -> list[Status]:
        return [e.status for e in self.estimates]

    def count(self, status: Status) -> int:
        return sum(e.status is status for e in self.estimates)

    @property
    def n_out_of_range(self) -> int:
        return sum(e.status.out_of_range for e in self.estimates)

    @property
    def all_ok(self) -> bool:
        return all(e.status is Status.OK for e in self.estimates)

    @property
    def misfit_nodes(self) -> list[int]:
        return sorted(i for i, s in self.dispersion.items() if s > DISPERSION_TOL)

    def for_node(self, i: int) -> list[NodeEstimate]:
        return [e for e in self.estimates if e.node == i]

    def _require_static(self):
        if self.mode != "static":
            raise ValueError("per-node values are defined for static reports only")


def _check_epsilon(epsilon: float) -> None:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")


def _check_row(c_row: np.ndarray, i: int) -> np.ndarray:
    c_row = np.asarray(c_row, dtype=float).reshape(-1)
    if not 0 <= i < c_row.size:
        raise IndexError(f"node {i} outside 0..{c_row.size - 1}")
    if c_row[i] != 0:
        raise ValueError(f"c_row has self-weight {c_row[i]!r} at node {i}")
    if np.any(c_row < 0) or abs(c_row.sum() - 1.0) > 1e-9:
        raise ValueError("c_row must be nonnegative and sum to 1")
    return c_row


def social_term(c_row, x: OpinionState, i: int) -> np.ndarray:
    """``sum_{j != i} c_ij x_j`` per column."""
    c_row = _check_row(c_row, i)
    if c_row.size != x.n:
        raise ValueError(f"dimension mismatch: c_row has {c_row.size} entries, state has n={x.n}")
    return c_row @ x.values


def _local_samples(weights: np.ndarray, nbr: np.ndarray, own: np.ndarray, own_next: np.ndarray):
    """Regression pairs for one node.

    ``nbr`` is ``(T, k, m)`` neighbor opinions, ``own``/``own_next`` are
    ``(T, m)``.  Returns ``(a, y, r)``: denominator ``s - x_i``, change
    ``x_i(t+1) - x_i(t)`` and local spread, each ``(T, m)``.
    """
    diffs = nbr - own[:, None, :]
    a = (weights[None, :, None] * diffs).sum(axis=1)
    y = own_next - own
    r = np.maximum(nbr.max(axis=1), own) - np.minimum(nbr.min(axis=1), own)
    scale = np.maximum(np.abs(nbr).max(axis=1), np.abs(own))
    a = np.where(np.abs(a) <= ROUNDOFF * scale, 0.0, a)
    return a, y, r


def _classify(v: float, epsilon: float) -> Status:
    if abs(v - 1.0) <= epsilon:
        return Status.BOUNDARY_ONE
    if abs(v) <= epsilon:
        return Status.BOUNDARY_ZERO
    if 0.0 < v < 1.0:
        return Status.OK
    return Status.OUT_OF_RANGE_LOW if v < 0 else Status.OUT_OF_RANGE_HIGH


def _pooled_slope(a: np.ndarray, y: np.ndarray, q: float) -> float:
    """Slope ``b`` of ``y = b a`` when both ``y`` and ``a`` carry observation noise.

    With i.i.d. noise of equal scale on every observed opinion, the noise on
    ``(y, a)`` has covariance proportional to ``[[2, 1], [1, 1 + q]]`` where
    ``q = sum_j c_ij**2``.  The fit is the generalized total least squares
    solution for that shape: the smallest root ``lam`` of
    ``det(M - lam S) = 0`` for the scatter matrix ``M``, then
    ``b = (M_ay - lam S_ay) / (M_aa - lam S_aa)``.  Plain least squares is
    biased here because ``x_i(t)`` enters both ``y`` and ``a``.  On exact data
    ``M`` is rank one, ``lam = 0`` and ``b = M_ay / M_aa``.
    """
    m_yy, m_ay, m_aa = float(np.dot(y, y)), float(np.dot(a, y)), float(np.dot(a, a))
    s_yy, s_ay, s_aa = 2.0, 1.0, 1.0 + q
    qa = s_yy * s_aa - s_ay * s_ay
    qb = -(m_yy * s_aa + m_aa * s_yy - 2.0 * m_ay * s_ay)
    qc = m_yy * m_aa - m_ay * m_ay
    lam = 2.0 * qc / (-qb + np.sqrt(max(qb * qb - 4.0 * qa * qc, 0.0)))
    denom = m_aa - lam * s_aa
    if not denom > 0:
        # noise swamps every sample; fall back to ordinary least squares
        return m_ay / m_aa
    return (m_ay - lam * s_ay) / denom


def _fit(node, a, y, r, epsilon, q, t=None, column_tol=None) -> NodeEstimate:
    """Pool the usable samples of one node into a single estimate.

    With ``column_tol`` set (single-step use), the per-column estimates must
    agree within it; otherwise the estimate is flagged out of range on the side
    of the most deviant column.
    """
    usable = np.abs(a) > epsilon * r
    k = int(usable.sum())
    if k == 0:
        return NodeEstimate(node, None, Status.DEGENERATE, 0, 0.0, None, t)
    au, yu = a[usable], y[usable]
    slope = _pooled_slope(au, yu, q)
    v = 1.0 - slope
    rms = float(np.sqrt(np.mean((yu - slope * au) ** 2)))
    status = _classify(v, epsilon)
    if column_tol is not None and k > 1 and not status.out_of_range:
        per_col = 1.0 - yu / au
        hi, lo = per_col.max() - v, v - per_col.min()
        if max(hi, lo) > column_tol:
            status = Status.OUT_OF_RANGE_HIGH if hi >= lo else Status.OUT_OF_RANGE_LOW
    value = v if status.has_value else None
    return NodeEstimate(node, value, status, k, rms, v, t)


def _single(weights, nbr_vals, own_t, own_next, i, epsilon) -> NodeEstimate:
    _check_epsilon(epsilon)
    a, y, r = _local_samples(weights, nbr_vals[None], own_t[None], own_next[None])
    return _fit(i, a, y, r, epsilon, float(np.dot(weights, weights)), column_tol=COLUMN_TOL)


def estimate_single(
    c_row,
    x_t: OpinionState,
    x_next_i,
    i: int,
    epsilon: float = DEFAULT_EPSILON,
) -> NodeEstimate:
    """Estimate ``d_i`` from one observed update of node ``i``."""
    _check_epsilon(epsilon)
    c_row = _check_row(c_row, i)
    if c_row.size != x_t.n:
        raise ValueError(f"dimension mismatch: c_row has {c_row.size} entries, state has n={x_t.n}")
    idx = np.flatnonzero(c_row > 0)
    own_next = np.asarray(x_next_i, dtype=float).reshape(-1)
    if own_next.size != x_t.m:
        raise ValueError(f"x_next_i must have m={x_t.m} entries")
    return _single(c_row[idx], x_t.values[idx], x_t.values[i], own_next, i, epsilon)


def estimate_ego(
    c_row,
    own_pair,
    neighbor_opinions: Mapping[int, Sequence[float]],
    i: int,
    epsilon: float = DEFAULT_EPSILON,
) -> NodeEstimate:
    """Estimate ``d_i`` from node ``i``'s row, its own two opinions and its neighbors' opinions.

    ``neighbor_opinions`` maps neighbor index to its opinion at ``t`` (scalar
    or length-m).  Entries for zero-weight nodes are ignored.
    """
    _check_epsilon(epsilon)
    c_row = _check_row(c_row, i)
    idx = np.flatnonzero(c_row > 0)
    missing = [int(j) for j in idx if int(j) not in neighbor_opinions]
    if missing:
        raise KeyError(f"no opinion for positive-weight neighbor(s) {missing} of node {i}")
    own_t, own_next = (np.asarray(v, dtype=float).reshape(-1) for v in own_pair)
    nbr = np.array([np.asarray(neighbor_opinions[int(j)], dtype=float).reshape(-1) for j in idx])
    if nbr.shape[1] != own_t.size or own_next.size != own_t.size:
        raise ValueError("own and neighbor opinions must share the number of columns")
    return _single(c_row[idx], nbr, own_t, own_next, i, epsilon)


def _node_series(c: InfluenceMatrix, tr: Trajectory, i: int):
    idx, w = c.neighbors(i)
    s = tr.states
    a, y, r = _local_samples(w, s[:-1, idx, :], s[:-1, i, :], s[1:, i, :])
    return a, y, r, float(np.dot(w, w))


def _prepare(c: InfluenceMatrix, tr: Trajectory, epsilon: float) -> None:
    _check_epsilon(epsilon)
    if len(tr) < 2:
        raise ValueError("estimation needs a trajectory with at least 2 states")
    if c.n != tr.n:
        raise ValueError(f"dimension mismatch: C has n={c.n}, trajectory has n={tr.n}")


def estimate_static(
    c: InfluenceMatrix, tr: Trajectory, epsilon: float = DEFAULT_EPSILON
) -> EstimationReport:
    """One ``d_i`` per node, pooling every usable (step, column) sample.

    Samples are the pairs ``y = x_i(t+1) - x_i(t)``, ``a = s_i(t) - x_i(t)``
    with a non-degenerate ``a``, fitted to ``y = (1 - d_i) a`` by
    :func:`_pooled_slope`.  ``residual_rms`` is the RMS of ``y - (1 - d_i) a``
    in opinion units.
    """
    _prepare(c, tr, epsilon)
    out = []
    for i in range(c.n):
        a, y, r, q = _node_series(c, tr, i)
        out.append(_fit(i, a, y, r, epsilon, q))
    return EstimationReport(tuple(out), epsilon, "static", c.n)


def estimate_time_varying(
    c: InfluenceMatrix, tr: Trajectory, epsilon: float = DEFAULT_EPSILON
) -> EstimationReport:
    """One estimate per (node, step) with a usable denominator; no pooling over time.

    ``dispersion`` holds, per node, the spread of its per-step raw estimates.
    A spread above ``DISPERSION_TOL`` on clean data means a single fixed
    ``d_i`` does not fit; :attr:`EstimationReport.misfit_nodes` lists them.
    """
    _prepare(c, tr, epsilon)
    out = []
    dispersion = {}
    for i in range(c.n):
        a, y, r, q = _node_series(c, tr, i)
        raws = []
        for t in range(a.shape[0]):
            e = _fit(i, a[t : t + 1], y[t : t + 1], r[t : t + 1], epsilon, q, t=t, column_tol=COLUMN_TOL)
            if e.status is Status.DEGENERATE:
                continue
            out.append(e)
            raws.append(e.raw)
        if raws:
            dispersion[i] = float(max(raws) - min(raws))
    out.sort(key=lambda e: (e.node, e.t))
    return EstimationReport(tuple(out), epsilon, "varying", c.n, dispersion)


def estimate(c: InfluenceMatrix, tr: Trajectory, epsilon: float = DEFAULT_EPSILON, mode: str = "static"):
    if mode == "static":
        return estimate_static(c, tr, epsilon)
    if mode in ("varying", "time-varying"):
        return estimate_time_varying(c, tr, epsilon)
    raise ValueError(f"unknown estimation mode {mode!r}")


def reconstruct_weights(c: InfluenceMatrix, report: EstimationReport) -> CoupledWeights:
    """``W`` rebuilt from ``C`` and a static report in which every node is Ok."""
    if report.mode != "static":
        raise ValueError("reconstruction needs a static report")
    if report.n != c.n:
        raise ValueError(f"dimension mismatch: C has n={c.n}, report has n={report.n}")
    bad = [e for e in report.estimates if e.status is not Status.OK]
    if bad:
        names = ", ".join(f"node {e.node} ({e.status})" for e in bad)
        raise ValueError(f"cannot reconstruct W without Ok estimates for {names}")
    return compose_weights(c, ResistanceProfile(report.values))
