"""Text formats for networks, trajectories, resistances, reports and run configs.

Formats
-------
network (``.txt``)
    First non-comment line is ``n``; every further line is ``i j weight`` for
    one positive ``c_ij`` (0-based).  ``#`` starts a comment line.
trajectory / opinions (``.csv``)
    Long format with header ``t,node,column,value``; every (t, node, column)
    combination must appear exactly once.  An opinions file is a trajectory
    with the single time ``t = 0``.
resistance (``.csv``)
    Header ``node,value``; one row per node.
report (``.csv``)
    ``# schema_version=1 mode=<static|varying> epsilon=<eps>`` then header
    ``node,t,value,status,samples_used,residual_rms``.  ``t`` is ``static``
    for pooled estimates and ``value`` is empty when no value is reported.
run config (``.toml``)
    Flat ``key = value`` pairs, keys as in :class:`RunConfig`.

Floats are written with 17 significant digits, which round-trips IEEE doubles.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import re
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np
from scipy import sparse

from .core import DENSE_LIMIT, RENORMALIZE_BAND, InfluenceMatrix, OpinionState, ResistanceProfile, Trajectory
from .estimator import EstimationReport, NodeEstimate, Status

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
TRAJECTORY_HEADER = ["t", "node", "column", "value"]
RESISTANCE_HEADER = ["node", "value"]
REPORT_HEADER = ["node", "t", "value", "status", "samples_used", "residual_rms"]

PathLike = Union[str, Path]


class FormatError(ValueError):
    """Malformed or invariant-violating input file; message carries the location."""


def fmt(x: float) -> str:
    return "%.17g" % x


def _data_lines(path: PathLike):
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if s and not s.startswith("#"):
                yield lineno, s


def write_network(c: InfluenceMatrix, path: PathLike) -> None:
    coo = sparse.coo_matrix(c.entries)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"{c.n}\n")
        for k in order:
            fh.write(f"{coo.row[k]} {coo.col[k]} {fmt(coo.data[k])}\n")


def read_network(path: PathLike) -> InfluenceMatrix:
    lines = _data_lines(path)
    try:
        lineno, head = next(lines)
    except StopIteration:
        raise FormatError(f"{path}: empty network file") from None
    try:
        n = int(head)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: expected node count, got {head!r}") from None
    if n < 1:
        raise FormatError(f"{path}:{lineno}: node count must be positive")

    rows, cols, vals = [], [], []
    seen: dict[tuple[int, int], int] = {}
    for lineno, s in lines:
        parts = s.split()
        where = f"{path}:{lineno}"
        if len(parts) != 3:
            raise FormatError(f"{where}: expected 'i j weight', got {s!r}")
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise FormatError(f"{where}: cannot parse {s!r}") from None
        if not (0 <= i < n and 0 <= j < n):
            raise FormatError(f"{where}: index out of range 0..{n - 1} in {s!r}")
        if i == j:
            raise FormatError(f"{where}: self-loop weight {w!r} at cell ({i}, {j})")
        if not (math.isfinite(w) and w > 0):
            raise FormatError(f"{where}: weight at cell ({i}, {j}) must be positive and finite, got {w!r}")
        if (i, j) in seen:
            raise FormatError(f"{where}: duplicate cell ({i}, {j}), first on line {seen[i, j]}")
        seen[i, j] = lineno
        rows.append(i)
        cols.append(j)
        vals.append(w)

    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    sums = np.asarray(mat.sum(axis=1)).ravel()
    bad = np.flatnonzero(np.abs(sums - 1.0) > RENORMALIZE_BAND)
    if bad.size:
        i = int(bad[0])
        raise FormatError(f"{path}: row {i} sums to {sums[i]!r}, not 1")
    if n <= DENSE_LIMIT:
        mat = mat.toarray()
    return InfluenceMatrix(mat)


def write_trajectory(tr: Trajectory, path: PathLike) -> None:
    T, n, m = tr.states.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for t in range(T):
            for i in range(n):
                for k in range(m):
                    w.writerow([t, i, k, fmt(tr.states[t, i, k])])


def read_trajectory(path: PathLike) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader, None)
        if header != TRAJECTORY_HEADER:
            raise FormatError(f"{path}: header must be {','.join(TRAJECTORY_HEADER)}, got {header}")
        cells: dict[tuple[int, int, int], float] = {}
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 4:
                raise FormatError(f"{path}: row {lineno}: expected 4 fields, got {row}")
            try:
                key = (int(row[0]), int(row[1]), int(row[2]))
                v = float(row[3])
            except ValueError:
                raise FormatError(f"{path}: row {lineno}: cannot parse {row}") from None
            if min(key) < 0:
                raise FormatError(f"{path}: row {lineno}: negative index in {row}")
            if not math.isfinite(v):
                raise FormatError(f"{path}: row {lineno}: non-finite value {row[3]!r}")
            if key in cells:
                raise FormatError(f"{path}: row {lineno}: duplicate (t, node, column) = {key}")
            cells[key] = v
    if not cells:
        raise FormatError(f"{path}: no trajectory rows")
    T, n, m = (max(k[a] for k in cells) + 1 for a in range(3))
    if len(cells) != T * n * m:
        for key in np.ndindex(T, n, m):
            if key not in cells:
                raise FormatError(f"{path}: missing (t, node, column) = {tuple(int(v) for v in key)}")
    states = np.empty((T, n, m))
    for (t, i, k), v in cells.items():
        states[t, i, k] = v
    return Trajectory(states)


def write_opinions(x: OpinionState, path: PathLike) -> None:
    write_trajectory(Trajectory(x.values[None]), path)


def read_opinions(path: PathLike) -> OpinionState:
    tr = read_trajectory(path)
    if len(tr) != 1:
        raise FormatError(f"{path}: opinions file must contain only t = 0, found {len(tr)} times")
    return tr[0]


def write_resistance(d: ResistanceProfile, path: PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESISTANCE_HEADER)
        for i, v in enumerate(d.d):
            w.writerow([i, fmt(v)])


def read_resistance(path: PathLike) -> ResistanceProfile:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RESISTANCE_HEADER:
            raise FormatError(f"{path}: header must be {','.join(RESISTANCE_HEADER)}, got {header}")
        vals: dict[int, float] = {}
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            try:
                i, v = int(row[0]), float(row[1])
            except (ValueError, IndexError):
                raise FormatError(f"{path}: row {lineno}: cannot parse {row}") from None
            if i in vals or i < 0:
                raise FormatError(f"{path}: row {lineno}: bad or duplicate node {i}")
            if not 0 < v < 1:
                raise FormatError(f"{path}: row {lineno}: resistance {v!r} outside (0, 1)")
            vals[i] = v
    n = len(vals)
    if set(vals) != set(range(n)):
        raise FormatError(f"{path}: nodes must be 0..{n - 1} without gaps")
    return ResistanceProfile([vals[i] for i in range(n)])


def write_report(report: EstimationReport, path: PathLike) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION} mode={report.mode} epsilon={fmt(report.epsilon)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for e in report.estimates:
            w.writerow([
                e.node,
                "static" if e.t is None else e.t,
                "" if e.value is None else fmt(e.value),
                e.status.value,
                e.samples_used,
                fmt(e.residual_rms),
            ])


def read_report(path: PathLike) -> EstimationReport:
    with open(path, newline="") as fh:
        first = fh.readline()
        meta = dict(re.findall(r"(\w+)=(\S+)", first))
        if not first.startswith("#") or meta.get("schema_version") != str(SCHEMA_VERSION):
            raise FormatError(f"{path}: missing or unsupported schema header {first.strip()!r}")
        reader = csv.reader(fh)
        if next(reader, None) != REPORT_HEADER:
            raise FormatError(f"{path}: bad column header")
        out = []
        for lineno, row in enumerate(reader, 3):
            try:
                value = float(row[2]) if row[2] else None
                out.append(NodeEstimate(
                    node=int(row[0]),
                    value=value,
                    status=Status(row[3]),
                    samples_used=int(row[4]),
                    residual_rms=float(row[5]),
                    raw=value,
                    t=None if row[1] == "static" else int(row[1]),
                ))
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}: row {lineno}: {exc}") from None
    n = 1 + max((e.node for e in out), default=-1)
    return EstimationReport(tuple(out), float(meta["epsilon"]), meta["mode"], n)


def write_table(rows: Sequence[dict], path: PathLike, columns: Optional[Sequence[str]] = None) -> None:
    """Plain CSV of dict rows; floats at full precision."""
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in (r[c] for c in columns)])


def write_manifest(data: dict, path: PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- run configuration --------------------------------------------------------

OPERATIONS = ("generate", "simulate", "perturb", "estimate", "validate", "rescale", "sweep")

# keys that describe a generated object, by the path key that replaces them
SOURCE_GROUPS = {
    "network": ("kind", "n", "density", "weights"),
    "resistance": ("resistance_low", "resistance_high"),
    "opinions": ("m", "distribution", "dist_a", "dist_b"),
}


class ConfigError(ValueError):
    pass


def _opt(default, help, **kw):
    return field(default=default, metadata={"help": help, **kw})


@dataclass
class RunConfig:
    operation: Optional[str] = _opt(None, "pipeline stage run by `degroot-resist run`")
    seed: int = _opt(0, "run seed; every random draw derives from it")
    # network: generated ...
    kind: str = _opt("random-sparse", "network kind: complete, ring, star, random-sparse")
    n: int = _opt(50, "number of nodes")
    density: float = _opt(0.1, "edge probability for random-sparse")
    weights: str = _opt("dirichlet", "row weights: uniform or dirichlet")
    # ... or read
    network: Optional[str] = _opt(None, "network file (replaces kind/n/density/weights)")
    resistance_low: float = _opt(0.05, "lower bound of generated resistances")
    resistance_high: float = _opt(0.95, "upper bound of generated resistances")
    resistance: Optional[str] = _opt(None, "resistance file (replaces resistance_low/high)")
    m: int = _opt(1, "issue columns per opinion state")
    distribution: str = _opt("uniform", "initial opinions: uniform(a,b), gaussian(a,b), constant(a)")
    dist_a: float = _opt(0.0, "first distribution parameter")
    dist_b: float = _opt(1.0, "second distribution parameter")
    opinions: Optional[str] = _opt(None, "initial opinions file (replaces m/distribution/dist_a/dist_b)")
    steps: Optional[int] = _opt(None, "simulation horizon in steps")
    tol: Optional[float] = _opt(1e-10, "stop when the max change between states falls below this")
    max_steps: int = _opt(10**6, "hard cap on simulation steps")
    trajectory: Optional[str] = _opt(None, "input trajectory (default <out_dir>/trajectory.csv)")
    epsilon: float = _opt(1e-9, "degeneracy threshold relative to the local opinion spread")
    mode: str = _opt("static", "estimation mode: static or varying")
    alpha: float = _opt(1.0, "rescale factor (> 0)")
    beta: float = _opt(0.0, "rescale shift")
    sigma: float = _opt(0.0, "observation noise scale for perturb")
    validate_tol: float = _opt(1e-10, "tolerance for hull and consensus checks")
    sweep_sigmas: list = _opt((0.001, 0.01), "noise scales swept", factory=float)
    sweep_lengths: list = _opt((2, 5, 10, 25), "trajectory lengths (steps) swept", factory=int)
    sweep_replicates: int = _opt(100, "random systems per sweep cell")
    jobs: int = _opt(1, "worker processes for sweep")
    out_dir: str = _opt("out", "directory for default outputs")
    output: Optional[str] = _opt(None, "output file (default depends on the stage)")

    def __post_init__(self):
        self.sweep_sigmas = tuple(float(v) for v in self.sweep_sigmas)
        self.sweep_lengths = tuple(int(v) for v in self.sweep_lengths)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _field_kind(f) -> str:
    t = str(f.type)
    if "list" in t:
        return "list-" + f.metadata["factory"].__name__
    for name in ("int", "float", "str"):
        if t.startswith(name) or f"[{name}]" in t:
            return name
    raise TypeError(t)


def coerce_value(key: str, value: Any) -> Any:
    """Convert a TOML or command-line value to the type of ``key``."""
    f = _FIELDS[key]
    kind = _field_kind(f)
    optional = "Optional" in str(f.type)
    if value is None or (optional and isinstance(value, str) and value.lower() in ("none", "")):
        if not optional:
            raise ConfigError(f"{key} cannot be empty")
        return None
    try:
        if kind.startswith("list-"):
            factory = f.metadata["factory"]
            items = value.split(",") if isinstance(value, str) else value
            return tuple(factory(v) for v in items)
        if kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            if isinstance(value, bool):
                raise ValueError(value)
            return int(value)
        if kind == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot interpret {value!r} as {kind}") from None


def validate_config(cfg: RunConfig, explicit: Iterable[str] = ()) -> RunConfig:
    """Check source exclusivity and positivity; ``explicit`` lists keys the user set."""
    explicit = set(explicit)
    for path_key, group in SOURCE_GROUPS.items():
        clash = sorted(explicit & set(group))
        if getattr(cfg, path_key) is not None and clash:
            raise ConfigError(f"{path_key} is read from a file; drop generator keys {clash}")
    if cfg.operation is not None and cfg.operation not in OPERATIONS:
        raise ConfigError(f"operation must be one of {OPERATIONS}, got {cfg.operation!r}")
    if cfg.mode not in ("static", "varying"):
        raise ConfigError(f"mode must be static or varying, got {cfg.mode!r}")
    positive = ["epsilon", "alpha", "validate_tol", "max_steps", "sweep_replicates", "jobs", "n", "m"]
    if cfg.tol is not None:
        positive.append("tol")
    if cfg.steps is not None:
        positive.append("steps")
    for key in positive:
        if not getattr(cfg, key) > 0:
            raise ConfigError(f"{key} must be positive, got {getattr(cfg, key)!r}")
    if cfg.sigma < 0 or any(s < 0 for s in cfg.sweep_sigmas):
        raise ConfigError("noise scales must be nonnegative")
    if any(L < 1 for L in cfg.sweep_lengths):
        raise ConfigError("sweep lengths must be positive")
    return cfg


def _key_line(text: str, key: str) -> Optional[int]:
    pat = re.compile(rf"^\s*(\[+\s*)?[\"']?{re.escape(key)}[\"']?\s*(=|\])")
    for lineno, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return lineno
    return None


def read_config_with_keys(path: PathLike) -> tuple[RunConfig, set[str]]:
    text = Path(path).read_text()
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    values = {}
    for key, value in doc.items():
        if key not in _FIELDS:
            line = _key_line(text, key)
            where = f"{path}:{line}" if line else str(path)
            raise ConfigError(f"{where}: unknown key {key!r}")
        values[key] = coerce_value(key, value)
    cfg = RunConfig(**values)
    return validate_config(cfg, values), set(values)


def read_config(path: PathLike) -> RunConfig:
    return read_config_with_keys(path)[0]


def config_reference() -> str:
    """Markdown table of every run-config key with its type and default."""
    lines = ["| key | type | default | meaning |", "|---|---|---|---|"]
    for f in fields(RunConfig):
        default = f.default
        if isinstance(default, tuple):
            default = ",".join(str(v) for v in default)
        lines.append(f"| `{f.name}` | {_field_kind(f)} | `{default}` | {f.metadata['help']} |")
    return "\n".join(lines) + "\n"
