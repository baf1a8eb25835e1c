"""Stage functions shared by the CLI and the experiment scripts."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import io
from .core import InfluenceMatrix, OpinionState, ResistanceProfile, simulate
from .estimator import Status, estimate_static
from .synth import (
    NETWORK,
    NOISE,
    OPINIONS,
    RESISTANCE,
    GeneratorSpec,
    derive_seed,
    gen_network,
    gen_opinions,
    gen_resistance,
    perturb,
)


def generator_spec(cfg: io.RunConfig, run_seed: int | None = None) -> GeneratorSpec:
    seed = cfg.seed if run_seed is None else run_seed
    return GeneratorSpec(cfg.kind, cfg.n, derive_seed(seed, NETWORK), cfg.density, cfg.weights)


def build_network(cfg: io.RunConfig, run_seed: int | None = None) -> InfluenceMatrix:
    if cfg.network is not None:
        return io.read_network(cfg.network)
    return gen_network(generator_spec(cfg, run_seed))


def build_resistance(cfg: io.RunConfig, n: int, run_seed: int | None = None) -> ResistanceProfile:
    if cfg.resistance is not None:
        return io.read_resistance(cfg.resistance)
    seed = cfg.seed if run_seed is None else run_seed
    return gen_resistance(n, cfg.resistance_low, cfg.resistance_high, derive_seed(seed, RESISTANCE))


def build_opinions(cfg: io.RunConfig, n: int, run_seed: int | None = None) -> OpinionState:
    if cfg.opinions is not None:
        return io.read_opinions(cfg.opinions)
    seed = cfg.seed if run_seed is None else run_seed
    return gen_opinions(n, cfg.m, cfg.distribution, cfg.dist_a, cfg.dist_b, derive_seed(seed, OPINIONS))


@dataclass(frozen=True)
class SweepCell:
    sigma: float
    length: int


def _sweep_cell(cfg: io.RunConfig, cell: SweepCell) -> dict:
    # replicate r sees the same system and the same standard-normal noise in
    # every cell, so cells differ only in sigma and length
    errors = []
    counts = {s: 0 for s in Status}
    for r in range(cfg.sweep_replicates):
        rs = derive_seed(cfg.seed, r)
        c = gen_network(generator_spec(cfg, rs))
        d = gen_resistance(c.n, cfg.resistance_low, cfg.resistance_high, derive_seed(rs, RESISTANCE))
        x0 = gen_opinions(c.n, cfg.m, cfg.distribution, cfg.dist_a, cfg.dist_b, derive_seed(rs, OPINIONS))
        tr = simulate(c, d, x0, steps=cell.length)
        report = estimate_static(c, perturb(tr, cell.sigma, derive_seed(rs, NOISE)), cfg.epsilon)
        for e in report.estimates:
            counts[e.status] += 1
            if e.raw is not None:
                errors.append(abs(e.raw - d.d[e.node]))
    row = {
        "sigma": cell.sigma,
        "length": cell.length,
        "replicates": cfg.sweep_replicates,
        "n": cfg.n,
        "estimates": len(errors),
        "median_abs_error": float(np.median(errors)) if errors else float("nan"),
        "mean_abs_error": float(np.mean(errors)) if errors else float("nan"),
    }
    row.update({f"n_{s.value}": counts[s] for s in Status})
    return row


def _run_cell(args) -> dict:
    return _sweep_cell(*args)


SWEEP_COLUMNS = ["sigma", "length", "replicates", "n", "estimates", "median_abs_error", "mean_abs_error"] + [
    f"n_{s.value}" for s in Status
]


def run_sweep(cfg: io.RunConfig) -> list[dict]:
    """Noise x length grid; one row per cell, sorted by (sigma, length)."""
    cells = [SweepCell(s, L) for s in cfg.sweep_sigmas for L in cfg.sweep_lengths]
    work = [(cfg, cell) for cell in cells]
    if cfg.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_run_cell, work))
    else:
        rows = [_run_cell(w) for w in work]
    return sorted(rows, key=lambda r: (r["sigma"], r["length"]))
