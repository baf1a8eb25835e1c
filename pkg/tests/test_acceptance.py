"""Exit criteria: each test prints one PASS/FAIL line with the measured margin.

Run ``pytest tests/test_acceptance.py -v`` to see the lines (they bypass
output capture).
"""

import time

import numpy as np
import pytest

from degroot_resist import (
    GeneratorSpec,
    InfluenceMatrix,
    OpinionState,
    ResistanceProfile,
    Status,
    Trajectory,
    check_structure,
    compose_weights,
    consensus_value,
    estimate_ego,
    estimate_single,
    estimate_static,
    gen_network,
    gen_opinions,
    gen_resistance,
    hull_check,
    rescale,
    simulate,
    step,
    step_factored,
)
from degroot_resist.io import RunConfig
from degroot_resist.pipeline import run_sweep
from degroot_resist.synth import KINDS, NETWORK, OPINIONS, RESISTANCE, derive_seed, make_rng

RUN_SEED = 20240601


@pytest.fixture
def report(capsys):
    def emit(number: int, name: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} -- {detail}")
        assert ok, detail

    return emit


def system(index: int, n: int = 50, density: float = 0.1, m: int = 1, kind: str = "random-sparse"):
    s = derive_seed(RUN_SEED, index)
    c = gen_network(GeneratorSpec(kind, n, derive_seed(s, NETWORK), density, "dirichlet"))
    d = gen_resistance(n, 0.05, 0.95, derive_seed(s, RESISTANCE))
    x0 = gen_opinions(n, m, "uniform", 0.0, 1.0, derive_seed(s, OPINIONS))
    return c, d, x0


@pytest.fixture(scope="module")
def round_trip_systems():
    out = []
    for r in range(100):
        c, d, x0 = system(r)
        out.append((c, d, simulate(c, d, x0, steps=10)))
    return out


def test_1_round_trip_identifiability(round_trip_systems, report):
    start = time.perf_counter()
    worst, not_ok = 0.0, 0
    for c, d, tr in round_trip_systems:
        rep = estimate_static(c, tr)
        not_ok += sum(e.status is not Status.OK for e in rep)
        worst = max(worst, float(np.max(np.abs(rep.values - d.d))))
    elapsed = time.perf_counter() - start
    ok = not_ok == 0 and worst < 1e-9 and elapsed < 10
    report(1, "round-trip identifiability", ok,
           f"100 systems n=50, non-Ok={not_ok}, max |err|={worst:.2e} (<1e-9), {elapsed:.2f}s (<10s)")


def test_2_scale_freeness(round_trip_systems, report):
    start = time.perf_counter()
    worst, mismatches = 0.0, 0
    for c, _, tr in round_trip_systems:
        base = estimate_static(c, tr)
        for alpha in (0.1, 3.0, 1000.0):
            for beta in (-5.0, 0.0, 7.0):
                moved = estimate_static(c, rescale(tr, alpha, beta))
                mismatches += sum(
                    a.status is not b.status or a.samples_used != b.samples_used for a, b in zip(base, moved)
                )
                worst = max(worst, float(np.nanmax(np.abs(moved.values - base.values))))
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and worst < 1e-10 and elapsed < 30
    report(2, "scale-freeness", ok,
           f"900 rescalings, status mismatches={mismatches}, max |diff|={worst:.2e} (<1e-10), {elapsed:.2f}s (<30s)")


def test_3_convex_hull_containment(report):
    start = time.perf_counter()
    rng = make_rng(derive_seed(RUN_SEED, 3))
    violations = 0
    for r in range(1000):
        n = int(rng.integers(2, 31))
        kind = KINDS[int(rng.integers(len(KINDS)))]
        density = min(1.0, 3.0 / n + 0.1)
        c, d, x0 = system(1000 + r, n=n, density=density, m=int(rng.integers(1, 4)), kind=kind)
        violations += len(hull_check(simulate(c, d, x0, steps=50), tolerance=1e-10).violations)
    elapsed = time.perf_counter() - start
    ok = violations == 0 and elapsed < 30
    report(3, "convex-hull containment", ok, f"1000 trajectories, violations={violations}, {elapsed:.2f}s (<30s)")


def test_4_consensus_preservation(report):
    worst = 0.0
    for r in range(100):
        c, d, _ = system(2000 + r, n=30, density=0.15)
        level = float(make_rng(r).uniform(-100, 100))
        tr = simulate(c, d, OpinionState(np.full((30, 2), level)), steps=100)
        worst = max(worst, float(np.max(np.abs(tr.states - level))))
    report(4, "consensus preservation", worst <= 1e-12, f"100 systems x 100 steps, max drift={worst:.2e} (<=1e-12)")


def test_5_convergence_to_perron_consensus(report):
    worst = 0.0
    for r in range(100):
        c, d, x0 = system(3000 + r, n=30, density=0.15, m=2)
        assert check_structure(c).irreducible
        cv = consensus_value(compose_weights(c, d), x0)
        tr = simulate(c, d, x0, tol=1e-14)
        worst = max(worst, float(np.max(np.abs(tr.final.values - cv))))

    c3 = InfluenceMatrix([[0, 0.5, 0.5], [1, 0, 0], [0.25, 0.75, 0]])
    w3 = compose_weights(c3, ResistanceProfile([0.2, 0.5, 0.8]))
    # left-eigenvector oracle: v (W - I) = 0, sum v = 1
    a = np.vstack([(w3.dense() - np.eye(3)).T, np.ones(3)])
    v = np.linalg.lstsq(a, np.array([0, 0, 0, 1.0]), rcond=None)[0]
    x = OpinionState([0, 1, 2])
    oracle = float(v @ x.values[:, 0])
    got = float(consensus_value(w3, x)[0])
    err = abs(got - 27 / 22)
    ok = worst < 1e-8 and err < 1e-9 and abs(oracle - 27 / 22) < 1e-12
    report(5, "convergence to Perron consensus", ok,
           f"100 systems max |limit - v'x0|={worst:.2e} (<1e-8); worked example {got:.10f} vs 27/22 err={err:.1e}")


def test_6_degeneracy_soundness(report):
    eps = 1e-9
    ok_count = 0
    # consensus trajectories
    for r in range(100):
        c, d, _ = system(4000 + r, n=20, density=0.2)
        tr = simulate(c, d, OpinionState(np.full(20, float(r) - 50)), steps=5)
        ok_count += estimate_static(c, tr, eps).count(Status.OK)
    # adversarial single steps: |s - x_i| <= eps with local spread >= 1
    rng = make_rng(derive_seed(RUN_SEED, 6))
    probes = 0
    for r in range(1000):
        k = int(rng.integers(1, 8))
        n = k + 1
        row = np.zeros(n)
        row[1:] = rng.uniform(0.1, 1.0, k)
        row /= row.sum()
        nbr = rng.uniform(-10, 10, k)
        nbr[0], nbr[-1] = nbr.min() - 1.0, nbr.max() + 1.0
        s = float(row[1:] @ nbr)
        delta = float(rng.uniform(-0.99, 0.99)) * eps if r % 2 else 0.0
        x = OpinionState(np.concatenate([[s - delta], nbr]))
        e = estimate_single(row, x, float(rng.normal()), 0, eps)
        ok_count += e.status is Status.OK
        # the same node observed over several degenerate steps
        states = np.repeat(x.values[None], 4, axis=0)
        states[1:, 0, 0] += rng.normal(size=3)
        states[1:, 1:, 0] = states[1:, 0:1, 0] + (nbr - s)[None]
        full = np.zeros((n, n))
        full[0] = row
        full[1:, 0] = 1.0
        rep = estimate_static(InfluenceMatrix(full), Trajectory(states), eps)
        ok_count += rep.estimates[0].status is Status.OK
        probes += 2
    report(6, "degeneracy soundness", ok_count == 0,
           f"100 consensus trajectories + {probes} adversarial probes, Ok emitted={ok_count}")


def test_7_ego_equivalence(report):
    rng = make_rng(derive_seed(RUN_SEED, 7))
    status_mismatch, worst = 0, 0.0
    for r in range(1000):
        n = int(rng.integers(2, 40))
        c, d, x0 = system(5000 + r, n=n, density=min(1.0, 0.1 + 3.0 / n), m=int(rng.integers(1, 3)))
        tr = simulate(c, d, x0, steps=5)
        i, t = int(rng.integers(n)), int(rng.integers(5))
        row = c.row(i)
        idx, _ = c.neighbors(i)
        full = estimate_single(row, tr[t], tr.states[t + 1, i], i)
        ego = estimate_ego(row, (tr.states[t, i], tr.states[t + 1, i]), {int(j): tr.states[t, j] for j in idx}, i)
        status_mismatch += ego.status is not full.status
        if full.raw is not None:
            worst = max(worst, abs(ego.raw - full.raw))
    ok = status_mismatch == 0 and worst <= 1e-12
    report(7, "ego equivalence", ok, f"1000 probes, status mismatches={status_mismatch}, max |diff|={worst:.1e}")


def test_8_noise_trend(report):
    start = time.perf_counter()
    cfg = RunConfig(sweep_sigmas=(0.001, 0.01), sweep_lengths=(2, 5, 10, 25), sweep_replicates=100, jobs=4)
    rows = run_sweep(cfg)
    elapsed = time.perf_counter() - start
    ok = elapsed < 120
    parts = []
    for sigma in cfg.sweep_sigmas:
        med = [r["median_abs_error"] for r in rows if r["sigma"] == sigma]
        ok &= all(b <= a for a, b in zip(med, med[1:]))
        parts.append(f"sigma={sigma}: " + " >= ".join(f"{v:.5f}" for v in med))
    report(8, "noise trend", ok, "; ".join(parts) + f"; {elapsed:.1f}s (<120s)")


def test_9_factored_coupled_equivalence(report):
    rng = make_rng(derive_seed(RUN_SEED, 9))
    worst = 0.0
    for _ in range(10_000):
        n = int(rng.integers(2, 101))
        m = int(rng.integers(1, 6))
        mask = rng.random((n, n)) < rng.uniform(0.05, 1.0)
        np.fill_diagonal(mask, False)
        mask[np.arange(n), (np.arange(n) + 1) % n] = True
        w = np.where(mask, rng.uniform(0.01, 1.0, (n, n)), 0.0)
        c = InfluenceMatrix(w / w.sum(axis=1, keepdims=True))
        d = gen_resistance(n, 0.01, 0.99, int(rng.integers(2**63)))
        x = OpinionState(rng.normal(0, 10, (n, m)))
        diff = np.abs(step_factored(c, d, x).values - step(compose_weights(c, d), x).values)
        worst = max(worst, float(diff.max()))
    report(9, "factored/coupled equivalence", worst <= 1e-12, f"10^4 random steps, max |diff|={worst:.2e} (<=1e-12)")
