"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; tolerances are pinned here and nowhere else.
"""

import math
import time

import numpy as np
import pytest

from clocklat.constructions import (StaircaseSpec, discretize_field,
                                    interior_interface_area, staircase_recovery,
                                    transition_slab)
from clocklat.continuum import (GridPartitionField, jump_energy_direct,
                                jump_energy_sliced)
from clocklat.core import Direction, prefactor, sin_lemma_gap, step_angle
from clocklat.experiments import fit_rate, run_oblique_raster
from clocklat.lattice import LatticeDomain, SpinField, discrete_energy
from clocklat.rng import chain_stream
from clocklat.solvers import (AnnealSchedule, CellProblemSpec, anneal_kawasaki,
                              cell_formula_estimate, chain_dp,
                              enumerate_min_counts)


def _report(num, ok, detail):
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} failed: {detail}"


def test_criterion_1_lemma_sweep():
    t0 = time.perf_counter()
    min_gap = np.inf
    for k in range(1, 65):
        theta = np.linspace(0.0, math.pi / k, 10_000)
        min_gap = min(min_gap, float(sin_lemma_gap(k, theta).min()))
    equality = abs(sin_lemma_gap(2, math.pi / 2))
    elapsed = time.perf_counter() - t0
    ok = min_gap >= -1e-12 and equality <= 1e-12 and elapsed < 1.0
    _report(1, ok, f"min gap {min_gap:.2e}, equality at (2, pi/2) "
                   f"{equality:.2e}, {elapsed:.2f}s")


def test_criterion_2_chain_dp_vs_lemma():
    t0 = time.perf_counter()
    worst = 0.0
    for N in range(2, 25):
        unit = 4 * math.sin(math.pi / N) ** 2
        for k in range(0, N // 2 + 1):
            for M in range(max(k, 1), k + 5):
                e, _ = chain_dp(N, 0, k, M)
                worst = max(worst, abs(e - k * unit))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    _report(2, ok, f"worst deviation {worst:.2e}, {elapsed:.2f}s")


def test_criterion_3_staircase_exactness():
    t0 = time.perf_counter()
    eps = 1 / 8
    worst = 0.0
    cases = 0
    for d in (2, 3):
        for N in (2, 4, 6, 8):
            for k_s in range(1, N // 2 + 1):
                for m in (4, 8):
                    dom = transition_slab(d, eps, m, k_s)
                    spec = StaircaseSpec(k_s, 0, Direction.axis(d, d - 1),
                                         eps, N, dom)
                    got = discrete_energy(staircase_recovery(spec)).scaled
                    want = (prefactor(N) * k_s * step_angle(N)
                            * (m * eps) ** (d - 1))
                    worst = max(worst, abs(got - want))
                    cases += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    _report(3, ok, f"{cases} cases, worst deviation {worst:.2e}, {elapsed:.2f}s")


def test_criterion_4_cell_formula_sandwich():
    t0 = time.perf_counter()
    nu = Direction.axis(2, 1)
    target = 4 / math.pi

    exact = cell_formula_estimate(
        CellProblemSpec(1, 0, nu, 1 / 8, 2, method="enumerate"))
    b = exact.diagnostics["bounds"]
    ok_exact = (exact.diagnostics["configs"] == 512
                and b["lower"] <= exact.energy + 1e-12
                and exact.energy <= b["upper"] + 1e-12
                and abs(exact.energy - target) <= 0.25)

    gaps = []
    for eps, sweeps in ((1 / 16, 120), (1 / 32, 200)):
        sched = AnnealSchedule(t_initial=2.0, t_final=0.01, cooling=0.95,
                               sweeps=sweeps, chains=32, seed=7)
        res = cell_formula_estimate(
            CellProblemSpec(1, 0, nu, eps, 2, method="anneal"), schedule=sched)
        gaps.append(abs(res.energy - target))
    elapsed = time.perf_counter() - t0
    ok = (ok_exact and gaps[1] < gaps[0] and gaps[1] <= 0.05 and elapsed < 30.0)
    _report(4, ok, f"exhaustive gap {abs(exact.energy - target):.3f}, annealed "
                   f"gaps {gaps[0]:.4f} -> {gaps[1]:.4f}, {elapsed:.1f}s")


def test_criterion_5_slicing_agreement():
    t0 = time.perf_counter()
    rng = chain_stream(505, 0)
    worst = 0.0
    for _ in range(100):
        f = GridPartitionField(1 / 16, rng.integers(0, 8, size=(16, 16)),
                               mode="SN", N=8)
        worst = max(worst, abs(jump_energy_direct(f) - jump_energy_sliced(f)))
    for _ in range(20):
        f = GridPartitionField(1 / 8, rng.integers(0, 5, size=(8, 8, 8)),
                               mode="SN", N=5)
        worst = max(worst, abs(jump_energy_direct(f) - jump_energy_sliced(f)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 5.0
    _report(5, ok, f"worst direct/sliced split {worst:.2e}, {elapsed:.2f}s")


def test_criterion_6_prefactor_limit():
    t0 = time.perf_counter()
    vals = np.array([prefactor(N) for N in range(2, 10_001)])
    increasing = bool(np.all(np.diff(vals) > 0))
    tail = 1 - prefactor(1000)
    ladder = [(float(N), 1 - prefactor(N)) for N in (2 ** p for p in range(3, 14))]
    exponent, _, _, fitted = fit_rate(ladder)
    elapsed = time.perf_counter() - t0
    ok = (increasing and tail <= 1e-5 and fitted
          and abs(exponent + 2.0) <= 0.1 and elapsed < 1.0)
    _report(6, ok, f"strictly increasing {increasing}, 1 - value(1000) = "
                   f"{tail:.2e}, rate {exponent:.3f}, {elapsed:.2f}s")


def test_criterion_7_volume_constraint():
    t0 = time.perf_counter()
    target = 4 / math.pi

    dom4 = LatticeDomain.grid(2, 0.25, [4, 4])
    rng = chain_stream(707, 0)
    vals = np.repeat([0, 1], 8)
    rng.shuffle(vals)
    exact = enumerate_min_counts(SpinField(dom4, 2, vals), [8, 8])
    ok_exact = abs(exact.energy - target) <= 1e-12

    dom16 = LatticeDomain.grid(2, 1 / 16, [16, 16])
    rng16 = chain_stream(708, 0)
    vals16 = np.repeat([0, 1], 128)
    rng16.shuffle(vals16)
    sched = AnnealSchedule(t_initial=5.0, t_final=0.005, cooling=0.975,
                           sweeps=400, chains=32, seed=0)
    kw = anneal_kawasaki(SpinField(dom16, 2, vals16), [128, 128], sched)
    elapsed = time.perf_counter() - t0
    ok = ok_exact and kw.energy <= 1.02 * target and elapsed < 60.0
    _report(7, ok, f"4x4 exhaustive {exact.energy:.6f}, 16x16 kawasaki "
                   f"{kw.energy:.6f} vs cap {1.02 * target:.6f}, {elapsed:.1f}s")


def test_criterion_8_discretization_slack():
    t0 = time.perf_counter()
    rng = chain_stream(808, 0)
    violations = 0
    for i in range(200):
        N = int(rng.integers(3, 65))
        f = GridPartitionField(1 / 8, rng.random((8, 8)) * 2 * math.pi)
        g = discretize_field(f, N)
        slack = 2 * step_angle(N) * interior_interface_area(f)
        if jump_energy_direct(g) > jump_energy_direct(f) + slack + 1e-12:
            violations += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 10.0
    _report(8, ok, f"200 partitions, {violations} violations, {elapsed:.1f}s")


def test_criterion_9_oblique_anisotropy():
    t0 = time.perf_counter()
    table = run_oblique_raster(Direction.from_ints(1, 1), 0.0, math.pi,
                               [1 / 16, 1 / 32, 1 / 64])
    analytic = math.pi * math.sqrt(2)
    finest = table.rows[0]  # rows sorted by lam ascending
    rel = abs(finest.gap) / analytic
    elapsed = time.perf_counter() - t0
    ok = (finest.parameter == 1 / 64 and rel <= 0.02
          and all(abs(r.analytic - analytic) < 1e-12 for r in table.rows)
          and elapsed < 5.0)
    _report(9, ok, f"relative gap at 1/64 is {rel:.4%}, {elapsed:.2f}s")
