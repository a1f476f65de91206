import math

import numpy as np
import pytest

from clocklat.core import Direction, step_angle
from clocklat.lattice import (LatticeDomain, SpinField, apply_jump_datum,
                              boundary_layer, discrete_energy, fill_jump_datum)
from clocklat.solvers import (AnnealSchedule, CellProblemSpec, SearchSpaceError,
                              anneal_glauber, anneal_kawasaki,
                              bond_lower_bound_energy, cell_formula_estimate,
                              chain_dp, enumerate_min, enumerate_min_counts,
                              phase_counts)
from clocklat.rng import chain_stream


# ----------------------------------------------------------------------
# chain DP
# ----------------------------------------------------------------------


def test_chain_dp_examples():
    e, path = chain_dp(4, 0, 2, 3)
    assert e == pytest.approx(4.0, abs=1e-12)
    assert path[0] == 0 and path[-1] == 2 and len(path) == 4
    e1, _ = chain_dp(4, 0, 2, 1)
    assert e1 == pytest.approx(4.0, abs=1e-12)  # the k = 2 equality case
    e0, _ = chain_dp(6, 3, 3, 5)
    assert e0 == 0.0


def test_chain_dp_unit_steps_optimal():
    for N in range(2, 25):
        theta = step_angle(N)
        unit = 4 * math.sin(theta / 2) ** 2
        for k in range(0, N // 2 + 1):
            for M in range(max(k, 1), k + 5):
                e, path = chain_dp(N, 0, k, M)
                assert e == pytest.approx(k * unit, abs=1e-12)
                assert len(path) == M + 1


def test_chain_dp_short_path_lower_bounded():
    # fewer steps than the geodesic distance can only cost more
    for N in (6, 8, 12):
        theta = step_angle(N)
        unit = 4 * math.sin(theta / 2) ** 2
        for k in range(2, N // 2 + 1):
            for M in range(1, k):
                e, _ = chain_dp(N, 0, k, M)
                assert e >= k * unit - 1e-12


def test_chain_dp_validation():
    with pytest.raises(ValueError):
        chain_dp(4, 0, 1, 0)


# ----------------------------------------------------------------------
# exhaustive enumeration
# ----------------------------------------------------------------------


def _cell_field(eps, N, s, r, nu):
    dom = LatticeDomain.q_cube(eps, nu)
    layer = boundary_layer(dom, 2 * eps)
    datum = fill_jump_datum(dom, N, s, r, nu)
    return apply_jump_datum(datum, s, r, nu, layer)


def test_enumerate_min_no_free_sites():
    dom = LatticeDomain.grid(2, 0.25, [3, 3])
    f = SpinField.constant(dom, 2, 1)
    f.frozen[:] = True
    res = enumerate_min(f)
    assert res.energy == discrete_energy(f).scaled
    assert res.diagnostics["configs"] == 1


def test_enumerate_min_cell_problem():
    nu = Direction.axis(2, 1)
    f = _cell_field(1 / 8, 2, 1, 0, nu)
    res = enumerate_min(f)
    assert res.diagnostics["configs"] == 512
    assert abs(res.energy - 4 / math.pi) <= 0.25
    assert bond_lower_bound_energy(res.field) <= res.energy + 1e-12
    # frozen values untouched
    assert np.array_equal(res.field.values[f.frozen], f.values[f.frozen])


def test_enumerate_min_equal_datum_is_zero():
    nu = Direction.axis(2, 1)
    f = _cell_field(1 / 8, 2, 1, 1, nu)
    res = enumerate_min(f)
    assert res.energy == 0.0
    assert (res.field.values == 1).all()


def test_enumerate_refusal_with_report():
    dom = LatticeDomain.grid(2, 1 / 8, [8, 8])
    f = SpinField.constant(dom, 4, 0)
    with pytest.raises(SearchSpaceError) as err:
        enumerate_min(f)
    rep = err.value.report()
    assert rep["n_free"] == 64 and rep["N"] == 4
    assert rep["bits"] == pytest.approx(128.0)
    assert rep["cap"] == 26.0


def test_enumerate_min_counts_4x4():
    dom = LatticeDomain.grid(2, 0.25, [4, 4])
    rng = chain_stream(3, 0)
    vals = np.repeat([0, 1], 8)
    rng.shuffle(vals)
    f = SpinField(dom, 2, vals)
    res = enumerate_min_counts(f, [8, 8])
    assert res.diagnostics["configs"] == 12870
    assert res.energy == pytest.approx(4 / math.pi, abs=1e-12)
    assert list(phase_counts(res.field)) == [8, 8]


def test_enumerate_min_counts_validation():
    dom = LatticeDomain.grid(2, 0.25, [4, 4])
    f = SpinField.constant(dom, 2, 0)
    with pytest.raises(ValueError):
        enumerate_min_counts(f, [7, 8])  # does not sum to 16
    with pytest.raises(ValueError):
        enumerate_min_counts(f, [8, 8, 0])  # wrong number of phases


# ----------------------------------------------------------------------
# annealing
# ----------------------------------------------------------------------


def test_anneal_glauber_deterministic():
    f = _cell_field(1 / 8, 4, 2, 0, Direction.axis(2, 1))
    sched = AnnealSchedule(sweeps=40, chains=4, seed=123)
    a = anneal_glauber(f, sched)
    b = anneal_glauber(f, sched)
    assert a.energy == b.energy
    assert np.array_equal(a.field.values, b.field.values)


def test_anneal_glauber_keeps_constant_optimum():
    dom = LatticeDomain.grid(2, 0.25, [4, 4])
    f = SpinField.constant(dom, 4, 2)
    res = anneal_glauber(f, AnnealSchedule(sweeps=30, chains=2, seed=1))
    assert res.energy == 0.0


def test_anneal_glauber_never_moves_frozen():
    f = _cell_field(1 / 8, 2, 1, 0, Direction.axis(2, 1))
    res = anneal_glauber(f, AnnealSchedule(sweeps=60, chains=4, seed=9))
    assert np.array_equal(res.field.values[f.frozen], f.values[f.frozen])
    assert np.array_equal(res.field.frozen, f.frozen)


def test_anneal_glauber_not_worse_than_initial():
    dom = LatticeDomain.grid(2, 1 / 8, [6, 6])
    rng = chain_stream(77, 0)
    f = SpinField.random(dom, 5, rng)
    init = discrete_energy(f).scaled
    res = anneal_glauber(f, AnnealSchedule(sweeps=50, chains=2, seed=2))
    assert res.energy <= init + 1e-12


def test_anneal_matches_enumeration_n2():
    # with 32 chains and generous sweeps the annealer lands on the exact
    # minimum of the largest enumerable instance
    f = _cell_field(1 / 8, 2, 1, 0, Direction.axis(2, 1))
    exact = enumerate_min(f)
    sched = AnnealSchedule(sweeps=200, chains=32, seed=4)
    res = anneal_glauber(f, sched)
    assert res.energy >= exact.energy - 1e-12
    assert res.energy == pytest.approx(exact.energy, abs=1e-12)


def test_anneal_kawasaki_conserves_counts():
    dom = LatticeDomain.grid(2, 0.25, [4, 4])
    rng = chain_stream(8, 0)
    vals = np.repeat([0, 1], 8)
    rng.shuffle(vals)
    f = SpinField(dom, 2, vals)
    res = anneal_kawasaki(f, [8, 8],
                          AnnealSchedule(sweeps=80, chains=4, seed=5, debug=True))
    assert list(phase_counts(res.field)) == [8, 8]
    assert res.energy == pytest.approx(4 / math.pi, abs=1e-12)


def test_anneal_kawasaki_concentrated_counts():
    dom = LatticeDomain.grid(2, 0.25, [4, 4])
    f = SpinField.constant(dom, 3, 1)
    res = anneal_kawasaki(f, [0, 16, 0], AnnealSchedule(sweeps=20, chains=2, seed=6))
    assert res.energy == 0.0
    assert (res.field.values == 1).all()


def test_anneal_kawasaki_infeasible_counts():
    dom = LatticeDomain.grid(2, 0.25, [4, 4])
    f = SpinField.constant(dom, 2, 0)
    with pytest.raises(ValueError):
        anneal_kawasaki(f, [8, 8], AnnealSchedule())  # field violates counts
    with pytest.raises(ValueError):
        anneal_kawasaki(f, [10, 5], AnnealSchedule())  # wrong total


def test_anneal_kawasaki_deterministic():
    dom = LatticeDomain.grid(2, 0.25, [4, 4])
    rng = chain_stream(12, 0)
    vals = np.repeat([0, 1], 8)
    rng.shuffle(vals)
    f = SpinField(dom, 2, vals)
    sched = AnnealSchedule(sweeps=50, chains=3, seed=21)
    a = anneal_kawasaki(f, [8, 8], sched)
    b = anneal_kawasaki(f, [8, 8], sched)
    assert a.energy == b.energy
    assert np.array_equal(a.field.values, b.field.values)


def test_schedule_validation():
    with pytest.raises(ValueError):
        AnnealSchedule(t_initial=0.0)
    with pytest.raises(ValueError):
        AnnealSchedule(cooling=1.0)
    with pytest.raises(ValueError):
        AnnealSchedule(sweeps=0)


# ----------------------------------------------------------------------
# bounds
# ----------------------------------------------------------------------


def test_bond_lower_bound_constant():
    dom = LatticeDomain.grid(2, 0.25, [4, 4])
    assert bond_lower_bound_energy(SpinField.constant(dom, 4, 0)) == 0.0


def _single_bond_field(N, a, b):
    dom = LatticeDomain.grid(2, 0.5, [2, 1])
    f = SpinField(dom, N, np.array([a, b]))
    return f


def test_bond_lower_bound_unit_step_equality():
    for N in (2, 4, 8):
        f = _single_bond_field(N, 0, 1)
        assert bond_lower_bound_energy(f) == pytest.approx(
            discrete_energy(f).scaled, abs=1e-12)


def test_bond_lower_bound_antipodal():
    # N = 4 antipodal is the lemma equality case; N = 6 sits strictly below
    f4 = _single_bond_field(4, 0, 2)
    assert bond_lower_bound_energy(f4) == pytest.approx(
        discrete_energy(f4).scaled, abs=1e-12)
    f6 = _single_bond_field(6, 0, 3)
    assert bond_lower_bound_energy(f6) < discrete_energy(f6).scaled - 1e-6


# ----------------------------------------------------------------------
# cell problem
# ----------------------------------------------------------------------


def test_cell_spec_validation():
    nu = Direction.axis(2, 1)
    with pytest.raises(ValueError):
        CellProblemSpec(1, 0, nu, 0.3, 2)
    with pytest.raises(ValueError):
        CellProblemSpec(1, 0, nu, 1 / 8, 1)
    with pytest.raises(ValueError):
        CellProblemSpec(1, 0, nu, 1 / 8, 2, method="magic")


def test_cell_formula_equal_states_zero():
    res = cell_formula_estimate(
        CellProblemSpec(2, 2, Direction.axis(2, 1), 1 / 8, 4, method="enumerate"))
    assert res.energy == 0.0
    assert res.diagnostics["bounds"]["analytic"] == 0.0


def test_cell_formula_analytic_targets():
    res = cell_formula_estimate(
        CellProblemSpec(1, 0, Direction.axis(2, 1), 1 / 8, 4, method="dp"))
    assert res.diagnostics["bounds"]["analytic"] == pytest.approx(
        4 / math.pi, abs=1e-12)
    res2 = cell_formula_estimate(
        CellProblemSpec(1, 0, Direction.from_ints(1, 1), 1 / 16, 4,
                        method="anneal"),
        schedule=AnnealSchedule(sweeps=30, chains=2, seed=3))
    assert res2.diagnostics["bounds"]["analytic"] == pytest.approx(
        4 * math.sqrt(2) / math.pi, abs=1e-12)


def test_cell_formula_sandwich_enumerate():
    res = cell_formula_estimate(
        CellProblemSpec(1, 0, Direction.axis(2, 1), 1 / 8, 2, method="enumerate"))
    b = res.diagnostics["bounds"]
    assert b["lower"] <= res.energy + 1e-12
    assert res.energy <= b["upper"] + 1e-12
    assert abs(res.energy - 4 / math.pi) <= 0.25


def test_cell_formula_dp_between_exact_and_staircase():
    spec_dp = CellProblemSpec(2, 0, Direction.axis(2, 1), 1 / 8, 4, method="dp")
    dp_res = cell_formula_estimate(spec_dp)
    exact = cell_formula_estimate(
        CellProblemSpec(2, 0, Direction.axis(2, 1), 1 / 8, 4, method="enumerate"))
    assert exact.energy <= dp_res.energy + 1e-12
    assert dp_res.energy <= dp_res.diagnostics["bounds"]["upper"] + 1e-12
    assert dp_res.diagnostics["note"] == "upper (layered)"


def test_cell_formula_dp_requires_axis():
    with pytest.raises(ValueError):
        cell_formula_estimate(
            CellProblemSpec(1, 0, Direction.from_ints(1, 1), 1 / 8, 4, method="dp"))
