"""Minimization engines for the lattice energy.

Four routes with different guarantees:

* ``chain_dp``: exact ground state of a one-dimensional state chain by
  dynamic programming, the optimality oracle for the per-bond bound.
* ``enumerate_min`` / ``enumerate_min_counts``: exact minima of small
  instances by exhaustive (optionally count-constrained) search.
* ``anneal_glauber`` / ``anneal_kawasaki``: Metropolis annealing with
  free-spin moves, or count-preserving swap moves for volume-constrained
  problems.  Chains use independent counter-based streams and a fixed
  number of draws per move, so results depend only on the seed.
* ``cell_formula_estimate``: the interface-density cell problem on the
  unit cube with a frozen 2*eps jump datum, solved by one of the routes
  above and reported together with its lower bound, the staircase upper
  bound and the analytic target.

Annealing acceptance works with the dimensionless bond energy (the raw
energy with the eps^d factor stripped), so temperatures are comparable
across lattice spacings.
"""

import math
from dataclasses import dataclass, field as dc_field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import (Direction, geodesic_distance_SN, prefactor, step_angle,
                   _check_N)
from .lattice import (LatticeDomain, SpinField, apply_jump_datum, boundary_layer,
                      bond_step_counts, discrete_energy, enumerate_bonds,
                      fill_jump_datum)
from .constructions import StaircaseSpec, staircase_recovery
from .rng import chain_stream


class SearchSpaceError(RuntimeError):
    """Raised when an exhaustive search would exceed the size cap."""

    def __init__(self, n_free, N, bits, cap):
        self.n_free = int(n_free)
        self.N = int(N)
        self.bits = float(bits)
        self.cap = float(cap)
        super().__init__(
            f"search space of {n_free} free sites with {N} states needs "
            f"{bits:.1f} bits, above the {cap:.0f}-bit cap")

    def report(self):
        return {"n_free": self.n_free, "N": self.N,
                "bits": self.bits, "cap": self.cap}


@dataclass
class AnnealSchedule:
    """Geometric cooling schedule for Metropolis annealing."""

    t_initial: float = 2.0
    t_final: float = 0.01
    cooling: float = 0.95
    sweeps: int = 64
    chains: int = 8
    seed: int = 0
    moves_per_sweep: Optional[int] = None  # default: one per free site
    debug: bool = False

    def __post_init__(self):
        if self.t_initial <= 0 or self.t_final <= 0:
            raise ValueError("temperatures must be positive")
        if not (0.0 < self.cooling < 1.0):
            raise ValueError("cooling ratio must lie in (0, 1)")
        if self.sweeps < 1 or self.chains < 1:
            raise ValueError("sweeps and chains must be >= 1")


@dataclass
class SolverResult:
    """Best energy found, the corresponding field and run diagnostics."""

    method: str
    energy: float          # scaled units
    field: SpinField
    diagnostics: dict = dc_field(default_factory=dict)

    def summary(self, field_file: Optional[str] = None):
        out = {"method": self.method, "energy": self.energy}
        out.update(self.diagnostics)
        if field_file is not None:
            out["field_file"] = field_file
        return out


def _pair_table(N: int) -> List[List[float]]:
    """(N x N) table of |u_a - u_b|^2 as plain lists for the hot loops."""
    theta = step_angle(N)
    row = [4.0 * math.sin(0.5 * min(k, N - k) * theta) ** 2 for k in range(N)]
    return [[row[(a - b) % N] for b in range(N)] for a in range(N)]


def _dimensionless_energy(values: np.ndarray, bonds: np.ndarray, N: int) -> float:
    dk = np.abs(values[bonds[:, 0]] - values[bonds[:, 1]])
    k = np.minimum(dk, N - dk)
    theta = step_angle(N)
    return float((4.0 * np.sin(0.5 * k * theta) ** 2).sum())


def _scaled_from_dimensionless(e: float, domain: LatticeDomain, N: int) -> float:
    return e * domain.eps ** (domain.d - 1) / step_angle(N)


# ----------------------------------------------------------------------
# exact solvers
# ----------------------------------------------------------------------


def chain_dp(N: int, k_start: int, k_end: int, M: int):
    """Exact minimum of sum_m |u_{m-1} - u_m|^2 over state paths of M steps.

    Returns (energy, path) where path lists the M+1 states of one optimal
    route from k_start to k_end.  Whenever M is at least the geodesic step
    count k, the minimum is k * 4 sin^2(theta/2), attained by unit steps.
    """
    N = _check_N(N)
    if M < 1:
        raise ValueError("step count M must be >= 1")
    k_start, k_end = int(k_start) % N, int(k_end) % N
    theta = step_angle(N)
    k = np.minimum(np.arange(N), N - np.arange(N))
    steps = 4.0 * np.sin(0.5 * k * theta) ** 2
    cost = steps[(np.arange(N)[:, None] - np.arange(N)[None, :]) % N]
    dp = np.full(N, np.inf)
    dp[k_start] = 0.0
    parents = []
    for _ in range(M):
        total = dp[:, None] + cost
        arg = np.argmin(total, axis=0)
        parents.append(arg)
        dp = total[arg, np.arange(N)]
    path = [k_end]
    for arg in reversed(parents):
        path.append(int(arg[path[-1]]))
    path.reverse()
    return float(dp[k_end]), path


def _free_site_structure(field: SpinField):
    free = np.flatnonzero(~field.frozen)
    bonds = field.domain.bonds()
    return free, bonds


def _batched_minimum(field, free, configs_iter, bonds):
    """Scan batches of free-site assignments for the minimum dimensionless energy.

    ``configs_iter`` yields (batch_size, n_free) integer arrays.
    """
    N = field.N
    values = field.values
    free_pos = {int(s): j for j, s in enumerate(free)}
    ff, fb, const_e = [], [], 0.0
    theta = step_angle(N)
    table = 4.0 * np.sin(0.5 * np.minimum(np.arange(N), N - np.arange(N)) * theta) ** 2
    for a, b in bonds.tolist():
        fa, fb_ = free_pos.get(a), free_pos.get(b)
        if fa is not None and fb_ is not None:
            ff.append((fa, fb_))
        elif fa is not None:
            fb.append((fa, int(values[b])))
        elif fb_ is not None:
            fb.append((fb_, int(values[a])))
        else:
            const_e += float(table[min(abs(values[a] - values[b]),
                                       N - abs(values[a] - values[b]))])
    ff = np.asarray(ff, dtype=np.int64).reshape(-1, 2)
    best_e = np.inf
    best_cfg = None
    for configs in configs_iter:
        e = np.full(configs.shape[0], const_e)
        for j, v in fb:
            dk = np.abs(configs[:, j] - v)
            e += table[np.minimum(dk, N - dk)]
        for ja, jb in ff.tolist():
            dk = np.abs(configs[:, ja] - configs[:, jb])
            e += table[np.minimum(dk, N - dk)]
        i = int(np.argmin(e))
        if e[i] < best_e:
            best_e = float(e[i])
            best_cfg = configs[i].copy()
    return best_e, best_cfg


def enumerate_min(field: SpinField, bits_cap: float = 26.0,
                  batch: int = 1 << 14) -> SolverResult:
    """Exact minimum over all assignments of the free sites.

    Refuses when n_free * log2(N) exceeds ``bits_cap``.
    """
    free, bonds = _free_site_structure(field)
    N = field.N
    n_free = free.size
    bits = n_free * math.log2(N)
    if bits > bits_cap:
        raise SearchSpaceError(n_free, N, bits, bits_cap)
    if n_free == 0:
        rep = discrete_energy(field)
        return SolverResult("enumerate", rep.scaled, field.copy(),
                            {"n_free": 0, "configs": 1})
    total = N ** n_free
    powers = N ** np.arange(n_free, dtype=np.int64)

    def batches():
        for start in range(0, total, batch):
            idx = np.arange(start, min(start + batch, total), dtype=np.int64)
            yield (idx[:, None] // powers[None, :]) % N

    best_e, best_cfg = _batched_minimum(field, free, batches(), bonds)
    out = field.copy()
    out.values[free] = best_cfg
    scaled = discrete_energy(out).scaled
    return SolverResult("enumerate", scaled, out,
                        {"n_free": int(n_free), "configs": int(total)})


def _count_batches(n_slots: int, counts: Sequence[int], batch: int):
    """Yield batches of phase assignments with exact per-phase counts."""
    import itertools

    counts = [int(c) for c in counts]
    phases = [p for p, c in enumerate(counts) if c > 0]

    def assignments(slots, remaining, partial):
        if len(remaining) == 1:
            p = remaining[0][0]
            full = dict(partial)
            for s in slots:
                full[s] = p
            yield full
            return
        p, c = remaining[0]
        for chosen in itertools.combinations(slots, c):
            nxt = dict(partial)
            for s in chosen:
                nxt[s] = p
            rest = [s for s in slots if s not in set(chosen)]
            yield from assignments(rest, remaining[1:], nxt)

    remaining = [(p, counts[p]) for p in phases]
    buf = []
    for assign in assignments(tuple(range(n_slots)), remaining, {}):
        buf.append([assign[j] for j in range(n_slots)])
        if len(buf) == batch:
            yield np.asarray(buf, dtype=np.int64)
            buf = []
    if buf:
        yield np.asarray(buf, dtype=np.int64)


def _multinomial(n: int, counts: Sequence[int]) -> int:
    out = 1
    rest = n
    for c in counts:
        out *= math.comb(rest, c)
        rest -= c
    return out


def enumerate_min_counts(field: SpinField, counts: Sequence[int],
                         bits_cap: float = 26.0, batch: int = 1 << 12) -> SolverResult:
    """Exact minimum over assignments with exact per-phase site counts.

    ``counts`` gives the target number of sites per phase over the whole
    domain; frozen sites consume their share first.
    """
    free, bonds = _free_site_structure(field)
    N = field.N
    counts = [int(c) for c in counts]
    if len(counts) != N or sum(counts) != field.domain.n_sites:
        raise ValueError("counts must give one integer per phase summing to #sites")
    remaining = list(counts)
    for v in field.values[field.frozen]:
        remaining[int(v)] -= 1
        if remaining[int(v)] < 0:
            raise ValueError("frozen sites already exceed a phase count")
    if sum(remaining) != free.size:
        raise ValueError("counts incompatible with the free-site total")
    if free.size == 0:
        return SolverResult("enumerate_counts", discrete_energy(field).scaled,
                            field.copy(), {"n_free": 0, "configs": 1})
    total = _multinomial(free.size, remaining)
    bits = math.log2(total) if total > 0 else 0.0
    if bits > bits_cap:
        raise SearchSpaceError(free.size, N, bits, bits_cap)
    best_e, best_cfg = _batched_minimum(
        field, free, _count_batches(free.size, remaining, batch), bonds)
    out = field.copy()
    out.values[free] = best_cfg
    scaled = discrete_energy(out).scaled
    return SolverResult("enumerate_counts", scaled, out,
                        {"n_free": int(free.size), "configs": int(total)})


# ----------------------------------------------------------------------
# annealing
# ----------------------------------------------------------------------


def anneal_glauber(field: SpinField, schedule: AnnealSchedule) -> SolverResult:
    """Metropolis annealing with single-site moves on the free sites.

    Proposals mix local steps (current phase +-1) with uniform redraws,
    one third each, which escapes layered plateaus while keeping local
    refinement cheap.  The best configuration seen across all chains is
    returned; it is never worse than the initial field.
    """
    dom = field.domain
    N = field.N
    free = np.flatnonzero(~field.frozen)
    bonds = dom.bonds()
    init_e = _dimensionless_energy(field.values, bonds, N)
    if free.size == 0 or bonds.shape[0] == 0:
        return SolverResult("anneal", _scaled_from_dimensionless(init_e, dom, N),
                            field.copy(), {"chains": schedule.chains, "sweeps": 0,
                                           "seed": schedule.seed})
    adj = [list(nb) for nb in dom.neighbor_lists()]
    tab = _pair_table(N)
    free_list = [int(s) for s in free]
    n_free = len(free_list)
    moves = schedule.moves_per_sweep or n_free

    best_e = init_e
    best_vals = field.values.copy()
    for chain in range(schedule.chains):
        rng = chain_stream(schedule.seed, chain)
        vals = field.values.tolist()
        e = init_e
        chain_best_e = e
        chain_best = list(vals)
        T = schedule.t_initial
        for sweep in range(schedule.sweeps):
            pick = rng.integers(0, n_free, size=moves).tolist()
            kind = rng.integers(0, 3, size=moves).tolist()
            draw = rng.integers(0, N, size=moves).tolist()
            acc = rng.random(size=moves).tolist()
            inv_t = 1.0 / T
            for m in range(moves):
                site = free_list[pick[m]]
                old = vals[site]
                km = kind[m]
                if km == 0:
                    new = old + 1 if old + 1 < N else 0
                elif km == 1:
                    new = old - 1 if old > 0 else N - 1
                else:
                    new = draw[m]
                if new == old:
                    continue
                de = 0.0
                t_new = tab[new]
                t_old = tab[old]
                for nb in adj[site]:
                    v = vals[nb]
                    de += t_new[v] - t_old[v]
                if de <= 0.0 or acc[m] < math.exp(-de * inv_t):
                    vals[site] = new
                    e += de
                    if e < chain_best_e - 1e-12:
                        chain_best_e = e
                        chain_best = list(vals)
            T = max(schedule.t_final, T * schedule.cooling)
        if chain_best_e < best_e:
            best_e = chain_best_e
            best_vals = np.asarray(chain_best, dtype=np.int64)
    out = SpinField(dom, N, best_vals, field.frozen.copy())
    scaled = discrete_energy(out).scaled
    return SolverResult("anneal", scaled, out,
                        {"chains": schedule.chains, "sweeps": schedule.sweeps,
                         "seed": schedule.seed, "initial_scaled":
                         _scaled_from_dimensionless(init_e, dom, N)})


def phase_counts(field: SpinField) -> np.ndarray:
    return np.bincount(field.values, minlength=field.N)


def anneal_kawasaki(field: SpinField, counts: Sequence[int],
                    schedule: AnnealSchedule) -> SolverResult:
    """Count-preserving annealing: swaps of unequal-phase site pairs.

    Every visited configuration keeps the exact per-phase counts; the
    initial field must satisfy them.  Swap partners are drawn globally
    (site first, then a uniform site of any other phase), which avoids the
    deadlocks of neighbor-only exchanges.
    """
    dom = field.domain
    N = field.N
    counts = [int(c) for c in counts]
    if len(counts) != N or sum(counts) != dom.n_sites:
        raise ValueError("counts must give one integer per phase summing to #sites")
    have = phase_counts(field)
    if list(have) != counts:
        raise ValueError(f"initial field has phase counts {list(have)}, "
                         f"constraint wants {counts}")
    free = np.flatnonzero(~field.frozen)
    bonds = dom.bonds()
    init_e = _dimensionless_energy(field.values, bonds, N)
    if free.size < 2 or bonds.shape[0] == 0:
        return SolverResult("kawasaki", _scaled_from_dimensionless(init_e, dom, N),
                            field.copy(), {"chains": schedule.chains, "sweeps": 0,
                                           "seed": schedule.seed})
    adj = [list(nb) for nb in dom.neighbor_lists()]
    tab = _pair_table(N)
    free_list = [int(s) for s in free]
    n_free = len(free_list)
    moves = schedule.moves_per_sweep or n_free

    best_e = init_e
    best_vals = field.values.copy()
    for chain in range(schedule.chains):
        rng = chain_stream(schedule.seed, chain)
        vals = field.values.tolist()
        # per-phase buckets of free sites, plus each site's slot in its bucket
        buckets = [[] for _ in range(N)]
        slot = {}
        for s in free_list:
            slot[s] = len(buckets[vals[s]])
            buckets[vals[s]].append(s)
        e = init_e
        chain_best_e = e
        chain_best = list(vals)
        T = schedule.t_initial
        for sweep in range(schedule.sweeps):
            pick = rng.integers(0, n_free, size=moves).tolist()
            part = rng.random(size=moves).tolist()
            acc = rng.random(size=moves).tolist()
            inv_t = 1.0 / T
            for m in range(moves):
                a = free_list[pick[m]]
                p = vals[a]
                n_other = n_free - len(buckets[p])
                if n_other == 0:
                    continue
                k = int(part[m] * n_other)
                if k >= n_other:
                    k = n_other - 1
                b = -1
                for q in range(N):
                    if q == p:
                        continue
                    nq = len(buckets[q])
                    if k < nq:
                        b = buckets[q][k]
                        break
                    k -= nq
                qv = vals[b]
                de = 0.0
                t_p, t_q = tab[p], tab[qv]
                for nb in adj[a]:
                    if nb != b:
                        v = vals[nb]
                        de += t_q[v] - t_p[v]
                for nb in adj[b]:
                    if nb != a:
                        v = vals[nb]
                        de += t_p[v] - t_q[v]
                if de <= 0.0 or acc[m] < math.exp(-de * inv_t):
                    # swap values and bucket membership
                    sa, sb = slot[a], slot[b]
                    la, lb = buckets[p], buckets[qv]
                    last = la[-1]
                    la[sa] = last
                    slot[last] = sa
                    la.pop()
                    lastb = lb[-1]
                    lb[sb] = lastb
                    slot[lastb] = sb
                    lb.pop()
                    slot[a] = len(lb)
                    lb.append(a)
                    slot[b] = len(la)
                    la.append(b)
                    vals[a], vals[b] = qv, p
                    e += de
                    if e < chain_best_e - 1e-12:
                        chain_best_e = e
                        chain_best = list(vals)
            if schedule.debug:
                got = np.bincount(np.asarray(vals), minlength=N)
                assert list(got) == counts, "phase counts drifted"
            T = max(schedule.t_final, T * schedule.cooling)
        if chain_best_e < best_e:
            best_e = chain_best_e
            best_vals = np.asarray(chain_best, dtype=np.int64)
    out = SpinField(dom, N, best_vals, field.frozen.copy())
    scaled = discrete_energy(out).scaled
    return SolverResult("kawasaki", scaled, out,
                        {"chains": schedule.chains, "sweeps": schedule.sweeps,
                         "seed": schedule.seed, "counts": counts})


# ----------------------------------------------------------------------
# bounds and the cell problem
# ----------------------------------------------------------------------


def bond_lower_bound_energy(field: SpinField, region=None) -> float:
    """Certified lower bound on the scaled energy of this field.

    Per bond the dimensionless energy 4 sin^2(k*theta/2) is at least
    4 k sin^2(theta/2), so the scaled energy dominates
    prefactor(N) * sum over bonds of eps^(d-1) * d(u_i, u_j).
    """
    dom = field.domain
    bonds = enumerate_bonds(dom, region)
    if bonds.shape[0] == 0:
        return 0.0
    k = bond_step_counts(field, bonds)
    theta = step_angle(field.N)
    return float(prefactor(field.N) * dom.eps ** (dom.d - 1) * theta * k.sum())


@dataclass
class CellProblemSpec:
    """Interface-density cell problem on the unit cube.

    ``method``: 'enumerate', 'anneal', 'dp' (axis-aligned normals only) or
    'auto' (enumerate when the search space fits, annealing otherwise).
    """

    s: int
    r: int
    nu: Direction
    eps: float
    N: int
    method: str = "auto"

    def __post_init__(self):
        self.N = _check_N(self.N)
        self.eps = float(self.eps)
        if not (0 < self.eps < 0.25):
            raise ValueError("eps must lie in (0, 1/4) so the boundary layer "
                             "leaves free sites")
        if self.method not in ("auto", "enumerate", "anneal", "dp"):
            raise ValueError(f"unknown method {self.method!r}")


def _layered_dp(field: SpinField, axis: int) -> Tuple[float, SpinField]:
    """Exact minimum over fields constant per free hyperplane along ``axis``.

    Frozen sites keep their values; the free sites of each lattice plane
    share one phase.  This is the structure of the staircase transition,
    so the value is an upper bound for the unconstrained minimum.
    """
    dom = field.domain
    N = field.N
    tab = np.asarray(_pair_table(N))
    levels = sorted(set(int(t) for t in dom.sites[:, axis]))
    level_of = {t: j for j, t in enumerate(levels)}
    L = len(levels)
    # local frozen-interaction cost per (level, phase) and transition bond counts
    local = np.zeros((L, N))
    trans_counts = np.zeros(max(L - 1, 0), dtype=np.int64)
    const = 0.0
    frozen = field.frozen
    vals = field.values
    for a, b in dom.bonds().tolist():
        ta = level_of[int(dom.sites[a, axis])]
        tb = level_of[int(dom.sites[b, axis])]
        fa, fb = bool(frozen[a]), bool(frozen[b])
        if fa and fb:
            const += float(tab[vals[a], vals[b]])
        elif fa or fb:
            fv = vals[a] if fa else vals[b]
            lv = tb if fa else ta
            local[lv] += tab[int(fv)]
        else:
            if ta == tb:
                pass  # same free plane: same phase, zero cost
            else:
                lo = min(ta, tb)
                trans_counts[lo] += 1
    dp = local[0].copy()
    parents = []
    for j in range(1, L):
        step = trans_counts[j - 1] * tab  # (N x N) transition cost
        total = dp[:, None] + step
        arg = np.argmin(total, axis=0)
        parents.append(arg)
        dp = total[arg, np.arange(N)] + local[j]
    end = int(np.argmin(dp))
    plan = [end]
    for arg in reversed(parents):
        plan.append(int(arg[plan[-1]]))
    plan.reverse()
    out = field.copy()
    for rank in np.flatnonzero(~frozen):
        out.values[rank] = plan[level_of[int(dom.sites[rank, axis])]]
    e = float(dp[end] + const)
    return _scaled_from_dimensionless(e, dom, N), out


def cell_formula_estimate(spec: CellProblemSpec,
                          schedule: Optional[AnnealSchedule] = None,
                          bits_cap: float = 26.0) -> SolverResult:
    """Estimate the interface density phi(s, r, nu) at one lattice spacing.

    The scaled energy is minimized on the unit cube adapted to nu with the
    planar jump datum frozen on the 2*eps boundary layer.  Diagnostics
    carry the per-bond lower bound of the minimizer, the staircase upper
    bound, and the analytic target prefactor(N) * d(s, r) * |nu|_1.
    """
    dom = LatticeDomain.q_cube(spec.eps, spec.nu)
    layer = boundary_layer(dom, 2.0 * spec.eps)
    datum = fill_jump_datum(dom, spec.N, spec.s, spec.r, spec.nu)
    frozen_field = apply_jump_datum(datum, spec.s, spec.r, spec.nu, layer)

    stair = staircase_recovery(
        StaircaseSpec(spec.s, spec.r, spec.nu, spec.eps, spec.N, dom))
    upper = discrete_energy(stair).scaled
    analytic = (prefactor(spec.N)
                * geodesic_distance_SN(spec.s, spec.r, spec.N) * spec.nu.norm1)

    n_free = int((~frozen_field.frozen).sum())
    method = spec.method
    if method == "auto":
        method = "enumerate" if n_free * math.log2(spec.N) <= bits_cap else "anneal"

    if method == "enumerate":
        res = enumerate_min(frozen_field, bits_cap=bits_cap)
    elif method == "anneal":
        res = anneal_glauber(frozen_field, schedule or AnnealSchedule())
    elif method == "dp":
        ax = spec.nu.axis_index()
        if ax is None:
            raise ValueError("the layered route needs an axis-aligned normal")
        energy, out_field = _layered_dp(frozen_field, ax)
        res = SolverResult("dp", energy, out_field, {"note": "upper (layered)"})
    else:  # pragma: no cover
        raise ValueError(method)

    diag = dict(res.diagnostics)
    diag.update({
        "bounds": {
            "lower": bond_lower_bound_energy(res.field),
            "upper": upper,
            "analytic": analytic,
        },
        "n_free": n_free,
        "eps": spec.eps,
        "N": spec.N,
    })
    return SolverResult(res.method, res.energy, res.field, diag)
