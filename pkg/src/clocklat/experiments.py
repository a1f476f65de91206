"""Reproducible study drivers: sweeps, ladders, and rate fits.

Every driver produces either a small report dict or a ``ConvergenceTable``
whose rows carry lower bound, estimate, upper bound, analytic target, the
signed gap (estimate minus analytic) and the wall time per row.  Tables
serialize to CSV with the fixed header

    parameter,lower,estimate,upper,analytic,gap,seconds

A ``timer`` argument (default ``time.perf_counter``) is injectable so that
reruns can be compared byte for byte when a fixed clock is supplied.
"""

import math
import time
from dataclasses import dataclass, field as dc_field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import Direction, geodesic_distance_S1, prefactor, sin_lemma_gap
from .continuum import GridPartitionField, jump_energy_window
from .solvers import AnnealSchedule, CellProblemSpec, cell_formula_estimate

CSV_HEADER = "parameter,lower,estimate,upper,analytic,gap,seconds"


@dataclass
class TableRow:
    parameter: float
    lower: float
    estimate: float
    upper: float
    analytic: float
    seconds: float

    @property
    def gap(self) -> float:
        return self.estimate - self.analytic

    def as_csv(self) -> str:
        cells = [self.parameter, self.lower, self.estimate, self.upper,
                 self.analytic, self.gap, self.seconds]
        return ",".join(repr(float(c)) for c in cells)


@dataclass
class ConvergenceTable:
    """Ladder results sorted by parameter, with an optional fitted rate."""

    rows: List[TableRow] = dc_field(default_factory=list)
    rate_exponent: Optional[float] = None
    rate_residual: Optional[float] = None
    rate_fitted: bool = False
    rows_excluded: int = 0

    def sort(self):
        self.rows.sort(key=lambda r: r.parameter)

    def to_csv(self, zero_seconds: bool = False) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            if zero_seconds:
                r = TableRow(r.parameter, r.lower, r.estimate, r.upper,
                             r.analytic, 0.0)
            lines.append(r.as_csv())
        return "\n".join(lines) + "\n"

    def as_dict(self):
        return {
            "rows": [{"parameter": r.parameter, "lower": r.lower,
                      "estimate": r.estimate, "upper": r.upper,
                      "analytic": r.analytic, "gap": r.gap,
                      "seconds": r.seconds} for r in self.rows],
            "rate_exponent": self.rate_exponent,
            "rate_residual": self.rate_residual,
            "rate_fitted": self.rate_fitted,
            "rows_excluded": self.rows_excluded,
        }


def fit_rate(table_or_pairs) -> Tuple[Optional[float], Optional[float], int, bool]:
    """Least-squares slope of log|gap| against log(parameter).

    Rows with non-positive |gap| are excluded and counted; fewer than 3
    usable rows means no fit.  Returns (exponent, residual, excluded,
    fitted).
    """
    if isinstance(table_or_pairs, ConvergenceTable):
        pairs = [(r.parameter, abs(r.gap)) for r in table_or_pairs.rows]
    else:
        pairs = [(float(p), abs(float(g))) for p, g in table_or_pairs]
    usable = [(p, g) for p, g in pairs if g > 0.0 and p > 0.0]
    excluded = len(pairs) - len(usable)
    if len(usable) < 3:
        return None, None, excluded, False
    x = np.log([p for p, _ in usable])
    y = np.log([g for _, g in usable])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    residual = float(res[0]) if res.size else 0.0
    return float(coef[0]), residual, excluded, True


def attach_rate(table: ConvergenceTable):
    exp, res, excl, fitted = fit_rate(table)
    table.rate_exponent = exp
    table.rate_residual = res
    table.rows_excluded = excl
    table.rate_fitted = fitted
    return table


# ----------------------------------------------------------------------
# drivers
# ----------------------------------------------------------------------


def run_lemma_sweep(k_max: int = 64, grid: int = 10_000, tol: float = 1e-12) -> dict:
    """Minimum of sin^2(k*theta/2) - k*sin^2(theta/2) over a theta grid per k.

    Also records the equality locus: k = 1 is an identity, and the only
    isolated equality for k >= 2 sits at (k = 2, theta = pi/2).
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    min_gap = np.inf
    argmin = (1, 0.0)
    equalities = []
    for k in range(1, k_max + 1):
        theta = np.linspace(0.0, math.pi / k, grid)
        gap = sin_lemma_gap(k, theta)
        j = int(np.argmin(gap))
        if gap[j] < min_gap:
            min_gap = float(gap[j])
            argmin = (k, float(theta[j]))
        if k >= 2:
            hits = np.flatnonzero(np.abs(gap) <= tol)
            # skip the trivial theta = 0 node
            for h in hits:
                if theta[h] > tol:
                    equalities.append((k, float(theta[h])))
    return {
        "k_max": int(k_max),
        "grid": int(grid),
        "min_gap": min_gap,
        "argmin_k": argmin[0],
        "argmin_theta": argmin[1],
        "equality_locus": equalities,
        "k1_identity": True,
    }


def run_gamma_sandwich(s: int, r: int, nu: Direction, N: int,
                       eps_ladder: Sequence[float], method: str = "auto",
                       schedule: Optional[AnnealSchedule] = None,
                       timer=time.perf_counter) -> ConvergenceTable:
    """Cell-problem ladder: lower bound, estimate, staircase upper, analytic."""
    table = ConvergenceTable()
    for eps in eps_ladder:
        t0 = timer()
        spec = CellProblemSpec(s, r, nu, eps, N, method=method)
        res = cell_formula_estimate(spec, schedule=schedule)
        t1 = timer()
        b = res.diagnostics["bounds"]
        table.rows.append(TableRow(eps, b["lower"], res.energy, b["upper"],
                                   b["analytic"], t1 - t0))
    table.sort()
    return attach_rate(table)


def run_prefactor_limit(N_ladder: Sequence[int],
                        timer=time.perf_counter) -> ConvergenceTable:
    """Prefactor values against their limit 1; the gap decays like N^-2."""
    table = ConvergenceTable()
    for N in N_ladder:
        t0 = timer()
        p = prefactor(int(N))
        t1 = timer()
        table.rows.append(TableRow(float(N), p, p, p, 1.0, t1 - t0))
    table.sort()
    return attach_rate(table)


def rasterize_halfplane(nu: Direction, angle_minus: float, angle_plus: float,
                        lam: float) -> GridPartitionField:
    """Rasterize the planar jump datum on the unit cube adapted to nu.

    Cell values are sampled at cell centers: angle_plus where
    center . nu > 0, angle_minus otherwise.  The grid covers the cube's
    bounding box; energy should be measured through the cube window.
    """
    d = nu.d
    half = math.sqrt(d) / 2.0
    m = int(math.ceil(half / lam))
    extent = (2 * m,) * d
    origin = (-m * lam,) * d
    axes = [origin[ell] + lam * (np.arange(extent[ell]) + 0.5) for ell in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([g.ravel() for g in grids], axis=1)
    side = centers @ np.asarray(nu.vector) > 0.0
    vals = np.where(side, float(angle_plus), float(angle_minus)).reshape(extent)
    return GridPartitionField(lam, vals, mode="S1", origin=origin)


def cube_window(nu: Direction):
    """Halfspace description of the unit cube with two faces orthogonal to nu."""
    B = nu.orthonormal_basis()
    planes = []
    for row in B:
        planes.append((row, 0.5))
        planes.append((-row, 0.5))
    return planes


def run_oblique_raster(nu: Direction, angle_minus: float, angle_plus: float,
                       lam_ladder: Sequence[float],
                       timer=time.perf_counter) -> ConvergenceTable:
    """Rasterization ladder for a planar interface with an oblique normal.

    The staircase of grid faces overcounts the interface exactly by the
    1-norm of the normal, so the windowed jump energy converges to
    d(u-, u+) * |nu|_1 * (section area 1).
    """
    d_jump = geodesic_distance_S1(angle_minus, angle_plus)
    analytic = d_jump * nu.norm1
    window = cube_window(nu)
    table = ConvergenceTable()
    for lam in lam_ladder:
        t0 = timer()
        field = rasterize_halfplane(nu, angle_minus, angle_plus, lam)
        est = jump_energy_window(field, window)
        t1 = timer()
        table.rows.append(TableRow(lam, est, est, est, analytic, t1 - t0))
    table.sort()
    return attach_rate(table)
