"""Explicit fields: staircase transitions, state projection, sampling maps.

The staircase transition is the canonical low-energy interface between two
states: the angular variable advances by one elementary step across k_s
consecutive lattice hyperplanes orthogonal to the interface normal.  The
general (s, r) case is reduced to r = state 0 by an isometry of the state
set (rotation, possibly composed with reflection) that is inverted on
output.

The projection map sends a circle value with canonical angle phi to the
state floor(phi/theta_N); it moves any point by at most theta_N and fixes
the state set pointwise.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (TAU, DEFAULT_TOL, CircleValue, Direction, canonical_angle,
                   geodesic_index_distance, snapped_floor, step_angle, _check_N)
from .lattice import LatticeDomain, SpinField, apply_jump_datum, boundary_layer
from .continuum import GridPartitionField, SmoothFieldSpec


def transition_slab(d: int, eps: float, m: int, k_s: int, axis: Optional[int] = None,
                    pad: int = 2) -> LatticeDomain:
    """Slab domain for exact staircase energy counts.

    Cross axes hold m sites each and are periodic (a torus cross-section,
    so the transition layers contain exactly m^(d-1) bonds and no boundary
    corrections appear).  The transition axis is bounded with ``pad``
    extra planes on both sides of the transition band.
    """
    axis = d - 1 if axis is None else int(axis)
    bounds = []
    periodic = []
    for ell in range(d):
        if ell == axis:
            bounds.append(((-pad - 0.5) * eps, (k_s + pad + 0.5) * eps))
        else:
            bounds.append((0.0, m * eps))
            periodic.append(ell)
    return LatticeDomain.box(eps, bounds, periodic_axes=periodic, kind="slab")


@dataclass
class StaircaseSpec:
    """Data of a staircase transition from state r to state s across nu.

    The reduction maps r to state 0 and s to k_s = geodesic step count,
    through out(k) = (sigma*k + r) mod N with sigma in {+1, -1}; outputs
    are mapped back through ``map_out``.
    """

    s: int
    r: int
    nu: Direction
    eps: float
    N: int
    domain: LatticeDomain

    def __post_init__(self):
        self.N = _check_N(self.N)
        self.s = int(self.s) % self.N
        self.r = int(self.r) % self.N
        self.k_s = geodesic_index_distance(self.s, self.r, self.N)
        forward = (self.s - self.r) % self.N
        self.sigma = 1 if forward == self.k_s else -1
        if self.k_s * step_angle(self.N) > math.pi + DEFAULT_TOL:
            raise ValueError("reduced transition exceeds half the circle")

    def map_out(self, k):
        """Map reduced indices back to the original state labels."""
        return (self.sigma * np.asarray(k, dtype=np.int64) + self.r) % self.N


def staircase_recovery(spec: StaircaseSpec, apply_datum: bool = True) -> SpinField:
    """The staircase transition field on the spec's domain.

    Outside the boundary layer the reduced value is
    min(k_s, max(0, floor(i . nu))); on the 2*eps layer (when the domain
    has a boundary and ``apply_datum`` is set) the planar jump datum is
    imposed and frozen.  Sites with eps*i . nu <= 0 carry r and sites with
    eps*i . nu >= k_s * eps carry s.
    """
    dom = spec.domain
    if dom.eps != spec.eps:
        raise ValueError("spec and domain disagree on the lattice spacing")
    floors = np.array([spec.nu.floor_dot(site) for site in dom.sites], dtype=np.int64)
    reduced = np.minimum(spec.k_s, np.maximum(0, floors))
    values = spec.map_out(reduced)
    field = SpinField(dom, spec.N, values)
    if apply_datum:
        try:
            layer = boundary_layer(dom, 2.0 * spec.eps)
        except ValueError:
            layer = None
        if layer is not None and layer.any():
            field = apply_jump_datum(field, spec.s, spec.r, spec.nu, layer)
    return field


def project_to_SN(a, N: int) -> int:
    """Project a circle value to the state floor(phi/theta_N).

    Idempotent on the state set; never moves a point by more than theta_N.
    """
    N = _check_N(N)
    phi = a.angle if isinstance(a, CircleValue) else canonical_angle(a)
    return snapped_floor(phi / step_angle(N)) % N


def sample_piecewise(spec: SmoothFieldSpec, lam: float, box,
                     warnings: Optional[dict] = None) -> GridPartitionField:
    """Piecewise-constant sampling of a smooth field on a lambda-grid.

    On cells whose closure avoids the guarded singular set, the value is
    exp(i * mean of a continuous local lifting), the mean taken by 4^d
    midpoint quadrature; node angles are unwrapped against the first node
    before averaging so branch cuts of the supplied lifting do not
    register as winding.  Cells meeting the singular set, and cells where
    the unwrapped angles spread by pi or more (winding suspected), get the
    reference value e1 = angle 0.

    ``warnings``, when given, receives counters 'singular_cells' and
    'winding_cells'.
    """
    lam = float(lam)
    box = [(float(lo), float(hi)) for lo, hi in box]
    d = len(box)
    extent = []
    for lo, hi in box:
        m = (hi - lo) / lam
        if abs(m - round(m)) > 1e-9:
            raise ValueError("box side must be a multiple of the cell size")
        extent.append(int(round(m)))
    origin = tuple(lo for lo, _ in box)

    # 4^d midpoint nodes per cell, as offsets in [0, 1)^d
    q = (np.arange(4) + 0.5) / 4.0
    offs = np.stack(np.meshgrid(*([q] * d), indexing="ij"), axis=-1).reshape(-1, d)

    singular_cells = 0
    winding_cells = 0
    angles = np.zeros(extent, dtype=float)
    for z in np.ndindex(*extent):
        lo = np.asarray(origin) + lam * np.asarray(z)
        hi = lo + lam
        if any(site.meets_cell(lo, hi) for site in spec.singular):
            angles[z] = 0.0
            singular_cells += 1
            continue
        nodes = lo + lam * offs
        phi = np.asarray(spec.phi(nodes), dtype=float)
        ref = phi[0]
        lifted = ref + np.remainder(phi - ref + math.pi, TAU) - math.pi
        if lifted.max() - lifted.min() >= math.pi:
            angles[z] = 0.0
            winding_cells += 1
            continue
        angles[z] = canonical_angle(float(lifted.mean()))
    if warnings is not None:
        warnings["singular_cells"] = singular_cells
        warnings["winding_cells"] = winding_cells
    return GridPartitionField(lam, angles, mode="S1", origin=origin)


def discretize_field(field: GridPartitionField, N: int) -> GridPartitionField:
    """Cellwise projection of an angle-valued partition onto the N-state set.

    The jump energy grows by at most 2*theta_N per unit of interior
    interface area, by the triangle inequality and the theta_N projection
    bound.
    """
    N = _check_N(N)
    if field.mode == "SN":
        if field.N == N:
            return GridPartitionField(field.lam, field.values.copy(), mode="SN",
                                      N=N, origin=field.origin)
        angles = field.angles()
    else:
        angles = field.values
    flat = np.array([project_to_SN(a, N) for a in angles.ravel()], dtype=np.int64)
    return GridPartitionField(field.lam, flat.reshape(field.extent), mode="SN",
                              N=N, origin=field.origin)


def interior_interface_area(field: GridPartitionField) -> float:
    """Total measure of interior faces separating unequal cell values."""
    total = 0
    vals = field.values
    for ell in range(field.d):
        lo = [slice(None)] * field.d
        hi = [slice(None)] * field.d
        lo[ell] = slice(0, -1)
        hi[ell] = slice(1, None)
        a = vals[tuple(lo)]
        b = vals[tuple(hi)]
        if field.mode == "SN":
            total += int((a != b).sum())
        else:
            total += int((np.abs(a - b) > 0).sum())
    return field.lam ** (field.d - 1) * total


def pointwise_sample(source, domain: LatticeDomain, N: Optional[int] = None) -> SpinField:
    """Sample a partition or smooth field at the lattice sites of a domain.

    Partition input: requires eps <= lam/2 so every site reads an
    unambiguous cell; angle values are projected to the N-state set.
    Smooth input: the lifting is evaluated at the sites and projected
    (sites inside a singular guard get state 0).
    """
    if isinstance(source, GridPartitionField):
        if domain.eps > source.lam / 2 + DEFAULT_TOL:
            raise ValueError(
                f"site spacing {domain.eps} exceeds half the cell size {source.lam}")
        pos = domain.positions()
        idx = []
        for ell in range(domain.d):
            q = (pos[:, ell] - source.origin[ell]) / source.lam
            cells = np.array([snapped_floor(v) for v in q], dtype=np.int64)
            if np.any((cells < 0) | (cells >= source.extent[ell])):
                raise ValueError("a lattice site falls outside the partition grid")
            idx.append(cells)
        cell_vals = source.values[tuple(idx)]
        if source.mode == "SN":
            if N is not None and N != source.N:
                raise ValueError("N disagrees with the partition's state count")
            return SpinField(domain, source.N, cell_vals)
        if N is None:
            raise ValueError("N required to project an angle-valued partition")
        values = np.array([project_to_SN(a, N) for a in cell_vals], dtype=np.int64)
        return SpinField(domain, N, values)
    if isinstance(source, SmoothFieldSpec):
        if N is None:
            raise ValueError("N required to project a smooth field")
        pos = domain.positions()
        phi = np.asarray(source.phi(pos), dtype=float)
        guarded = source.guard_distance(pos) <= 0.0
        values = np.array([0 if g else project_to_SN(a, N)
                           for a, g in zip(phi, guarded)], dtype=np.int64)
        return SpinField(domain, N, values)
    raise TypeError(f"cannot sample from {type(source).__name__}")
