"""Lattice domains, spin fields, and the discrete nearest-neighbor energy.

Sites are integer lattice points i with physical position eps*i.  Domain
membership uses open boxes with a tiny inset (1e-9 * eps) so sites never
sit exactly on a boundary.  Axes may be declared periodic, which turns the
cross-section into a torus; bonds along a periodic axis wrap, and a wrap
bond is counted as its own interaction even when it connects the same pair
of sites twice (extent 2).

The raw energy of a field is the sum over unordered nearest-neighbor
bonds of eps^d * |u_i - u_j|^2; the conventional factor 1/2 on ordered
pairs is absorbed by counting each bond once.  The scaled energy carries
the surface normalization N/(2*pi*eps).
"""

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .core import TAU, DEFAULT_TOL, Direction, step_angle, _check_N

BOUNDARY_INSET = 1e-9


class LatticeDomain:
    """A finite set of lattice sites with optional periodic axes.

    Use the factory classmethods: ``box`` for physical boxes (optionally
    periodic per axis), ``grid`` for an extent-shaped block of sites,
    ``q_cube`` for the unit cube with two faces orthogonal to a direction,
    and ``from_predicate`` for arbitrary membership tests.
    """

    def __init__(self, d, eps, sites, periodic=None, wrap_base=None, wrap_extent=None,
                 bounds=None, cube_basis=None, kind="custom"):
        self.d = int(d)
        self.eps = float(eps)
        if self.eps <= 0:
            raise ValueError(f"lattice spacing must be positive, got {eps}")
        sites = np.asarray(sites, dtype=np.int64).reshape(-1, self.d)
        order = np.lexsort(sites.T[::-1])  # lexicographic in integer coordinates
        self.sites = sites[order]
        self.periodic = tuple(bool(p) for p in (periodic or (False,) * self.d))
        self.wrap_base = wrap_base      # lowest index per periodic axis
        self.wrap_extent = wrap_extent  # number of sites per periodic axis
        self.bounds = bounds            # per-axis (lo, hi) physical box, or None
        self.cube_basis = cube_basis    # orthonormal rows for rotated cubes
        self.kind = kind
        self._rank = {tuple(s): r for r, s in enumerate(self.sites.tolist())}
        self._bonds = None
        self._adjacency = None

    # ------------------------------------------------------------------
    # factories
    # ------------------------------------------------------------------

    @classmethod
    def box(cls, eps, bounds, periodic_axes=(), kind="box"):
        """Sites of eps*Z^d inside an open physical box.

        ``bounds`` is a sequence of (lo, hi) per axis.  For a periodic axis
        the box length must be an integer multiple of eps; the axis then
        holds exactly (hi-lo)/eps sites starting at lo/eps and neighbor
        lookups wrap.
        """
        bounds = [(float(lo), float(hi)) for lo, hi in bounds]
        d = len(bounds)
        eps = float(eps)
        periodic = [False] * d
        for ax in periodic_axes:
            periodic[ax] = True
        inset = BOUNDARY_INSET * eps
        ranges = []
        wrap_base = [0] * d
        wrap_extent = [0] * d
        for ell, (lo, hi) in enumerate(bounds):
            if hi <= lo:
                raise ValueError(f"empty box on axis {ell}: ({lo}, {hi})")
            if periodic[ell]:
                m = (hi - lo) / eps
                if abs(m - round(m)) > 1e-9:
                    raise ValueError(
                        f"periodic axis {ell} needs a box length that is a "
                        f"multiple of eps, got length {hi - lo} with eps {eps}")
                m = int(round(m))
                base = lo / eps
                if abs(base - round(base)) > 1e-9:
                    raise ValueError(f"periodic axis {ell} must start on the lattice")
                base = int(round(base))
                ranges.append(np.arange(base, base + m, dtype=np.int64))
                wrap_base[ell] = base
                wrap_extent[ell] = m
            else:
                i_lo = int(math.floor((lo + inset) / eps)) + 1
                i_hi = int(math.ceil((hi - inset) / eps)) - 1
                # floor/ceil overshoot on exact multiples; fix by direct test
                while i_lo * eps <= lo + inset:
                    i_lo += 1
                while (i_lo - 1) * eps > lo + inset:
                    i_lo -= 1
                while i_hi * eps >= hi - inset:
                    i_hi -= 1
                while (i_hi + 1) * eps < hi - inset:
                    i_hi += 1
                if i_hi < i_lo:
                    raise ValueError(f"axis {ell} holds no sites")
                ranges.append(np.arange(i_lo, i_hi + 1, dtype=np.int64))
        grids = np.meshgrid(*ranges, indexing="ij")
        sites = np.stack([g.ravel() for g in grids], axis=1)
        return cls(d, eps, sites, periodic=tuple(periodic),
                   wrap_base=tuple(wrap_base), wrap_extent=tuple(wrap_extent),
                   bounds=tuple(bounds), kind=kind)

    @classmethod
    def grid(cls, d, eps, extent, periodic_axes=()):
        """An extent[0] x ... x extent[d-1] block of sites i in {0..m_l-1}."""
        extent = [int(m) for m in (extent if isinstance(extent, (tuple, list)) else [extent] * d)]
        bounds = [(-0.5 * eps, (m - 0.5) * eps) for m in extent]
        for ax in periodic_axes:
            bounds[ax] = (0.0, extent[ax] * eps)
        return cls.box(eps, bounds, periodic_axes=periodic_axes, kind="grid")

    @classmethod
    def q_cube(cls, eps, nu: Direction):
        """Unit cube centered at the origin with two faces orthogonal to nu."""
        d = nu.d
        ax = nu.axis_index()
        if ax is not None:
            return cls.box(eps, [(-0.5, 0.5)] * d, kind="q_cube")
        basis = nu.orthonormal_basis()
        # bounding box: any point of the cube has |x_l| <= sqrt(d)/2
        half = math.sqrt(d) / 2.0
        m = int(math.ceil(half / eps))
        axes = [np.arange(-m, m + 1, dtype=np.int64)] * d
        grids = np.meshgrid(*axes, indexing="ij")
        cand = np.stack([g.ravel() for g in grids], axis=1)
        proj = (cand * eps) @ basis.T
        inside = np.all(np.abs(proj) < 0.5 - BOUNDARY_INSET * eps, axis=1)
        return cls(d, eps, cand[inside], bounds=None, cube_basis=basis, kind="q_cube")

    @classmethod
    def from_predicate(cls, d, eps, contains: Callable, bounding_box, kind="predicate"):
        """Sites of the bounding box whose positions satisfy ``contains``."""
        eps = float(eps)
        ranges = []
        for lo, hi in bounding_box:
            ranges.append(np.arange(int(math.floor(lo / eps)) - 1,
                                    int(math.ceil(hi / eps)) + 2, dtype=np.int64))
        grids = np.meshgrid(*ranges, indexing="ij")
        cand = np.stack([g.ravel() for g in grids], axis=1)
        keep = np.array([bool(contains(eps * c)) for c in cand])
        return cls(d, eps, cand[keep], kind=kind)

    # ------------------------------------------------------------------
    # geometry
    # ------------------------------------------------------------------

    @property
    def n_sites(self) -> int:
        return self.sites.shape[0]

    def positions(self) -> np.ndarray:
        return self.eps * self.sites

    def site_rank(self, i) -> int:
        return self._rank[tuple(int(x) for x in i)]

    def boundary_distance(self, positions=None) -> np.ndarray:
        """Euclidean distance from each site to the domain boundary.

        Periodic axes carry no boundary and do not contribute.
        """
        x = self.positions() if positions is None else np.asarray(positions, dtype=float)
        if self.cube_basis is not None:
            proj = x @ self.cube_basis.T
            return 0.5 - np.max(np.abs(proj), axis=-1)
        if self.bounds is None:
            raise ValueError(f"domain kind {self.kind!r} has no boundary geometry")
        dists = []
        for ell, (lo, hi) in enumerate(self.bounds):
            if self.periodic[ell]:
                continue
            dists.append(np.minimum(x[..., ell] - lo, hi - x[..., ell]))
        if not dists:
            return np.full(x.shape[0], np.inf)
        return np.min(np.stack(dists, axis=0), axis=0)

    def bonds(self) -> np.ndarray:
        """Unordered nearest-neighbor bonds as an (n_bonds, 2) array of ranks.

        Each bond appears exactly once, emitted in the +e_l direction from
        each site; wrap bonds on periodic axes are distinct interactions.
        """
        if self._bonds is None:
            pairs = []
            sites_list = self.sites.tolist()
            for rank, s in enumerate(sites_list):
                for ell in range(self.d):
                    j = list(s)
                    j[ell] += 1
                    if self.periodic[ell]:
                        base, m = self.wrap_base[ell], self.wrap_extent[ell]
                        j[ell] = base + (j[ell] - base) % m
                        if j[ell] == s[ell]:
                            continue  # extent-1 axis: no self bond
                    other = self._rank.get(tuple(j))
                    if other is not None:
                        pairs.append((rank, other))
            self._bonds = (np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
                           if pairs else np.empty((0, 2), dtype=np.int64))
        return self._bonds

    def neighbor_lists(self):
        """Adjacency as a list of neighbor-rank lists (wrap bonds repeat)."""
        if self._adjacency is None:
            adj = [[] for _ in range(self.n_sites)]
            for a, b in self.bonds().tolist():
                adj[a].append(b)
                adj[b].append(a)
            self._adjacency = adj
        return self._adjacency


def _region_mask(domain: LatticeDomain, region) -> Optional[np.ndarray]:
    """Normalize a region spec to a boolean mask over sites (None = all)."""
    if region is None:
        return None
    if isinstance(region, np.ndarray) and region.dtype == bool:
        return region
    if callable(region):
        return np.array([bool(region(x)) for x in domain.positions()])
    # sequence of per-axis (lo, hi): open physical box
    lohi = np.asarray(region, dtype=float)
    x = domain.positions()
    return np.all((x > lohi[:, 0]) & (x < lohi[:, 1]), axis=1)


def enumerate_bonds(domain: LatticeDomain, region=None) -> np.ndarray:
    """Bonds with both endpoints inside ``region`` (default: whole domain)."""
    bonds = domain.bonds()
    mask = _region_mask(domain, region)
    if mask is None:
        return bonds
    keep = mask[bonds[:, 0]] & mask[bonds[:, 1]]
    return bonds[keep]


@dataclass
class SpinField:
    """A phase-index assignment on a lattice domain.

    ``frozen`` marks sites whose values are boundary data; they contribute
    to the energy but are never touched by solver moves.
    """

    domain: LatticeDomain
    N: int
    values: np.ndarray
    frozen: np.ndarray = dc_field(default=None)

    def __post_init__(self):
        self.N = _check_N(self.N)
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.values.shape != (self.domain.n_sites,):
            raise ValueError("values must assign one phase index per site")
        if np.any((self.values < 0) | (self.values >= self.N)):
            raise ValueError(f"phase indices must lie in 0..{self.N - 1}")
        if self.frozen is None:
            self.frozen = np.zeros(self.domain.n_sites, dtype=bool)
        else:
            self.frozen = np.asarray(self.frozen, dtype=bool)
            if self.frozen.shape != (self.domain.n_sites,):
                raise ValueError("frozen mask must cover every site")

    @classmethod
    def constant(cls, domain, N, k=0):
        return cls(domain, N, np.full(domain.n_sites, int(k), dtype=np.int64))

    @classmethod
    def random(cls, domain, N, rng):
        return cls(domain, N, rng.integers(0, N, size=domain.n_sites))

    def copy(self) -> "SpinField":
        return SpinField(self.domain, self.N, self.values.copy(), self.frozen.copy())

    # JSON wire format: {d, eps, N, extent, periodic, origin, values, frozen}
    # with values row-major over the index bounding box and -1 at holes.
    def to_json(self) -> str:
        dom = self.domain
        lo = dom.sites.min(axis=0)
        hi = dom.sites.max(axis=0)
        extent = (hi - lo + 1).tolist()
        dense = np.full(tuple(extent), -1, dtype=np.int64)
        idx = tuple((dom.sites - lo).T)
        dense[idx] = self.values
        record = {
            "d": dom.d,
            "eps": dom.eps,
            "N": int(self.N),
            "extent": extent,
            "periodic": list(dom.periodic),
            "origin": lo.tolist(),
            "values": dense.ravel().tolist(),
            "frozen": np.flatnonzero(self.frozen).tolist(),
        }
        return json.dumps(record, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SpinField":
        rec = json.loads(text)
        d = int(rec["d"])
        extent = [int(m) for m in rec["extent"]]
        origin = np.asarray(rec["origin"], dtype=np.int64)
        dense = np.asarray(rec["values"], dtype=np.int64).reshape(extent)
        mask = dense >= 0
        coords = np.argwhere(mask) + origin
        periodic = tuple(bool(p) for p in rec["periodic"])
        wrap_base = tuple(int(o) for o in origin)
        wrap_extent = tuple(extent)
        dom = LatticeDomain(d, float(rec["eps"]), coords, periodic=periodic,
                            wrap_base=wrap_base, wrap_extent=wrap_extent,
                            kind="deserialized")
        values = np.empty(dom.n_sites, dtype=np.int64)
        for rank, site in enumerate(dom.sites):
            values[rank] = dense[tuple(site - origin)]
        frozen = np.zeros(dom.n_sites, dtype=bool)
        frozen[np.asarray(rec["frozen"], dtype=np.int64)] = True
        return cls(dom, int(rec["N"]), values, frozen)


@dataclass
class EnergyReport:
    """Raw and surface-scaled energy of a field on a region."""

    raw: float
    scaled: float
    bond_count: int
    region: str = "domain"

    def as_dict(self):
        return {"raw": self.raw, "scaled": self.scaled,
                "bond_count": self.bond_count, "region": self.region}


def _bond_table(N: int) -> np.ndarray:
    """|u_a - u_b|^2 indexed by geodesic step count k = 0..floor(N/2)."""
    theta = step_angle(N)
    k = np.arange(N // 2 + 1)
    return 4.0 * np.sin(0.5 * k * theta) ** 2


def bond_step_counts(field: SpinField, bonds: np.ndarray) -> np.ndarray:
    """Geodesic step count per bond (exact integers)."""
    dk = np.abs(field.values[bonds[:, 0]] - field.values[bonds[:, 1]])
    return np.minimum(dk, field.N - dk)


def discrete_energy(field: SpinField, region=None) -> EnergyReport:
    """Nearest-neighbor energy of a spin field, raw and scaled.

    raw = sum over unordered bonds of eps^d |u_i - u_j|^2,
    scaled = N/(2*pi*eps) * raw.
    """
    dom = field.domain
    bonds = enumerate_bonds(dom, region)
    if bonds.shape[0] == 0:
        return EnergyReport(0.0, 0.0, 0, "domain" if region is None else "region")
    k = bond_step_counts(field, bonds)
    table = _bond_table(field.N)
    raw = float(dom.eps ** dom.d * table[k].sum())
    scaled = field.N / (TAU * dom.eps) * raw
    return EnergyReport(raw, scaled, int(bonds.shape[0]),
                        "domain" if region is None else "region")


def boundary_layer(domain: LatticeDomain, width: float) -> np.ndarray:
    """Mask of sites within ``width`` of the domain boundary (inclusive).

    Sites at distance exactly ``width`` are included; ties are resolved
    with a 1e-12*eps slack.
    """
    if width < 0:
        raise ValueError(f"layer width must be >= 0, got {width}")
    dist = domain.boundary_distance()
    return dist <= width + DEFAULT_TOL * domain.eps


def apply_jump_datum(field: SpinField, s: int, r: int, nu: Direction,
                     layer: np.ndarray) -> SpinField:
    """Overwrite ``layer`` sites with the planar jump datum and freeze them.

    The datum takes the value s where eps*i . nu > 0 and r where
    eps*i . nu <= 0 (the hyperplane itself belongs to the r side).
    """
    layer = np.asarray(layer, dtype=bool)
    out = field.copy()
    if nu.ints is not None:
        w = np.asarray(nu.ints, dtype=np.int64)
        side = (field.domain.sites @ w) > 0
    else:
        side = field.domain.positions() @ np.asarray(nu.vector) > DEFAULT_TOL
    out.values[layer & side] = int(s)
    out.values[layer & ~side] = int(r)
    out.frozen |= layer
    return out


def fill_jump_datum(domain: LatticeDomain, N: int, s: int, r: int,
                    nu: Direction) -> SpinField:
    """A field equal to the planar jump datum everywhere (nothing frozen)."""
    base = SpinField.constant(domain, N, r)
    full = np.ones(domain.n_sites, dtype=bool)
    out = apply_jump_datum(base, s, r, nu, full)
    out.frozen[:] = False
    return out
