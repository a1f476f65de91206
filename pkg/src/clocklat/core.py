"""Exact arithmetic on the unit circle and its N-point discretizations.

States of the N-state model are integer indices k into the set of N
equispaced unit vectors {exp(i*2*pi*k/N) : k = 0..N-1}.  Distances between
states are exact integer multiples of the elementary angle 2*pi/N, so
equality tests and geodesic step counts never touch floating point.
Continuum circle values carry a canonical angle in [0, 2*pi).
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

TAU = 2.0 * math.pi
DEFAULT_TOL = 1e-12


def _check_N(N) -> int:
    if not isinstance(N, (int, np.integer)):
        raise ValueError(f"number of states must be an integer, got {N!r}")
    if N < 2:
        raise ValueError(f"number of states must be >= 2, got {N}")
    return int(N)


def step_angle(N) -> float:
    """Smallest nonzero angle between distinct states, 2*pi/N."""
    return TAU / _check_N(N)


def canonical_angle(angle) -> float:
    """Map an angle to its canonical representative in [0, 2*pi).

    Ties at 2*pi fold to 0 so downstream floor operations are deterministic.
    """
    a = math.fmod(float(angle), TAU)
    if a < 0.0:
        a += TAU
    if a >= TAU:
        a = 0.0
    return a


def snapped_floor(x, tol: float = DEFAULT_TOL) -> int:
    """Floor with a snap window: values within tol of an integer floor there.

    Keeps constructions deterministic when a product like k*(2*pi/N)/(2*pi/N)
    lands a few ulps below the integer it represents.
    """
    x = float(x)
    r = round(x)
    if abs(x - r) <= tol * max(1.0, abs(r)):
        return int(r)
    return int(math.floor(x))


@dataclass(frozen=True)
class CircleValue:
    """A point on the unit circle, stored as its canonical angle."""

    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", canonical_angle(self.angle))

    @classmethod
    def from_index(cls, k: int, N: int) -> "CircleValue":
        N = _check_N(N)
        return cls(step_angle(N) * (int(k) % N))

    def vector(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])


def _as_angle(v) -> float:
    if isinstance(v, CircleValue):
        return v.angle
    return canonical_angle(v)


def geodesic_index_distance(a, b, N) -> int:
    """Number of elementary steps between states a and b along the short arc."""
    N = _check_N(N)
    a, b = int(a), int(b)
    if not (0 <= a < N and 0 <= b < N):
        raise ValueError(f"state indices must lie in 0..{N - 1}, got {a}, {b}")
    dk = abs(a - b)
    return min(dk, N - dk)


def geodesic_distance_SN(a, b, N) -> float:
    """Geodesic (arc-length) distance between two states, in [0, pi]."""
    return geodesic_index_distance(a, b, N) * step_angle(N)


def geodesic_distance_S1(a, b) -> float:
    """Geodesic distance between two circle values, in [0, pi]."""
    d = abs(_as_angle(a) - _as_angle(b))
    if d > math.pi:
        d = TAU - d
    return d


def bond_energy_sq(a, b, N) -> float:
    """Squared Euclidean distance |u(a) - u(b)|^2 = 4 sin^2(k*theta/2).

    Exactly zero iff a == b; at most 4 (antipodal states).
    """
    k = geodesic_index_distance(a, b, N)
    s = math.sin(0.5 * k * step_angle(N))
    return 4.0 * s * s


def prefactor(N) -> float:
    """Euclidean-to-geodesic correction 4 sin^2(theta/2) / theta^2, theta = 2*pi/N.

    Equals (sin(pi/N)/(pi/N))^2; strictly increasing in N with limit 1.
    """
    x = math.pi / _check_N(N)
    s = math.sin(x) / x
    return s * s


def norm_1(v) -> float:
    """1-norm of a vector: sum of absolute entries."""
    return float(np.abs(np.asarray(v, dtype=float)).sum())


def norm_21(A) -> float:
    """(2,1)-norm of a matrix: sum of the Euclidean norms of its columns."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got array of ndim {A.ndim}")
    return float(np.linalg.norm(A, axis=0).sum())


def sin_lemma_gap(k, theta, tol: float = DEFAULT_TOL):
    """sin^2(k*theta/2) - k*sin^2(theta/2) on 0 <= theta <= pi/k.

    Nonnegative on that range, with equality exactly at k = 1 (all theta)
    and at (k = 2, theta = pi/2).  Accepts scalar or array theta.
    """
    k = int(k)
    if k < 1:
        raise ValueError(f"step count k must be >= 1, got {k}")
    th = np.asarray(theta, dtype=float)
    hi = math.pi / k
    if np.any(th < -tol) or np.any(th > hi + tol):
        raise ValueError(f"theta must lie in [0, pi/{k}]")
    gap = np.sin(0.5 * k * th) ** 2 - k * np.sin(0.5 * th) ** 2
    if np.isscalar(theta) or getattr(theta, "ndim", 0) == 0:
        return float(gap)
    return gap


def _sign(x: int) -> int:
    return (x > 0) - (x < 0)


def _cmp_to_multiple_of_sqrt(a: int, k: int, m: int) -> int:
    """Exact sign of (a - k*sqrt(m)) for integers a, k and m >= 1."""
    if k == 0:
        return _sign(a)
    if k > 0:
        if a <= 0:
            return -1
        return _sign(a * a - k * k * m)
    if a >= 0:
        return 1
    return _sign(k * k * m - a * a)


@dataclass(frozen=True)
class Direction:
    """A unit vector, optionally backed by an integer direction.

    When an integer representative w is available (vector = w/|w|), dot
    products against integer lattice points admit exact floor and sign
    computations via integer cross-multiplication; otherwise floating
    arithmetic with a snap window is used.
    """

    vector: Tuple[float, ...]
    ints: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        n = float(np.linalg.norm(v))
        if n == 0.0:
            raise ValueError("direction vector must be nonzero")
        object.__setattr__(self, "vector", tuple((v / n).tolist()))
        if self.ints is not None:
            object.__setattr__(self, "ints", tuple(int(w) for w in self.ints))

    @classmethod
    def from_vector(cls, v) -> "Direction":
        return cls(tuple(float(x) for x in v))

    @classmethod
    def from_ints(cls, *w) -> "Direction":
        if len(w) == 1 and isinstance(w[0], (tuple, list, np.ndarray)):
            w = tuple(w[0])
        w = tuple(int(x) for x in w)
        if all(x == 0 for x in w):
            raise ValueError("integer direction must be nonzero")
        return cls(tuple(float(x) for x in w), ints=w)

    @classmethod
    def axis(cls, d: int, ell: int, sign: int = 1) -> "Direction":
        w = [0] * d
        w[ell] = 1 if sign >= 0 else -1
        return cls.from_ints(*w)

    @property
    def d(self) -> int:
        return len(self.vector)

    @property
    def norm1(self) -> float:
        return sum(abs(x) for x in self.vector)

    def axis_index(self) -> Optional[int]:
        """Axis number when the direction is +-e_ell, else None."""
        nz = [ell for ell, x in enumerate(self.vector) if abs(x) > DEFAULT_TOL]
        if len(nz) == 1:
            return nz[0]
        return None

    def dot(self, pts) -> np.ndarray:
        return np.asarray(pts, dtype=float) @ np.asarray(self.vector)

    def sign_dot(self, i) -> int:
        """Exact sign of i . nu for an integer lattice point i when possible."""
        if self.ints is not None:
            a = sum(int(x) * w for x, w in zip(i, self.ints))
            return _sign(a)
        x = float(np.dot(np.asarray(i, dtype=float), self.vector))
        if abs(x) <= DEFAULT_TOL:
            return 0
        return _sign(x)

    def floor_dot(self, i) -> int:
        """floor(i . nu) for an integer lattice point i, exact when possible."""
        if self.ints is not None:
            a = sum(int(x) * w for x, w in zip(i, self.ints))
            m = sum(w * w for w in self.ints)
            k = int(math.floor(a / math.sqrt(m)))
            # largest k with k*sqrt(m) <= a, fixed up by exact comparison
            while _cmp_to_multiple_of_sqrt(a, k + 1, m) >= 0:
                k += 1
            while _cmp_to_multiple_of_sqrt(a, k, m) < 0:
                k -= 1
            return k
        return snapped_floor(float(np.dot(np.asarray(i, dtype=float), self.vector)))

    def orthonormal_basis(self) -> np.ndarray:
        """Rows: this direction followed by a deterministic completion."""
        d = self.d
        v = np.asarray(self.vector)
        rows = [v]
        skip = int(np.argmax(np.abs(v)))
        for ell in range(d):
            if ell == skip:
                continue
            e = np.zeros(d)
            e[ell] = 1.0
            for r in rows:
                e = e - np.dot(e, r) * r
            n = np.linalg.norm(e)
            if n < 1e-12:
                raise ValueError("degenerate basis completion")
            rows.append(e / n)
        return np.vstack(rows)
