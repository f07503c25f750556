"""Lattice and dual-lattice algebra in two dimensions.

A lattice ``L`` is spanned by row vectors ``e1, e2`` with positive
orientation.  Dual vectors are stored both as 2-vectors and, wherever exact
bookkeeping matters, by integer coordinates ``(p, q)`` in the dual basis,
``beta = p * e1_star + q * e2_star``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDeterminant, ZeroVector


def perp(v):
    """Rotate by +90 degrees: ``(v1, v2) -> (-v2, v1)`` (works on stacks)."""
    v = np.asarray(v)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


@dataclass(frozen=True)
class Lattice:
    e1: np.ndarray
    e2: np.ndarray
    delta_area: float
    e1_star: np.ndarray
    e2_star: np.ndarray

    @property
    def basis(self) -> np.ndarray:
        """Rows are ``e1, e2``."""
        return np.array([self.e1, self.e2])

    @property
    def dual_basis(self) -> np.ndarray:
        return np.array([self.e1_star, self.e2_star])

    @property
    def gram(self) -> np.ndarray:
        b = self.basis
        return b @ b.T

    def vector(self, m, n) -> np.ndarray:
        """Lattice vector ``m e1 + n e2`` (broadcasts over arrays)."""
        m = np.asarray(m, dtype=float)[..., None]
        n = np.asarray(n, dtype=float)[..., None]
        return m * self.e1 + n * self.e2

    def dual_vector(self, p, q) -> np.ndarray:
        """Dual vector ``p e1* + q e2*`` (broadcasts over arrays)."""
        p = np.asarray(p, dtype=float)[..., None]
        q = np.asarray(q, dtype=float)[..., None]
        return p * self.e1_star + q * self.e2_star

    def point(self, t1, t2) -> np.ndarray:
        """Point with cell coordinates ``(t1, t2)``, same as :meth:`vector`."""
        return self.vector(t1, t2)

    @property
    def shortest_length(self) -> float:
        vecs = shortest_vectors(self)
        return float(np.linalg.norm(vecs[0]))


def make_lattice(e1, e2) -> Lattice:
    e1 = np.asarray(e1, dtype=float).reshape(2)
    e2 = np.asarray(e2, dtype=float).reshape(2)
    det = e1[0] * e2[1] - e1[1] * e2[0]
    if not det > 0:
        raise NonPositiveDeterminant(
            f"det[e1; e2] = {det!r} must be positive", field="lattice"
        )
    e1_star = -perp(e2) / det
    e2_star = perp(e1) / det
    for arr in (e1, e2, e1_star, e2_star):
        arr.setflags(write=False)
    return Lattice(e1, e2, float(det), e1_star, e2_star)


def coordinate_bounds(lat: Lattice, radius: float) -> tuple[int, int]:
    """Integer coordinate ranges covering every lattice vector of length <= radius.

    ``m = d . e1*`` so ``|m| <= radius |e1*|``; same for ``n``.
    """
    mmax = int(math.ceil(radius * np.linalg.norm(lat.e1_star) + 1e-9))
    nmax = int(math.ceil(radius * np.linalg.norm(lat.e2_star) + 1e-9))
    return mmax, nmax


def lattice_points(lat: Lattice, radius: float, include_zero: bool = False):
    """All ``(m, n)`` with ``0 < |m e1 + n e2| <= radius``, sorted by length.

    Returns ``(coords, vectors, lengths)``.
    """
    mmax, nmax = coordinate_bounds(lat, radius)
    mm, nn = np.meshgrid(
        np.arange(-mmax, mmax + 1), np.arange(-nmax, nmax + 1), indexing="ij"
    )
    coords = np.stack([mm.ravel(), nn.ravel()], axis=1)
    vecs = lat.vector(coords[:, 0], coords[:, 1])
    lengths = np.linalg.norm(vecs, axis=1)
    keep = lengths <= radius * (1 + 1e-12)
    if not include_zero:
        keep &= np.any(coords != 0, axis=1)
    order = np.lexsort((coords[keep][:, 1], coords[keep][:, 0], lengths[keep]))
    return coords[keep][order], vecs[keep][order], lengths[keep][order]


def shortest_vectors(lat: Lattice) -> np.ndarray:
    r = max(np.linalg.norm(lat.e1), np.linalg.norm(lat.e2))
    _, vecs, _ = lattice_points(lat, r)
    return vecs


def validate_length_condition(lat: Lattice, radius: float):
    """Pairs ``(d, d')`` of equal length with ``d' != +-d`` and ``|d| <= radius``.

    Each unordered pair of rays is reported once, as integer coordinates
    ``((m, n), (m', n'))`` with both members in canonical sign.  An empty
    list means the length condition holds up to ``radius``.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    coords, _, lengths = lattice_points(lat, radius)
    canon = [_canonical_sign(int(m), int(n)) for m, n in coords]
    tol = 1e-9 * radius
    rays: dict[tuple[int, int], float] = {}
    for c, ell in zip(canon, lengths):
        rays.setdefault(c, float(ell))
    items = sorted(rays.items(), key=lambda kv: kv[1])
    pairs = []
    for i, (ci, li) in enumerate(items):
        for cj, lj in items[i + 1:]:
            if lj - li > tol:
                break
            pairs.append((ci, cj))
    return pairs


def _canonical_sign(m: int, n: int) -> tuple[int, int]:
    if m < 0 or (m == 0 and n < 0):
        return -m, -n
    return m, n


@dataclass(frozen=True)
class PrimitiveDirection:
    """Primitive lattice direction ``d0 = m0 e1 + n0 e2`` and its annihilating dual ray.

    ``delta = -n0 e1* + m0 e2*`` has dual coordinates ``(-n0, m0)``.
    """

    m0: int
    n0: int
    d0: np.ndarray = field(compare=False, repr=False)
    delta: np.ndarray = field(compare=False, repr=False)

    @property
    def key(self) -> tuple[int, int]:
        return (self.m0, self.n0)

    @property
    def delta_index(self) -> tuple[int, int]:
        return (-self.n0, self.m0)

    def ray_index(self, p: int) -> tuple[int, int]:
        """Dual coordinates of ``p * delta``."""
        return (-p * self.n0, p * self.m0)

    def __str__(self):
        return f"({self.m0},{self.n0})"


def make_direction(lat: Lattice, m0: int, n0: int) -> PrimitiveDirection:
    m0, n0 = int(m0), int(n0)
    if (m0, n0) == (0, 0):
        raise ZeroVector("direction (0, 0) is not a lattice direction")
    if math.gcd(abs(m0), abs(n0)) != 1:
        raise ValueError(f"({m0}, {n0}) is not primitive")
    if (m0, n0) != _canonical_sign(m0, n0):
        raise ValueError(f"({m0}, {n0}) is not in canonical sign")
    d0 = lat.vector(m0, n0)
    delta = lat.dual_vector(-n0, m0)
    d0.setflags(write=False)
    delta.setflags(write=False)
    return PrimitiveDirection(m0, n0, d0, delta)


def primitive_decompose(lat: Lattice, m: int, n: int):
    """Split ``d = m e1 + n e2`` as ``sign * k * d0``.

    Returns ``(k, direction, sign)`` with ``k >= 1``, ``direction`` in
    canonical sign and ``sign`` in ``{+1, -1}``.
    """
    m, n = int(m), int(n)
    if (m, n) == (0, 0):
        raise ZeroVector("cannot decompose the zero vector")
    k = math.gcd(abs(m), abs(n))
    m0, n0 = m // k, n // k
    cm, cn = _canonical_sign(m0, n0)
    sign = 1 if (cm, cn) == (m0, n0) else -1
    return k, make_direction(lat, cm, cn), sign


def extended_euclid(a: int, b: int) -> tuple[int, int, int]:
    """``(g, u, v)`` with ``a u + b v = g = gcd(a, b)``."""
    old_r, r = a, b
    old_u, u = 1, 0
    old_v, v = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_u, u = u, old_u - q * u
        old_v, v = v, old_v - q * v
    if old_r < 0:
        old_r, old_u, old_v = -old_r, -old_u, -old_v
    return old_r, old_u, old_v


def bezout_minimal(m0: int, n0: int) -> tuple[int, int]:
    """Integers ``(u, v)`` with ``m0 u + n0 v = 1`` and smallest ``|u| + |v|``."""
    g, u, v = extended_euclid(m0, n0)
    if g != 1:
        raise ValueError(f"({m0}, {n0}) not coprime")
    # general solution (u + t n0, v - t m0); |u|+|v| is convex in t
    span = max(abs(m0), abs(n0), 1)
    t0 = 0
    if m0 != 0 or n0 != 0:
        # real minimiser lies within a few units of the rounded projection
        t0 = -round((u * n0 - v * m0) / (m0 * m0 + n0 * n0))
    best = None
    for t in range(t0 - span - 1, t0 + span + 2):
        cand = (u + t * n0, v - t * m0)
        score = (abs(cand[0]) + abs(cand[1]), cand)
        if best is None or score < best:
            best = score
    return best[1]


@dataclass(frozen=True)
class DualPair:
    """Adapted bases: ``(delta, delta_prime)`` of L* and its dual ``(gamma, gamma_prime)`` in L.

    Integer coordinates are kept alongside the vectors: ``gamma_coords`` in
    ``(e1, e2)`` and ``delta_prime_index`` in ``(e1*, e2*)``.
    """

    gamma: np.ndarray
    gamma_prime: np.ndarray
    delta_prime: np.ndarray
    gamma_coords: tuple[int, int]
    gamma_prime_coords: tuple[int, int]
    delta_prime_index: tuple[int, int]

    def ray_coordinates(self, index) -> tuple[int, int]:
        """Coordinates ``(q, q')`` of a dual index in the basis ``(delta, delta_prime)``."""
        p, q = index
        a, b = self.gamma_coords
        c, d = self.gamma_prime_coords
        return (p * a + q * b, p * c + q * d)


def dual_pair(lat: Lattice, direction: PrimitiveDirection) -> DualPair:
    m0, n0 = direction.m0, direction.n0
    u, v = bezout_minimal(m0, n0)
    # delta' = u e1* + v e2* pairs to 1 with d0 and completes delta to a basis
    dp_index = (u, v)
    gamma_coords = (-v, u)
    gamma_prime_coords = (m0, n0)
    return DualPair(
        gamma=lat.vector(*gamma_coords),
        gamma_prime=lat.vector(*gamma_prime_coords),
        delta_prime=lat.dual_vector(*dp_index),
        gamma_coords=gamma_coords,
        gamma_prime_coords=gamma_prime_coords,
        delta_prime_index=dp_index,
    )


def primitive_directions(cutoff: int) -> list[tuple[int, int]]:
    """Canonical primitive ``(m0, n0)`` with ``max(|m0|, |n0|) <= cutoff``.

    These are exactly the rays needed to cover every nonzero dual index
    ``(p, q)`` with ``max(|p|, |q|) <= cutoff``: the ray of ``(-n0, m0)``
    carries index ``(p, q)`` iff ``(m0, n0)`` is ``(q, -p)`` up to sign and
    gcd.
    """
    out = []
    for m0 in range(0, cutoff + 1):
        for n0 in range(-cutoff, cutoff + 1):
            if (m0, n0) == (0, 0) or math.gcd(m0, abs(n0)) != 1:
                continue
            if (m0, n0) != _canonical_sign(m0, n0):
                continue
            out.append((m0, n0))
    out.sort(key=lambda mn: (max(abs(mn[0]), abs(mn[1])), abs(mn[0]) + abs(mn[1]), mn))
    return out
