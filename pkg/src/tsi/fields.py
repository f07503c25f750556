"""Even real periodic fields, the canonical magnetic potential, directional data.

Fourier coefficients live on integer dual indices ``(p, q)``, meaning the
frequency ``beta = p e1* + q e2*``.  At a point with cell coordinates
``(t1, t2)`` the phase ``beta . x`` is simply ``p t1 + q t2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import SymmetryViolation, ZeroMeanField
from .lattice import Lattice, PrimitiveDirection, lattice_points, perp

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ScalarField:
    lattice: Lattice
    coeffs: Mapping[tuple[int, int], float]
    cutoff: int = field(init=False)

    def __post_init__(self):
        cut = max((max(abs(p), abs(q)) for p, q in self.coeffs), default=0)
        object.__setattr__(self, "cutoff", cut)

    @property
    def mean(self) -> float:
        return float(self.coeffs.get((0, 0), 0.0))

    def nonzero_modes(self):
        """``(indices (M, 2), values (M,))`` for every stored index except the origin."""
        items = [(k, v) for k, v in sorted(self.coeffs.items()) if k != (0, 0)]
        if not items:
            return np.zeros((0, 2), dtype=int), np.zeros(0)
        idx = np.array([k for k, _ in items], dtype=int)
        vals = np.array([v for _, v in items], dtype=float)
        return idx, vals

    def __call__(self, x):
        return eval_field(self, x)

    def on_cell_grid(self, n: int) -> np.ndarray:
        """Values on the ``n x n`` grid ``t = (i/n, j/n)`` of the parameter square."""
        t = np.arange(n) / n
        out = np.full((n, n), self.mean, dtype=float)
        for (p, q), c in self.coeffs.items():
            if (p, q) == (0, 0):
                continue
            out += c * np.cos(TWO_PI * (p * t[:, None] + q * t[None, :]))
        return out


def make_field(lattice: Lattice, coeffs, normalize_flux: bool = False,
               tol: float = 1e-12) -> ScalarField:
    """Build a field from ``{(p, q): value}`` or ``[(p, q, value), ...]``.

    Evenness and realness are checked, not enforced: ``coeff(-p,-q)`` must
    be stored and equal ``coeff(p,q)``.  With ``normalize_flux`` the mean is
    overwritten with ``2 pi / area`` (one flux quantum per cell).
    """
    if isinstance(coeffs, Mapping):
        items = list(coeffs.items())
    else:
        items = [((int(c[0]), int(c[1])), c[2]) for c in coeffs]
    table: dict[tuple[int, int], float] = {}
    for (p, q), val in items:
        key = (int(p), int(q))
        if key in table:
            raise SymmetryViolation(f"duplicate coefficient index {key}", field="coeffs")
        val = complex(val)
        if abs(val.imag) > tol * max(1.0, abs(val)):
            raise SymmetryViolation(
                f"coefficient {key} = {val} is not real", field="coeffs"
            )
        table[key] = float(val.real)
    for (p, q), val in table.items():
        partner = table.get((-p, -q))
        if partner is None or abs(partner - val) > tol * max(1.0, abs(val)):
            raise SymmetryViolation(
                f"coefficient {(p, q)} = {val} has no matching partner at {(-p, -q)}",
                field="coeffs",
            )
    if normalize_flux:
        table[(0, 0)] = TWO_PI / lattice.delta_area
    return ScalarField(lattice, dict(sorted(table.items())))


def constant_field(lattice: Lattice) -> ScalarField:
    return make_field(lattice, {}, normalize_flux=True)


def eval_field(f: ScalarField, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    idx, vals = f.nonzero_modes()
    out = np.full(x.shape[:-1], f.mean, dtype=float)
    if len(vals):
        beta = f.lattice.dual_vector(idx[:, 0], idx[:, 1])
        phase = TWO_PI * (x @ beta.T)
        # symmetric coefficients make the imaginary parts cancel pairwise
        out = out + np.cos(phase) @ vals
    return out if out.ndim else float(out)


def flux(f: ScalarField, n: int = 64) -> float:
    """Integral of the field over a cell by the periodic trapezoid rule."""
    return float(f.on_cell_grid(n).mean() * f.lattice.delta_area)


@dataclass(frozen=True)
class MagneticPotential:
    """``A(x) = (b0/2) x_perp + a0 + sum_beta a_beta exp(2 pi i beta.x)``.

    ``a1_index``, ``a1_beta`` and ``a1_vec`` are parallel arrays over the
    nonzero modes; ``a1_coeffs`` is the same data keyed by dual index.
    """

    lattice: Lattice
    b0: float
    a0: np.ndarray
    a1_coeffs: Mapping[tuple[int, int], np.ndarray]
    source: ScalarField | None = None
    a1_index: np.ndarray = field(init=False, repr=False)
    a1_beta: np.ndarray = field(init=False, repr=False)
    a1_vec: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        keys = sorted(self.a1_coeffs)
        idx = np.array(keys, dtype=int).reshape(-1, 2)
        beta = self.lattice.dual_vector(idx[:, 0], idx[:, 1]).reshape(-1, 2)
        vec = np.array([self.a1_coeffs[k] for k in keys], dtype=complex).reshape(-1, 2)
        object.__setattr__(self, "a1_index", idx)
        object.__setattr__(self, "a1_beta", beta)
        object.__setattr__(self, "a1_vec", vec)

    def with_a0(self, a0) -> "MagneticPotential":
        return MagneticPotential(self.lattice, self.b0, np.asarray(a0, dtype=float),
                                 self.a1_coeffs, self.source)

    def A0(self, x) -> np.ndarray:
        return 0.5 * self.b0 * perp(x)

    def A1(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not len(self.a1_vec):
            return np.zeros(x.shape)
        ph = np.exp(1j * TWO_PI * (x @ self.a1_beta.T))
        return (ph @ self.a1_vec).real

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.A0(x) + self.a0 + self.A1(x)


def make_potential(B: ScalarField, a0=(0.0, 0.0)) -> MagneticPotential:
    b0 = B.mean
    if b0 == 0.0:
        raise ZeroMeanField("the mean field b0 vanishes", field="B")
    lat = B.lattice
    a1 = {}
    for (p, q), b in B.coeffs.items():
        if (p, q) == (0, 0) or b == 0.0:
            continue
        beta = lat.dual_vector(p, q)
        a1[(p, q)] = b * perp(beta) / (2j * math.pi * float(beta @ beta))
    return MagneticPotential(lat, b0, np.asarray(a0, dtype=float).reshape(2), a1, B)


@dataclass(frozen=True)
class DirectionalData:
    """Restriction of a field to the Fourier modes on one dual ray.

    ``ray_coeffs[p]`` is the coefficient at ``p * delta``; the directional
    field is ``B_delta(s) = sum_p ray_coeffs[p] exp(2 pi i p s)``.
    """

    dir: PrimitiveDirection
    ray_coeffs: Mapping[int, float]
    b0: float

    def _arrays(self):
        ps = np.array(sorted(p for p in self.ray_coeffs if p != 0), dtype=float)
        cs = np.array([self.ray_coeffs[int(p)] for p in ps], dtype=float)
        return ps, cs

    def field(self, s) -> np.ndarray:
        """``B_delta(s)``, real and even with period 1."""
        s = np.asarray(s, dtype=float)
        ps, cs = self._arrays()
        if not len(ps):
            return np.zeros(s.shape)
        return np.cos(TWO_PI * s[..., None] * ps) @ cs

    def potential(self, s) -> np.ndarray:
        """``A1_delta(s) = sum_p b_p / (2 pi i p b0) exp(2 pi i p s)``; odd and real."""
        s = np.asarray(s, dtype=float)
        ps, cs = self._arrays()
        if not len(ps):
            return np.zeros(s.shape)
        # pairing p with -p turns the series into sines
        return np.sin(TWO_PI * s[..., None] * ps) @ (cs / (TWO_PI * ps * self.b0))

    def potential_derivative(self, s) -> np.ndarray:
        return self.field(s) / self.b0

    def sup_norm(self) -> float:
        """Bound ``sum |b_p|`` on ``max |B_delta|`` (attained when all modes align)."""
        return float(sum(abs(c) for p, c in self.ray_coeffs.items() if p != 0))

    @property
    def is_trivial(self) -> bool:
        return all(c == 0.0 for p, c in self.ray_coeffs.items() if p != 0)


def directional(B: ScalarField, direction: PrimitiveDirection) -> DirectionalData:
    """Collect the coefficients of ``B`` lying on the ray of ``direction.delta``."""
    dp, dq = direction.delta_index
    ray = {}
    for (p, q), c in B.coeffs.items():
        if (p, q) == (0, 0):
            continue
        # (p, q) = k (dp, dq) for integer k
        if p * dq - q * dp != 0:
            continue
        k = p // dp if dp != 0 else q // dq
        ray[int(k)] = float(c)
    return DirectionalData(direction, dict(sorted(ray.items())), B.mean)


def line_average(B: ScalarField, x, d, n: int = 64) -> np.ndarray:
    """``int_{-1/2}^{1/2} (B(x + s d) - b0) ds`` by Gauss-Legendre quadrature."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    s = 0.5 * nodes
    x = np.asarray(x, dtype=float)
    pts = x[..., None, :] + s[:, None] * np.asarray(d, dtype=float)
    return (eval_field(B, pts) - B.mean) @ (0.5 * weights)


def check_field_condition(B: ScalarField, n: int = 256) -> float:
    """Margin ``|b0| - max |B - b0|`` over an ``n x n`` cell grid."""
    b0 = B.mean
    dev = np.abs(B.on_cell_grid(n) - b0).max()
    return float(abs(b0) - dev)


def check_cosine_condition(a0, lat: Lattice, radius: float, threshold: float = 1e-3):
    """Lattice vectors ``0 < |d| <= radius`` (as ``(m, n)``) with ``|cos(a0 . d)| < threshold``."""
    coords, vecs, _ = lattice_points(lat, radius)
    c = np.cos(vecs @ np.asarray(a0, dtype=float))
    bad = np.abs(c) < threshold
    return [tuple(int(v) for v in mn) for mn in coords[bad]]


def field_from_grid(lat: Lattice, values: np.ndarray, cutoff: int,
                    atol: float = 0.0) -> ScalarField:
    """Discrete Fourier analysis of cell-grid samples back to symmetric coefficients."""
    n = values.shape[0]
    spec = np.fft.fft2(values) / (n * n)
    table = {}
    for p in range(-cutoff, cutoff + 1):
        for q in range(-cutoff, cutoff + 1):
            c = spec[p % n, q % n].real
            if abs(c) > atol:
                table[(p, q)] = float(c)
    sym = {k: 0.5 * (v + table.get((-k[0], -k[1]), 0.0)) for k, v in table.items()}
    sym = {k: v for k, v in sym.items() if (-k[0], -k[1]) in sym}
    return ScalarField(lat, dict(sorted(sym.items())))


def field_difference(a: ScalarField, b: ScalarField, include_mean: bool = False):
    """``(relative l2, max abs)`` coefficient error of ``a`` against reference ``b``."""
    keys = set(a.coeffs) | set(b.coeffs)
    if not include_mean:
        keys.discard((0, 0))
    diff = np.array([a.coeffs.get(k, 0.0) - b.coeffs.get(k, 0.0) for k in sorted(keys)])
    ref = np.array([b.coeffs.get(k, 0.0) for k in sorted(keys)])
    if not len(diff):
        return 0.0, 0.0
    norm = np.linalg.norm(ref)
    abs_err = float(np.abs(diff).max())
    rel = float(np.linalg.norm(diff) / norm) if norm > 0 else float(np.linalg.norm(diff))
    return rel, abs_err
