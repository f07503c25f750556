"""Forward engine: wave-trace invariants from fields.

Two independent routes compute the same numbers:

* raw: periodic trapezoid quadrature of the defining cell integrals, with
  segment integrals of each Fourier mode done in closed form;
* directional: one-dimensional integrals along a dual ray after the
  monotone change of variables ``y = s + A1_delta(s)``.

Sign convention.  Working the reduction through with ``A0(x) = (b0/2) x_perp``
and ``d = k d0`` gives ``-A0(d).x + A0(x).d = -2 pi k (delta.x)`` and
``d . a_{p delta} = -k b_{p delta} / (i p b0)``, so the phase of the ``d``
integrand is ``k a0.d0 - 2 pi k (sigma + A1_delta(sigma))``.  The overall
sign of the ``k``-dependent part drops out of the symmetrised sums, which
depend only on ``cos(k a0.d0)`` times cosine moments of ``s'(y)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NonMonotone, NonzeroMeanPotential
from .fields import (
    DirectionalData,
    MagneticPotential,
    ScalarField,
    directional,
)
from .lattice import Lattice, PrimitiveDirection, dual_pair, make_direction, perp
from .numerics import gauss_legendre_unit, invert_monotone, periodic_grid, phi1

TWO_PI = 2.0 * math.pi

DEFAULT_GRID = 1024
DEFAULT_RAW_RESOLUTION = 256
DEFAULT_LINE_NODES = 48
COSINE_FLOOR = 1e-3


# ----------------------------------------------------------------------
# change of variables


@dataclass(frozen=True)
class ChangeOfVariables:
    """Monotone map ``y(s) = s + A1_delta(s)`` and its inverse sampled on ``y_j = j/n``."""

    dd: DirectionalData
    y: np.ndarray
    s: np.ndarray
    sprime: np.ndarray

    @property
    def dir(self) -> PrimitiveDirection:
        return self.dd.dir

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def remainder(self) -> np.ndarray:
        """Periodic odd part ``e(y) = s(y) - y``."""
        return self.s - self.y

    def forward(self, s):
        return np.asarray(s, dtype=float) + self.dd.potential(s)

    def forward_derivative(self, s):
        return 1.0 + self.dd.potential_derivative(s)

    def inverse(self, y):
        """``s(y)`` at arbitrary points by Newton on the analytic forward map."""
        y = np.asarray(y, dtype=float)
        m = _potential_bound(self.dd)
        return invert_monotone(self.forward, self.forward_derivative, y,
                               y - m, y + m, tol=1e-13)

    def cosine_moment(self, k: int) -> float:
        """``int_0^1 cos(2 pi k y) s'(y) dy`` by the periodic trapezoid rule."""
        return float(np.mean(np.cos(TWO_PI * k * self.y) * self.sprime))

    def sine_moment(self, k: int) -> float:
        return float(np.mean(np.sin(TWO_PI * k * self.y) * self.sprime))


def _potential_bound(dd: DirectionalData) -> float:
    return sum(abs(c / (TWO_PI * p * dd.b0)) for p, c in dd.ray_coeffs.items() if p) + 1e-12


def build_change_of_variables(dd: DirectionalData, n: int = DEFAULT_GRID) -> ChangeOfVariables:
    fine = periodic_grid(8 * n)
    slope = 1.0 + dd.potential_derivative(fine)
    if slope.min() <= 0:
        raise NonMonotone(
            f"y'(s) reaches {slope.min():.3e} on direction {dd.dir}; "
            "the field exceeds its mean somewhere along this ray"
        )
    y = periodic_grid(n)
    m = _potential_bound(dd)
    fwd = lambda s: s + dd.potential(s)
    dfwd = lambda s: 1.0 + dd.potential_derivative(s)
    s = invert_monotone(fwd, dfwd, y, y - m, y + m, tol=1e-13)
    sprime = 1.0 / dfwd(s)
    for arr in (y, s, sprime):
        arr.setflags(write=False)
    return ChangeOfVariables(dd, y, s, sprime)


# ----------------------------------------------------------------------
# directional formulas


def I_invariant_directional(dd: DirectionalData, cov: ChangeOfVariables, k: int,
                            a0_dot_d0: float, c0: float) -> float:
    """Symmetrised ``I(d) + I(-d)`` for ``d = k d0``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return 2.0 * c0 * math.cos(k * a0_dot_d0) * cov.cosine_moment(k)


def J1_invariant_directional(v_dir: DirectionalData, cov: ChangeOfVariables, k: int,
                             a0_dot_d0: float, c0: float) -> float:
    """Potential part of ``J(d) + J(-d)`` for ``d = k d0``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    w = v_dir.field(cov.s) * cov.sprime
    return 2.0 * c0 * math.cos(k * a0_dot_d0) * float(np.mean(w * np.cos(TWO_PI * k * cov.y)))


# ----------------------------------------------------------------------
# raw quadrature


def _cell_points(lat: Lattice, n: int) -> np.ndarray:
    t = periodic_grid(n)
    return lat.point(t[:, None], t[None, :])


def _segment_phase(A: MagneticPotential, x: np.ndarray, d: np.ndarray) -> np.ndarray:
    """``-A0(d).x + int_0^1 A(x + s d).d ds`` at points ``x``."""
    out = -(x @ A.A0(d))
    out = out + A.A0(x) @ d + A.a0 @ d
    if len(A.a1_vec):
        bd = A.a1_beta @ d
        coef = (A.a1_vec @ d) * phi1(TWO_PI * bd)
        out = out + (np.exp(1j * TWO_PI * (x @ A.a1_beta.T)) @ coef).real
    return out


def I_invariant_raw(A: MagneticPotential, lat: Lattice, d, resolution: int = DEFAULT_RAW_RESOLUTION) -> complex:
    """``I(d)`` by 2-D trapezoid quadrature over a cell; ``d`` given as ``(m, n)``."""
    m, n = d
    if (m, n) == (0, 0):
        raise ValueError("d must be nonzero")
    dv = lat.vector(m, n)
    x = _cell_points(lat, resolution)
    return complex(lat.delta_area * np.mean(np.exp(1j * _segment_phase(A, x, dv))))


def m0_phase(A: MagneticPotential, x, y) -> np.ndarray:
    """``phi(x, y) = int_0^1 (x - y) . A(y + s (x - y)) ds`` in closed form; ``m0 = exp(i phi)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = x - y
    out = 0.5 * A.b0 * np.sum(u * perp(y), axis=-1) + u @ A.a0
    if len(A.a1_vec):
        theta = TWO_PI * (u @ A.a1_beta.T)
        ey = np.exp(1j * TWO_PI * (y @ A.a1_beta.T))
        ua = u @ A.a1_vec.T
        out = out + np.sum(ua * ey * phi1(theta), axis=-1).real
    return out


def b_term(A: MagneticPotential, x, y) -> np.ndarray:
    """Amplitude ``b(x, y) = [(-i d_x - A(x))^2 m0] / m0``.

    With ``m0 = exp(i phi)`` and ``w = grad_x phi - A(x)`` this is
    ``sum_j w_j**2 - i div_x w``; all derivatives are analytic per mode.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = x - y
    grad = 0.5 * A.b0 * perp(y) + A.a0 - A(x)
    lap = np.zeros(u.shape[:-1])
    if len(A.a1_vec):
        beta = A.a1_beta
        avec = A.a1_vec
        theta = TWO_PI * (u @ beta.T)
        ey = np.exp(1j * TWO_PI * (y @ beta.T))
        ua = u @ avec.T
        f0, f1, f2 = phi1(theta, 0), phi1(theta, 1), phi1(theta, 2)
        # d/dx_j [ (u . a) phi1(theta) ] = a_j phi1 + (u . a) phi1' 2 pi beta_j
        grad = grad + np.einsum("...m,mj->...j", ey * f0, avec).real
        grad = grad + TWO_PI * np.einsum("...m,mj->...j", ey * ua * f1, beta).real
        ab = np.einsum("mj,mj->m", avec, beta)
        b2 = np.einsum("mj,mj->m", beta, beta)
        lap_modes = 2 * TWO_PI * ab * f1 + TWO_PI**2 * b2 * ua * f2
        lap = np.sum(ey * lap_modes, axis=-1).real
        # div A1(x)
        ex = np.exp(1j * TWO_PI * (x @ beta.T))
        lap = lap - (ex @ (1j * TWO_PI * ab)).real
    return np.sum(grad * grad, axis=-1) - 1j * lap


def _line_modes(f: ScalarField, x: np.ndarray, d: np.ndarray) -> np.ndarray:
    """``int_0^1 (f(x + s d) - mean) ds`` mode by mode."""
    idx, vals = f.nonzero_modes()
    if not len(vals):
        return np.zeros(x.shape[:-1])
    beta = f.lattice.dual_vector(idx[:, 0], idx[:, 1])
    coef = vals * phi1(TWO_PI * (beta @ d))
    return (np.exp(1j * TWO_PI * (x @ beta.T)) @ coef).real


def J_raw_parts(A: MagneticPotential, V: ScalarField, lat: Lattice, d,
                resolution: int = 128, line_nodes: int = DEFAULT_LINE_NODES):
    """``(J1(d), J2(d))``: potential and amplitude parts of ``J(d)`` by cell quadrature.

    The segment average of ``b(x + s d, x)`` uses Gauss-Legendre nodes on
    ``[0, 1]`` (the integrand is smooth but not periodic in ``s``).
    """
    if abs(V.mean) > 1e-12:
        raise NonzeroMeanPotential(f"V has mean {V.mean!r}; the invariants assume zero mean",
                                   field="V")
    m, n = d
    dv = lat.vector(m, n)
    x = _cell_points(lat, resolution)
    phase = np.exp(1j * _segment_phase(A, x, dv))
    v_line = _line_modes(V, x, dv)
    nodes, weights = gauss_legendre_unit(line_nodes)
    b_line = np.zeros(x.shape[:-1], dtype=complex)
    for s, w in zip(nodes, weights):
        b_line += w * b_term(A, x + s * dv, x)
    area = lat.delta_area
    return (complex(area * np.mean(v_line * phase)), complex(area * np.mean(b_line * phase)))


def J_invariant_raw(A: MagneticPotential, V: ScalarField, lat: Lattice, d,
                    resolution: int = 128, line_nodes: int = DEFAULT_LINE_NODES) -> complex:
    j1, j2 = J_raw_parts(A, V, lat, d, resolution, line_nodes)
    return j1 + j2


# ----------------------------------------------------------------------
# amplitude part along a ray (fast path)


def _ray_phase(A: MagneticPotential, direction: PrimitiveDirection, k: int,
               sigma: np.ndarray) -> np.ndarray:
    """``exp(i [-A0(d).x + A0(x).d + segment A1])`` at ``x = sigma * gamma`` for ``d = k d0``.

    Only on-ray modes survive the segment average; ``a0`` is left out.
    """
    lat = A.lattice
    pair = dual_pair(lat, direction)
    d = k * direction.d0
    x = sigma[:, None] * pair.gamma
    phase = -(x @ A.A0(d)) + A.A0(x) @ d
    if len(A.a1_vec):
        on = (A.a1_index @ np.array([direction.m0, direction.n0])) == 0
        if np.any(on):
            coef = A.a1_vec[on] @ d
            phase = phase + (np.exp(1j * TWO_PI * (x @ A.a1_beta[on].T)) @ coef).real
    return np.exp(1j * phase)


def _amplitude_line_coefficients(A: MagneticPotential, d: np.ndarray, nodes, weights):
    """Fourier coefficients (dual index -> complex) of ``x -> int_0^1 b(x + s d, x) ds``."""
    w0 = -0.5 * A.b0 * nodes[:, None] * perp(d)  # (ns, 2)
    coeffs: dict[tuple[int, int], complex] = {
        (0, 0): complex(np.sum(weights * np.sum(w0 * w0, axis=1)))
    }
    if not len(A.a1_vec):
        return coeffs
    beta = A.a1_beta
    avec = A.a1_vec
    idx = A.a1_index
    theta = TWO_PI * nodes[None, :] * (beta @ d)[:, None]  # (M, ns)
    da = avec @ d  # (M,)
    f0, f1, f2 = phi1(theta, 0), phi1(theta, 1), phi1(theta, 2)
    g = (avec[:, None, :] * (f0 - np.exp(1j * theta))[:, :, None]
         + TWO_PI * (nodes[None, :] * da[:, None] * f1)[:, :, None] * beta[:, None, :])
    b2 = np.einsum("mj,mj->m", beta, beta)
    h = -1j * TWO_PI**2 * b2[:, None] * nodes[None, :] * da[:, None] * f2
    lin = np.einsum("s,msj,sj->m", weights, g, w0) * 2 + h @ weights
    for i, key in enumerate(map(tuple, idx)):
        coeffs[key] = coeffs.get(key, 0) + lin[i]
    quad = np.einsum("s,isj,ksj->ik", weights, g, g)
    sums = idx[:, None, :] + idx[None, :, :]
    for i in range(len(idx)):
        for j in range(len(idx)):
            key = (int(sums[i, j, 0]), int(sums[i, j, 1]))
            coeffs[key] = coeffs.get(key, 0) + quad[i, j]
    return coeffs


def J2_directional(A: MagneticPotential, direction: PrimitiveDirection, k: int,
                   a0_dot_d0: float, n_sigma: int = DEFAULT_GRID,
                   line_nodes: int = DEFAULT_LINE_NODES) -> complex:
    """Amplitude part of ``J(d)`` for signed ``d = k d0``.

    Expanding ``int_0^1 b(x + s d, x) ds`` in Fourier modes of ``x``, only
    modes on the ray of ``delta`` survive integration against the phase,
    which depends on ``delta . x`` alone.
    """
    lat = A.lattice
    pair = dual_pair(lat, direction)
    d = k * direction.d0
    nodes, weights = gauss_legendre_unit(line_nodes)
    coeffs = _amplitude_line_coefficients(A, d, nodes, weights)
    sigma = periodic_grid(n_sigma)
    f = _ray_phase(A, direction, k, sigma)
    total = 0j
    for key, c in coeffs.items():
        q, qp = pair.ray_coordinates(key)
        if qp != 0 or c == 0:
            continue
        total += c * np.mean(np.exp(1j * TWO_PI * q * sigma) * f)
    return complex(lat.delta_area * np.exp(1j * k * a0_dot_d0) * total)


def J2_sum(A: MagneticPotential, direction: PrimitiveDirection, k: int, a0_dot_d0: float,
           n_sigma: int = DEFAULT_GRID, line_nodes: int = DEFAULT_LINE_NODES) -> complex:
    """``J2(d) + J2(-d)`` for ``d = k d0``."""
    return (J2_directional(A, direction, k, a0_dot_d0, n_sigma, line_nodes)
            + J2_directional(A, direction, -k, a0_dot_d0, n_sigma, line_nodes))


# ----------------------------------------------------------------------
# invariant table


@dataclass(frozen=True)
class InvariantEntry:
    I_sum: float
    J_sum: float
    c0: float
    J2_sum: float = 0.0
    flagged: bool = False


@dataclass
class InvariantTable:
    entries: dict[tuple[tuple[int, int], int], InvariantEntry] = field(default_factory=dict)
    kmax: dict[tuple[int, int], int] = field(default_factory=dict)
    grid: int = DEFAULT_GRID
    line_nodes: int = DEFAULT_LINE_NODES
    spot_checks: list[dict] = field(default_factory=list)

    def directions(self) -> list[tuple[int, int]]:
        return list(self.kmax)

    def I_values(self, key: tuple[int, int]) -> dict[int, float]:
        return {k: self.entries[(key, k)].I_sum for k in range(1, self.kmax[key] + 1)}

    def J_values(self, key: tuple[int, int]) -> dict[int, float]:
        return {k: self.entries[(key, k)].J_sum for k in range(1, self.kmax[key] + 1)}

    def __len__(self):
        return len(self.entries)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("TSI_THREADS", "1")))
    except ValueError:
        return 1


def direction_invariants(A: MagneticPotential, V: ScalarField, direction: PrimitiveDirection,
                         kmax: int, grid: int = DEFAULT_GRID,
                         line_nodes: int = DEFAULT_LINE_NODES,
                         imag_tol: float = 1e-9) -> dict[int, InvariantEntry]:
    B = A.source
    dd = directional(B, direction)
    vd = directional(V, direction)
    cov = build_change_of_variables(dd, grid)
    c0 = A.lattice.delta_area
    a0d0 = float(A.a0 @ direction.d0)
    out = {}
    for k in range(1, kmax + 1):
        i_sum = I_invariant_directional(dd, cov, k, a0d0, c0)
        j1 = J1_invariant_directional(vd, cov, k, a0d0, c0)
        j2 = J2_sum(A, direction, k, a0d0, grid, line_nodes)
        if abs(j2.imag) > imag_tol * max(1.0, abs(j2)):
            raise ValueError(f"J2 sum not real on {direction}, k={k}: {j2}")
        flagged = abs(math.cos(k * a0d0)) < COSINE_FLOOR
        out[k] = InvariantEntry(i_sum, j1 + j2.real, c0, j2.real, flagged)
    return out


def build_invariant_table(A: MagneticPotential, V: ScalarField, lat: Lattice, directions,
                          kmax: int, grid: int = DEFAULT_GRID,
                          line_nodes: int = DEFAULT_LINE_NODES,
                          spot_checks=(), raw_resolution: int = DEFAULT_RAW_RESOLUTION,
                          spot_tol: float = 1e-7) -> InvariantTable:
    """Directional-formula table for every direction and ``1 <= k <= kmax``.

    ``spot_checks`` lists ``(direction key, k)`` pairs re-evaluated by raw
    quadrature; disagreement beyond ``spot_tol * c0`` raises.
    """
    if abs(V.mean) > 1e-12:
        raise NonzeroMeanPotential(f"V has mean {V.mean!r}", field="V")
    dirs = [d if isinstance(d, PrimitiveDirection) else make_direction(lat, *d)
            for d in directions]
    table = InvariantTable(grid=grid, line_nodes=line_nodes)
    work = lambda dr: direction_invariants(A, V, dr, kmax, grid, line_nodes)
    nthreads = min(_threads(), max(1, len(dirs)))
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            results = list(pool.map(work, dirs))
    else:
        results = [work(dr) for dr in dirs]
    for dr, res in zip(dirs, results):
        table.kmax[dr.key] = kmax
        for k, entry in res.items():
            table.entries[(dr.key, k)] = entry
    for key, k in spot_checks:
        dr = make_direction(lat, *key)
        m, n = k * dr.m0, k * dr.n0
        raw = (I_invariant_raw(A, lat, (m, n), raw_resolution)
               + I_invariant_raw(A, lat, (-m, -n), raw_resolution))
        fast = table.entries[(dr.key, k)].I_sum
        err = abs(raw - fast)
        table.spot_checks.append({"direction": list(key), "k": k, "raw": raw.real,
                                  "directional": fast, "error": err})
        if err > spot_tol * lat.delta_area:
            raise ValueError(f"raw/directional mismatch {err:.3e} on {key}, k={k}")
    return table
