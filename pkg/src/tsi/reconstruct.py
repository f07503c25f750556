"""Inverse engine: fields from invariants, and the extended gauge class from invariants plus B.

Recovering ``B`` works ray by ray.  The cosine moments of ``s'(y)`` are
``I_sum / (2 c0 cos(k a0.d0))``; the constant term is 1 because
``s(y + 1) = s(y) + 1`` forces ``int_0^1 s'(y) dy = 1``.  Integrating
``s'`` and inverting gives ``y(s)``, hence ``A1_delta`` and ``B_delta``.

``V`` follows the same pattern with ``W(y) = V_delta(s(y)) s'(y)``, whose
constant term vanishes because ``V`` has zero mean.  The amplitude part of
``J`` is computed forward from the recovered potential and subtracted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ClampViolation,
    GenericityFailure,
    HypothesisViolation,
    IllConditioned,
    IncompleteCoverage,
    NonMonotone,
    NonPositive,
)
from .fields import (
    DirectionalData,
    ScalarField,
    check_cosine_condition,
    check_field_condition,
    directional,
    field_difference,
    flux,
    make_potential,
)
from .invariants import (
    COSINE_FLOOR,
    DEFAULT_GRID,
    DEFAULT_LINE_NODES,
    InvariantTable,
    J2_sum,
    build_change_of_variables,
    build_invariant_table,
)
from .lattice import (
    Lattice,
    PrimitiveDirection,
    lattice_points,
    make_direction,
    primitive_directions,
    validate_length_condition,
)
from .numerics import chebyshev_t, invert_monotone, periodic_grid

TWO_PI = 2.0 * math.pi
A1_FLOOR = 1e-6


def default_kmax(cutoff: int) -> int:
    return max(16, 4 * cutoff)


# ----------------------------------------------------------------------
# cosine data


@dataclass
class CosineData:
    """``cos(k a0.d0)`` keyed by ``((m0, n0), k)``."""

    values: dict[tuple[tuple[int, int], int], float]
    floor: float = COSINE_FLOOR

    def __post_init__(self):
        for key, v in self.values.items():
            if not -1.0 - 1e-12 <= v <= 1.0 + 1e-12:
                raise ValueError(f"cosine {key} = {v} outside [-1, 1]")

    @classmethod
    def from_a0(cls, a0, lat: Lattice, directions, kmax: int, floor: float = COSINE_FLOOR):
        a0 = np.asarray(a0, dtype=float)
        vals = {}
        for key in directions:
            a = float(a0 @ lat.vector(*key))
            for k in range(1, kmax + 1):
                vals[(tuple(key), k)] = math.cos(k * a)
        return cls(vals, floor)

    @classmethod
    def from_first(cls, first: dict[tuple[int, int], float], kmax: int,
                   floor: float = COSINE_FLOOR):
        """Extend ``cos(a0.d0)`` per direction to all ``k`` by Chebyshev polynomials."""
        vals = {}
        for key, c in first.items():
            for k in range(1, kmax + 1):
                vals[(tuple(key), k)] = float(chebyshev_t(k, c))
        return cls(vals, floor)

    def for_direction(self, key) -> dict[int, float]:
        key = tuple(key)
        return {k: v for (d, k), v in self.values.items() if d == key}

    def chebyshev_defect(self) -> float:
        """Largest ``|cos(k a) - T_k(cos a)|`` over the stored entries."""
        worst = 0.0
        for (d, k), v in self.values.items():
            first = self.values.get((d, 1))
            if first is None:
                continue
            worst = max(worst, abs(v - float(chebyshev_t(k, first))))
        return worst


# ----------------------------------------------------------------------
# s'(y) and directional fields


@dataclass(frozen=True)
class CosineSeries:
    """``const + sum_k 2 c_k cos(2 pi k y)``; ``coeffs[k-1] = c_k``."""

    coeffs: np.ndarray
    const: float = 1.0

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        ks = np.arange(1, len(self.coeffs) + 1)
        return self.const + np.cos(TWO_PI * y[..., None] * ks) @ (2 * self.coeffs)

    def periodic_integral(self, y):
        """Antiderivative of the oscillating part, ``sum_k c_k sin(2 pi k y) / (pi k)``."""
        y = np.asarray(y, dtype=float)
        ks = np.arange(1, len(self.coeffs) + 1)
        return np.sin(TWO_PI * y[..., None] * ks) @ (self.coeffs / (math.pi * ks))

    def integral_bound(self) -> float:
        ks = np.arange(1, len(self.coeffs) + 1)
        return float(np.sum(np.abs(self.coeffs) / (math.pi * ks)))


def _checked_cosines(cosines: dict[int, float], kmax: int, floor: float, label: str):
    out = np.empty(kmax)
    for k in range(1, kmax + 1):
        if k not in cosines:
            raise IllConditioned(f"missing cosine for direction {label}, k={k}", field="cosines")
        c = cosines[k]
        if abs(c) < floor:
            raise IllConditioned(
                f"|cos(k a0.d0)| = {abs(c):.3e} below floor {floor:g} "
                f"on direction {label}, k={k}", field="cosines")
        out[k - 1] = c
    return out


def recover_sprime(I_values: dict[int, float], cosines: dict[int, float], c0: float,
                   kmax: int, floor: float = COSINE_FLOOR, label: str = "?",
                   check_grid: int = 4096) -> CosineSeries:
    cos_arr = _checked_cosines(cosines, kmax, floor, label)
    coeffs = np.array([I_values[k] for k in range(1, kmax + 1)]) / (2 * c0 * cos_arr)
    series = CosineSeries(coeffs, 1.0)
    low = float(series(periodic_grid(check_grid)).min())
    if low <= 0:
        raise NonPositive(f"recovered s'(y) reaches {low:.3e} on direction {label}; "
                          "the invariant data are inconsistent")
    return series


def _invert_sprime(sprime: CosineSeries, s: np.ndarray) -> np.ndarray:
    """``y(s)`` solving ``y + e(y) = s`` where ``e`` integrates ``s' - 1``."""
    m = sprime.integral_bound() + 1e-12
    f = lambda y: y + sprime.periodic_integral(y)
    return invert_monotone(f, sprime, s, s - m, s + m, tol=1e-13)


def _ray_fourier(values: np.ndarray, pmax: int) -> dict[int, float]:
    n = len(values)
    spec = np.fft.fft(values) / n
    out = {}
    for p in range(1, pmax + 1):
        c = 0.5 * (spec[p].real + spec[-p].real)
        out[p] = float(c)
        out[-p] = float(c)
    return dict(sorted(out.items()))


def recover_directional_field(sprime: CosineSeries, b0: float, direction: PrimitiveDirection,
                              n: int = DEFAULT_GRID, pmax: int | None = None) -> DirectionalData:
    if pmax is None:
        pmax = n // 4
    s = periodic_grid(n)
    y = _invert_sprime(sprime, s)
    density = sprime(y)
    if density.min() <= 0:
        raise NonMonotone(f"s'(y) not positive on direction {direction}")
    b_dir = b0 * (1.0 / density - 1.0)
    return DirectionalData(direction, _ray_fourier(b_dir, pmax), b0)


def required_directions(cutoff: int) -> list[tuple[int, int]]:
    return primitive_directions(cutoff)


def assemble_field(rays: dict[tuple[int, int], DirectionalData], lat: Lattice, cutoff: int,
                   mean: float) -> ScalarField:
    missing = [key for key in required_directions(cutoff) if key not in rays]
    if missing:
        raise IncompleteCoverage(f"no data for primitive directions {missing}",
                                 field="directions")
    table: dict[tuple[int, int], float] = {}
    if mean != 0.0:
        table[(0, 0)] = mean
    for key, dd in rays.items():
        dr = make_direction(lat, *key)
        for p, c in dd.ray_coeffs.items():
            if p == 0:
                continue
            idx = dr.ray_index(p)
            if max(abs(idx[0]), abs(idx[1])) > cutoff:
                continue
            if idx in table:
                raise AssertionError(f"dual index {idx} claimed twice")
            table[idx] = c
    return ScalarField(lat, dict(sorted(table.items())))


def assemble_B(rays: dict[tuple[int, int], DirectionalData], lat: Lattice,
               cutoff: int) -> ScalarField:
    return assemble_field(rays, lat, cutoff, TWO_PI / lat.delta_area)


# ----------------------------------------------------------------------
# field and gauge-class pipelines


@dataclass
class DirectionDiagnostics:
    max_inv_cos: float
    min_sprime: float
    tail: float
    min_sprime_bound: float


def recover_B(table: InvariantTable, cosines: CosineData, lat: Lattice, cutoff: int,
              kmax: int | None = None, grid: int = DEFAULT_GRID):
    """Field ``B`` (flux-normalised) plus per-direction diagnostics."""
    kmax = kmax or min(table.kmax.values(), default=0)
    b0 = TWO_PI / lat.delta_area
    c0 = lat.delta_area
    rays, diags, series = {}, {}, {}
    for key in required_directions(cutoff):
        if key not in table.kmax:
            raise IncompleteCoverage(f"table lacks direction {key}", field="table")
        dr = make_direction(lat, *key)
        cos_k = cosines.for_direction(key)
        sp = recover_sprime(table.I_values(key), cos_k, c0, kmax, cosines.floor, str(dr))
        dd = recover_directional_field(sp, b0, dr, grid)
        rays[key] = dd
        series[key] = sp
        vals = sp(periodic_grid(grid))
        bound = 1.0 / (1.0 + dd.sup_norm() / abs(b0))
        diags[key] = DirectionDiagnostics(
            max_inv_cos=float(max(1.0 / abs(cos_k[k]) for k in range(1, kmax + 1))),
            min_sprime=float(vals.min()),
            tail=float(abs(sp.coeffs[-1])),
            min_sprime_bound=bound,
        )
    return assemble_B(rays, lat, cutoff), diags, series


def recover_V(table: InvariantTable, cosines: CosineData, B: ScalarField, lat: Lattice,
              cutoff: int, kmax: int | None = None, grid: int = DEFAULT_GRID,
              line_nodes: int = DEFAULT_LINE_NODES) -> ScalarField:
    """Zero-mean ``V`` from ``J`` sums, the recovered ``B`` and the cosines."""
    kmax = kmax or min(table.kmax.values(), default=0)
    c0 = lat.delta_area
    A = make_potential(B, (0.0, 0.0))
    rays = {}
    for key in required_directions(cutoff):
        dr = make_direction(lat, *key)
        cos_k = cosines.for_direction(key)
        cos_arr = _checked_cosines(cos_k, kmax, cosines.floor, str(dr))
        # any angle with the given cosine realises the same amplitude sums
        angle = math.acos(max(-1.0, min(1.0, cos_k[1])))
        w = np.empty(kmax)
        for k in range(1, kmax + 1):
            j2 = J2_sum(A, dr, k, angle, grid, line_nodes).real
            w[k - 1] = (table.entries[(key, k)].J_sum - j2) / (2 * c0 * cos_arr[k - 1])
        W = CosineSeries(w, 0.0)
        dd = directional(B, dr)
        s = periodic_grid(grid)
        v_dir = W(s + dd.potential(s)) * (1.0 + dd.potential_derivative(s))
        rays[key] = DirectionalData(dr, _ray_fourier(v_dir, grid // 4), B.mean)
    return assemble_field(rays, lat, cutoff, 0.0)


@dataclass
class GaugeClass:
    """Extended gauge class: ``cos(a0.d)`` for every lattice vector ``d``.

    ``basis`` holds the two primitive directions used; ``alphas`` the
    principal angles ``arccos(cos(a0.d_j))``.  ``relative_sign`` fixes the
    choice between ``(alpha_1, alpha_2)`` and ``(alpha_1, -alpha_2)``; when no
    further direction carries information it stays ``+1`` and
    ``sign_resolved`` is False.
    """

    basis: tuple[tuple[int, int], tuple[int, int]]
    cosines: tuple[float, float]
    alphas: tuple[float, float]
    relative_sign: int
    sign_resolved: bool
    lattice: Lattice
    first_coefficients: dict[tuple[int, int], float] = field(default_factory=dict)

    def coordinates(self, m: int, n: int) -> tuple[int, int]:
        (m1, n1), (m2, n2) = self.basis
        det = m1 * n2 - m2 * n1
        a = (m * n2 - n * m2) // det
        b = (n * m1 - m * n1) // det
        return a, b

    def cos(self, m: int, n: int) -> float:
        a, b = self.coordinates(m, n)
        c1, c2 = self.cosines
        z1 = complex(c1, math.sqrt(max(0.0, 1 - c1 * c1)))
        z2 = complex(c2, self.relative_sign * math.sqrt(max(0.0, 1 - c2 * c2)))
        return float((z1 ** a * z2 ** b).real)

    def table(self, radius: float) -> dict[tuple[int, int], float]:
        coords, _, _ = lattice_points(self.lattice, radius)
        return {(int(m), int(n)): self.cos(int(m), int(n)) for m, n in coords}

    def cosine_data(self, directions, kmax: int, floor: float = COSINE_FLOOR) -> CosineData:
        return CosineData.from_first({tuple(k): self.cos(*k) for k in directions}, kmax, floor)


def _first_moment(B: ScalarField, dr: PrimitiveDirection, grid: int):
    dd = directional(B, dr)
    if dd.is_trivial:
        return dd, None
    return dd, build_change_of_variables(dd, grid).cosine_moment(1)


def recover_gauge_class(table: InvariantTable, B: ScalarField, lat: Lattice,
                        grid: int = DEFAULT_GRID, a1_floor: float = A1_FLOOR,
                        clamp_tol: float = 1e-6) -> GaugeClass:
    c0 = lat.delta_area
    generic: dict[tuple[int, int], tuple[float, float]] = {}
    for key in table.directions():
        dr = make_direction(lat, *key)
        dd, a1 = _first_moment(B, dr, grid)
        if a1 is None or abs(a1) < a1_floor:
            continue
        c = table.entries[(key, 1)].I_sum / (2 * c0 * a1)
        if abs(c) > 1 + clamp_tol:
            raise ClampViolation(f"cos(a0.d0) = {c:.9f} on {key} outside [-1, 1]",
                                 field="table")
        generic[key] = (max(-1.0, min(1.0, c)), a1)
    keys = sorted(generic, key=lambda k: float(np.linalg.norm(lat.vector(*k))))
    basis = None
    for i, k1 in enumerate(keys):
        for k2 in keys[i + 1:]:
            if abs(k1[0] * k2[1] - k1[1] * k2[0]) == 1:
                basis = (k1, k2)
                break
        if basis:
            break
    if basis is None:
        raise GenericityFailure(
            "no pair of directions forming a lattice basis has a nonvanishing directional "
            f"field with first cosine moment >= {a1_floor:g} (generic: {sorted(generic)})",
            field="B")
    c1, c2 = generic[basis[0]][0], generic[basis[1]][0]
    gc = GaugeClass(basis, (c1, c2), (math.acos(c1), math.acos(c2)), 1, False, lat,
                    {k: v[1] for k, v in generic.items()})
    # a third direction m d1 + n d2 with m n != 0 separates (a1, a2) from (a1, -a2)
    best, best_gap = None, 1e-6
    for key in keys:
        if key in basis:
            continue
        a, b = gc.coordinates(*key)
        if a == 0 or b == 0:
            continue
        plus = math.cos(a * gc.alphas[0] + b * gc.alphas[1])
        minus = math.cos(a * gc.alphas[0] - b * gc.alphas[1])
        gap = abs(plus - minus)
        if gap > best_gap:
            target = generic[key][0]
            best, best_gap = (1 if abs(plus - target) <= abs(minus - target) else -1), gap
    if best is not None:
        gc.relative_sign = best
        gc.sign_resolved = True
    elif abs(math.sin(gc.alphas[0]) * math.sin(gc.alphas[1])) < 1e-12:
        gc.sign_resolved = True
    return gc


# ----------------------------------------------------------------------
# round trip


@dataclass
class RoundtripConfig:
    kmax: int | None = None
    grid: int = DEFAULT_GRID
    forward_grid: int | None = None
    cutoff: int | None = None
    line_nodes: int = DEFAULT_LINE_NODES
    mode: str = "given"  # or "gauge"
    length_radius: float = 5.0
    cosine_radius: float = 6.0
    cosine_floor: float = COSINE_FLOOR
    tol_B: float = 1e-6
    tol_V: float = 1e-4
    spot_checks: int = 2
    validate: bool = True


@dataclass
class ReconstructionReport:
    B: ScalarField
    V: ScalarField
    diagnostics: dict[tuple[int, int], DirectionDiagnostics]
    errors: dict[str, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    gauge: GaugeClass | None = None
    table: InvariantTable | None = None

    @property
    def ok(self) -> bool:
        return not any(f.startswith("tolerance") for f in self.flags)


def validate_hypotheses(B: ScalarField, V: ScalarField, a0, config: RoundtripConfig) -> list[str]:
    """Human-readable list of violated reconstruction hypotheses (empty when all hold)."""
    lat = B.lattice
    problems = []
    pairs = validate_length_condition(lat, config.length_radius)
    if pairs:
        problems.append(f"equal-length lattice vectors within radius {config.length_radius}: {pairs}")
    fl = flux(B)
    if abs(fl - TWO_PI) > 1e-9:
        problems.append(f"flux {fl:.12f} differs from 2 pi")
    margin = check_field_condition(B)
    if margin <= 0:
        problems.append(f"field condition violated, margin {margin:.6g}")
    bad = check_cosine_condition(a0, lat, config.cosine_radius, config.cosine_floor)
    if bad:
        problems.append(f"cos(a0.d) near zero for d = {bad}")
    if abs(V.mean) > 1e-12:
        problems.append(f"V has nonzero mean {V.mean}")
    return problems


def grid_sup_error(a: ScalarField, b: ScalarField, n: int = 64) -> float:
    return float(np.abs(a.on_cell_grid(n) - b.on_cell_grid(n)).max())


def roundtrip(B: ScalarField, V: ScalarField, a0, config: RoundtripConfig | None = None,
              table: InvariantTable | None = None) -> ReconstructionReport:
    """Forward invariants, then recovery of ``B`` and ``V``, with an error report."""
    config = config or RoundtripConfig()
    lat = B.lattice
    if config.validate:
        problems = validate_hypotheses(B, V, a0, config)
        if problems:
            raise HypothesisViolation("; ".join(problems))
    cutoff = config.cutoff or max(B.cutoff, V.cutoff, 1)
    kmax = config.kmax or default_kmax(cutoff)
    directions = required_directions(cutoff)
    A = make_potential(B, a0)
    fgrid = config.forward_grid or config.grid
    if table is None:
        spots = [(directions[i], 1) for i in range(min(config.spot_checks, len(directions)))]
        table = build_invariant_table(A, V, lat, directions, kmax, fgrid, config.line_nodes,
                                      spot_checks=spots)
    gauge = None
    if config.mode == "gauge":
        gauge = recover_gauge_class(table, B, lat, config.grid)
        cosines = gauge.cosine_data(directions, kmax, config.cosine_floor)
    elif config.mode == "given":
        cosines = CosineData.from_a0(a0, lat, directions, kmax, config.cosine_floor)
    else:
        raise ValueError(f"unknown mode {config.mode!r}")
    B_rec, diags, _ = recover_B(table, cosines, lat, cutoff, kmax, config.grid)
    V_rec = recover_V(table, cosines, B_rec, lat, cutoff, kmax, config.grid, config.line_nodes)
    report = ReconstructionReport(B_rec, V_rec, diags, gauge=gauge, table=table)
    b_rel, b_abs = field_difference(B_rec, B)
    v_rel, v_abs = field_difference(V_rec, V)
    report.errors = {
        "B_rel_l2": b_rel, "B_max_abs": b_abs, "B_sup_grid": grid_sup_error(B_rec, B),
        "V_rel_l2": v_rel, "V_max_abs": v_abs, "V_sup_grid": grid_sup_error(V_rec, V),
    }
    for key, dg in diags.items():
        if dg.min_sprime < dg.min_sprime_bound - 1e-6:
            report.flags.append(f"monotonicity bound violated on {key}")
    if b_rel > config.tol_B:
        report.flags.append(f"tolerance: B error {b_rel:.3e} > {config.tol_B:g}")
    if v_rel > config.tol_V:
        report.flags.append(f"tolerance: V error {v_rel:.3e} > {config.tol_V:g}")
    if fgrid < config.grid and report.flags:
        report.flags.append(
            f"quadrature-limited: invariants computed on {fgrid} points, inversion on {config.grid}")
    if gauge is not None and not gauge.sign_resolved:
        report.flags.append("gauge: relative sign of basis angles not determined by I data")
    return report
