"""Problem files, result serialisation and CSV emission.

Coefficients are stored as integer-indexed triples ``[p, q, value]`` so ray
membership survives a round trip through text exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import SpecParseError
from .fields import ScalarField, make_field
from .invariants import COSINE_FLOOR, DEFAULT_GRID, DEFAULT_LINE_NODES, InvariantEntry, InvariantTable
from .lattice import Lattice, make_lattice
from .reconstruct import CosineData, RoundtripConfig

Triple = tuple[int, int, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LatticeSpec(_Strict):
    e1: tuple[float, float]
    e2: tuple[float, float]


class FieldSpec(_Strict):
    coefficients: list[Triple] = Field(default_factory=list)
    units: Literal["absolute", "b0"] = "absolute"


class SpectrumSpec(_Strict):
    n: int = Field(64, ge=16)
    n_lowest: int = Field(10, ge=1)


class TraceSpec(_Strict):
    t_min: float = 0.0
    t_max: float = 3.0
    samples: int = Field(301, ge=2)
    width: float | None = None


class SolverConfig(_Strict):
    kmax: int | None = Field(None, ge=1)
    grid: int = Field(DEFAULT_GRID, ge=16)
    forward_grid: int | None = Field(None, ge=16)
    cutoff: int | None = Field(None, ge=1)
    line_nodes: int = Field(DEFAULT_LINE_NODES, ge=4)
    mode: Literal["given", "gauge"] = "given"
    length_radius: float = Field(5.0, gt=0)
    cosine_radius: float = Field(6.0, gt=0)
    cosine_floor: float = Field(COSINE_FLOOR, gt=0)
    tol_B: float = Field(1e-6, gt=0)
    tol_V: float = Field(1e-4, gt=0)
    spot_checks: int = Field(2, ge=0)
    gauge_radius: float = Field(4.0, gt=0)
    spectrum: SpectrumSpec = Field(default_factory=SpectrumSpec)
    trace: TraceSpec = Field(default_factory=TraceSpec)


class ProblemSpec(_Strict):
    """Everything needed to run any command on one problem."""

    lattice: LatticeSpec
    B: FieldSpec = Field(default_factory=FieldSpec)
    V: FieldSpec = Field(default_factory=FieldSpec)
    a0: tuple[float, float] | None = None
    config: SolverConfig = Field(default_factory=SolverConfig)

    @field_validator("a0")
    @classmethod
    def _finite(cls, v):
        if v is not None and not all(math.isfinite(c) for c in v):
            raise ValueError("a0 must be finite")
        return v

    def build_lattice(self) -> Lattice:
        return make_lattice(self.lattice.e1, self.lattice.e2)

    def build_B(self, lat: Lattice | None = None) -> ScalarField:
        """Field with mean ``2 pi / area`` unless given; ``units='b0'`` scales by ``2 pi / area``."""
        lat = lat or self.build_lattice()
        scale = 2 * math.pi / lat.delta_area if self.B.units == "b0" else 1.0
        coeffs = [(p, q, v * scale) for p, q, v in self.B.coefficients]
        # an explicit mean is kept so that flux validation can reject it
        has_mean = any((p, q) == (0, 0) for p, q, _ in self.B.coefficients)
        return make_field(lat, coeffs, normalize_flux=not has_mean)

    def build_V(self, lat: Lattice | None = None) -> ScalarField:
        lat = lat or self.build_lattice()
        scale = 2 * math.pi / lat.delta_area if self.V.units == "b0" else 1.0
        return make_field(lat, [(p, q, v * scale) for p, q, v in self.V.coefficients])

    def roundtrip_config(self) -> RoundtripConfig:
        c = self.config
        return RoundtripConfig(
            kmax=c.kmax, grid=c.grid, forward_grid=c.forward_grid, cutoff=c.cutoff,
            line_nodes=c.line_nodes, mode=c.mode, length_radius=c.length_radius,
            cosine_radius=c.cosine_radius, cosine_floor=c.cosine_floor, tol_B=c.tol_B,
            tol_V=c.tol_V, spot_checks=c.spot_checks,
        )


def _format_validation(exc: ValidationError) -> tuple[str, str]:
    err = exc.errors()[0]
    loc = ".".join(str(p) for p in err["loc"])
    return f"{err['msg']} (at {loc or '<root>'})", loc


def parse_spec(text: str, source: str = "<string>") -> ProblemSpec:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}",
                             field=f"line {exc.lineno}") from exc
    try:
        return ProblemSpec.model_validate(raw)
    except ValidationError as exc:
        msg, loc = _format_validation(exc)
        raise SpecParseError(f"{source}: {msg}", field=loc) from exc


def load_spec(path) -> ProblemSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecParseError(f"cannot read {path}: {exc.strerror}", field="spec") from exc
    return parse_spec(text, str(path))


def dump_spec(spec: ProblemSpec) -> str:
    return spec.model_dump_json(indent=2)


# ----------------------------------------------------------------------
# structured results


def field_to_triples(f: ScalarField) -> list[list]:
    return [[p, q, float(v)] for (p, q), v in sorted(f.coeffs.items())]


def field_from_triples(lat: Lattice, triples) -> ScalarField:
    return make_field(lat, [(int(p), int(q), float(v)) for p, q, v in triples])


def table_to_json(table: InvariantTable) -> dict:
    entries = []
    for (key, k), e in sorted(table.entries.items()):
        entries.append({"direction": list(key), "k": k, "I_sum": e.I_sum, "J_sum": e.J_sum,
                        "c0": e.c0, "J2_sum": e.J2_sum, "flagged": e.flagged})
    return {
        "grid": table.grid,
        "line_nodes": table.line_nodes,
        "kmax": [[m, n, km] for (m, n), km in sorted(table.kmax.items())],
        "entries": entries,
        "spot_checks": table.spot_checks,
    }


def table_from_json(data: dict) -> InvariantTable:
    try:
        table = InvariantTable(grid=int(data.get("grid", DEFAULT_GRID)),
                               line_nodes=int(data.get("line_nodes", DEFAULT_LINE_NODES)))
        for m, n, km in data["kmax"]:
            table.kmax[(int(m), int(n))] = int(km)
        for e in data["entries"]:
            key = tuple(int(v) for v in e["direction"])
            table.entries[(key, int(e["k"]))] = InvariantEntry(
                float(e["I_sum"]), float(e["J_sum"]), float(e["c0"]),
                float(e.get("J2_sum", 0.0)), bool(e.get("flagged", False)))
        table.spot_checks = list(data.get("spot_checks", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecParseError(f"malformed invariant table: {exc!r}", field="table") from exc
    return table


def cosines_to_json(cos: CosineData) -> dict:
    return {"floor": cos.floor,
            "values": [[m, n, k, v] for ((m, n), k), v in sorted(cos.values.items())]}


def cosines_from_json(data: dict) -> CosineData:
    try:
        vals = {((int(m), int(n)), int(k)): float(v) for m, n, k, v in data["values"]}
        return CosineData(vals, float(data.get("floor", COSINE_FLOOR)))
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecParseError(f"malformed cosine file: {exc!r}", field="cosines") from exc


def read_json(path, what: str) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise SpecParseError(f"cannot read {path}: {exc.strerror}", field=what) from exc
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"{path}: line {exc.lineno}: {exc.msg}", field=what) from exc


def _clean(obj):
    """Make numpy scalars, tuples and non-finite floats JSON-safe."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def to_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True)


def write_json(path, obj) -> None:
    Path(path).write_text(to_json(obj) + "\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def field_grid_rows(f: ScalarField, n: int):
    """Rows ``(t1, t2, x, y, value)`` on the ``n x n`` parameter grid."""
    vals = f.on_cell_grid(n)
    t = np.arange(n) / n
    for i in range(n):
        for j in range(n):
            x = f.lattice.point(t[i], t[j])
            yield (t[i], t[j], x[0], x[1], vals[i, j])
