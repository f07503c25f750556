"""Command-line entry point: ``tsi <command> --spec problem.json [--out DIR]``.

Every command prints a JSON summary on stdout.  With ``--out`` the full
results are also written there (JSON for tables, CSV for sampled curves).
Failures print ``{"error": {"code", "message", "field"}}`` on stderr and
exit with 1 (validation), 2 (numerical) or 3 (input/parse).
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import SpecParseError, TSIError
from .fields import check_cosine_condition, check_field_condition, directional, flux, make_potential
from .invariants import build_change_of_variables, build_invariant_table
from .lattice import make_direction, validate_length_condition
from .numerics import periodic_grid
from .reconstruct import (
    CosineData,
    default_kmax,
    recover_B,
    recover_gauge_class,
    recover_V,
    required_directions,
    roundtrip,
)
from .spectral_oracle import (
    assemble,
    eigenvalues,
    local_maxima,
    smoothed_wave_trace,
    trace_width_floor,
)

TWO_PI = 2.0 * math.pi


def parse_directions(text: str) -> list[tuple[int, int]]:
    """``"1,0;0,1"`` (or whitespace separated) to ``[(1, 0), (0, 1)]``."""
    out = []
    for tok in re.split(r"[;\s]+", text.strip()):
        if not tok:
            continue
        parts = tok.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            out.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise SpecParseError(f"bad direction {tok!r}; expected m,n", field="--directions")
    if not out:
        raise SpecParseError("no directions given", field="--directions")
    return out


def _apply_overrides(spec: io.ProblemSpec, args) -> io.ProblemSpec:
    cfg = spec.config
    upd = {}
    if args.kmax is not None:
        upd["kmax"] = args.kmax
    if args.grid is not None:
        upd["grid"] = args.grid
    if args.cutoff is not None:
        upd["cutoff"] = args.cutoff
    if args.tol is not None:
        upd["tol_B"] = args.tol
        upd["tol_V"] = args.tol
    if upd:
        try:
            cfg = io.SolverConfig.model_validate({**cfg.model_dump(), **upd})
        except io.ValidationError as exc:
            raise SpecParseError(f"bad command-line override: {exc.errors()[0]['msg']}",
                                 field=".".join(map(str, exc.errors()[0]["loc"]))) from exc
        spec = spec.model_copy(update={"config": cfg})
    return spec


def _outdir(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SpecParseError(f"cannot create {out}: {exc.strerror}", field="--out") from exc
    return out


def _context(spec: io.ProblemSpec):
    lat = spec.build_lattice()
    B = spec.build_B(lat)
    V = spec.build_V(lat)
    return lat, B, V


def _cutoff(spec, B, V) -> int:
    return spec.config.cutoff or max(B.cutoff, V.cutoff, 1)


def _kmax(spec, cutoff) -> int:
    return spec.config.kmax or default_kmax(cutoff)


def _write_sprime(path: Path, B, directions, grid: int) -> None:
    lat = B.lattice
    y = periodic_grid(grid)
    cols, header = [y], ["y"]
    for key in directions:
        cov = build_change_of_variables(directional(B, make_direction(lat, *key)), grid)
        cols.append(cov.sprime)
        header.append(f"sprime_{key[0]}_{key[1]}")
    io.write_csv(path, header, zip(*cols))


def _write_field_csv(path: Path, f, n: int = 64) -> None:
    io.write_csv(path, ["t1", "t2", "x", "y", "value"], io.field_grid_rows(f, n))


# ----------------------------------------------------------------------
# commands


def cmd_validate(spec: io.ProblemSpec, args) -> tuple[dict, int]:
    lat, B, V = _context(spec)
    cfg = spec.config
    pairs = validate_length_condition(lat, cfg.length_radius)
    fl = flux(B)
    margin = check_field_condition(B)
    checks = {
        "length_condition": {"pass": not pairs, "radius": cfg.length_radius,
                             "pairs": [[list(a), list(b)] for a, b in pairs]},
        "flux": {"pass": abs(fl - TWO_PI) <= 1e-9, "value": fl, "expected": TWO_PI},
        "field_condition": {"pass": margin > 0, "margin": margin,
                            "relative_margin": margin / abs(B.mean)},
        "potential_mean": {"pass": abs(V.mean) <= 1e-12, "value": V.mean},
    }
    if spec.a0 is not None:
        bad = check_cosine_condition(spec.a0, lat, cfg.cosine_radius, cfg.cosine_floor)
        checks["cosine_condition"] = {"pass": not bad, "radius": cfg.cosine_radius,
                                      "floor": cfg.cosine_floor,
                                      "violations": [list(d) for d in bad]}
    ok = all(c["pass"] for c in checks.values())
    report = {"command": "validate", "ok": ok, "checks": checks}
    out = _outdir(args)
    if out:
        io.write_json(out / "validation.json", report)
    return report, 0 if ok else 1


def cmd_forward(spec, args) -> tuple[dict, int]:
    lat, B, V = _context(spec)
    cutoff = _cutoff(spec, B, V)
    kmax = _kmax(spec, cutoff)
    directions = (parse_directions(args.directions) if args.directions
                  else required_directions(cutoff))
    cfg = spec.config
    a0 = spec.a0 if spec.a0 is not None else (0.0, 0.0)
    A = make_potential(B, a0)
    spots = [(d, 1) for d in directions[:cfg.spot_checks]]
    table = build_invariant_table(A, V, lat, directions, kmax, cfg.forward_grid or cfg.grid,
                                  cfg.line_nodes, spot_checks=spots)
    out = _outdir(args)
    if out:
        io.write_json(out / "table.json", io.table_to_json(table))
        if spec.a0 is not None:
            io.write_json(out / "cosines.json",
                          io.cosines_to_json(CosineData.from_a0(a0, lat, directions, kmax,
                                                                cfg.cosine_floor)))
        _write_sprime(out / "sprime.csv", B, directions, cfg.grid)
        _write_field_csv(out / "B_grid.csv", B)
    summary = {"command": "forward", "directions": [list(d) for d in directions],
               "kmax": kmax, "entries": len(table),
               "flagged": sum(e.flagged for e in table.entries.values()),
               "spot_checks": table.spot_checks}
    return summary, 0


def _load_table(args):
    if not args.table:
        raise SpecParseError("--table is required", field="--table")
    return io.table_from_json(io.read_json(args.table, "--table"))


def cmd_reconstruct(spec, args) -> tuple[dict, int]:
    lat, B, V = _context(spec)
    table = _load_table(args)
    cutoff = spec.config.cutoff or max(max(abs(m), abs(n)) for m, n in table.directions())
    kmax = spec.config.kmax or min(table.kmax.values())
    directions = required_directions(cutoff)
    gauge = None
    if args.cosines:
        cosines = io.cosines_from_json(io.read_json(args.cosines, "--cosines"))
        source = "file"
    elif spec.a0 is not None and spec.config.mode == "given":
        cosines = CosineData.from_a0(spec.a0, lat, directions, kmax, spec.config.cosine_floor)
        source = "a0"
    else:
        gauge = recover_gauge_class(table, B, lat, spec.config.grid)
        cosines = gauge.cosine_data(directions, kmax, spec.config.cosine_floor)
        source = "gauge-class"
    B_rec, diags, series = recover_B(table, cosines, lat, cutoff, kmax, spec.config.grid)
    V_rec = recover_V(table, cosines, B_rec, lat, cutoff, kmax, spec.config.grid,
                      spec.config.line_nodes)
    result = {
        "command": "reconstruct", "cosine_source": source, "cutoff": cutoff, "kmax": kmax,
        "B": io.field_to_triples(B_rec), "V": io.field_to_triples(V_rec),
        "diagnostics": {f"{k[0]},{k[1]}": vars(d) for k, d in sorted(diags.items())},
    }
    if gauge is not None:
        result["gauge_sign_resolved"] = gauge.sign_resolved
    out = _outdir(args)
    if out:
        io.write_json(out / "reconstruction.json", result)
        _write_field_csv(out / "B_recovered.csv", B_rec)
        _write_field_csv(out / "V_recovered.csv", V_rec)
        y = periodic_grid(spec.config.grid)
        keys = sorted(series)
        io.write_csv(out / "sprime_recovered.csv",
                     ["y"] + [f"sprime_{m}_{n}" for m, n in keys],
                     zip(y, *[series[k](y) for k in keys]))
    return result, 0


def cmd_gauge_class(spec, args) -> tuple[dict, int]:
    lat, B, V = _context(spec)
    table = _load_table(args)
    gc = recover_gauge_class(table, B, lat, spec.config.grid)
    radius = spec.config.gauge_radius
    cos_table = gc.table(radius)
    result = {
        "command": "gauge-class", "basis": [list(b) for b in gc.basis],
        "cosines": list(gc.cosines), "alphas": list(gc.alphas),
        "relative_sign": gc.relative_sign, "sign_resolved": gc.sign_resolved,
        "radius": radius, "table": [[m, n, c] for (m, n), c in sorted(cos_table.items())],
    }
    if spec.a0 is not None:
        a0 = np.asarray(spec.a0)
        result["max_error_vs_a0"] = max(
            (abs(c - math.cos(a0 @ lat.vector(m, n))) for (m, n), c in cos_table.items()),
            default=0.0)
    out = _outdir(args)
    if out:
        io.write_json(out / "gauge_class.json", result)
    return result, 0


def _spectrum(spec, args):
    lat, B, V = _context(spec)
    s = spec.config.spectrum
    n = args.n_grid or s.n
    n_lowest = args.n_lowest or s.n_lowest
    a0 = spec.a0 if spec.a0 is not None else (0.0, 0.0)
    H = assemble(make_potential(B, a0), V, lat, n)
    return eigenvalues(H, n_lowest), n


def cmd_spectrum(spec, args) -> tuple[dict, int]:
    lam, n = _spectrum(spec, args)
    result = {"command": "spectrum", "grid": n, "eigenvalues": lam.tolist()}
    out = _outdir(args)
    if out:
        io.write_json(out / "spectrum.json", result)
        io.write_csv(out / "eigenvalues.csv", ["index", "eigenvalue"], enumerate(lam))
    return result, 0


def cmd_trace(spec, args) -> tuple[dict, int]:
    lam, n = _spectrum(spec, args)
    tr = spec.config.trace
    width = tr.width if tr.width is not None else trace_width_floor(float(lam.max()))
    t = np.linspace(tr.t_min, tr.t_max, tr.samples)
    vals = smoothed_wave_trace(lam, t, width)
    result = {"command": "trace", "grid": n, "eigenvalues": len(lam), "width": width,
              "local_maxima": local_maxima(t, vals).tolist()}
    out = _outdir(args)
    if out:
        io.write_json(out / "trace.json", result)
        io.write_csv(out / "trace.csv", ["t", "trace"], zip(t, vals))
    return result, 0


def cmd_roundtrip(spec, args) -> tuple[dict, int]:
    lat, B, V = _context(spec)
    if spec.a0 is None:
        raise SpecParseError("roundtrip needs a0 to generate the forward table", field="a0")
    report = roundtrip(B, V, spec.a0, spec.roundtrip_config())
    result = {
        "command": "roundtrip", "ok": report.ok, "mode": spec.config.mode,
        "errors": report.errors, "flags": report.flags,
        "B": io.field_to_triples(report.B), "V": io.field_to_triples(report.V),
    }
    if report.gauge is not None:
        result["gauge_cosines"] = list(report.gauge.cosines)
        result["gauge_basis"] = [list(b) for b in report.gauge.basis]
    out = _outdir(args)
    if out:
        io.write_json(out / "roundtrip.json", result)
        io.write_json(out / "table.json", io.table_to_json(report.table))
        _write_field_csv(out / "B_recovered.csv", report.B)
        _write_field_csv(out / "V_recovered.csv", report.V)
    return result, 0 if report.ok else 2


COMMANDS = {
    "validate": cmd_validate,
    "forward": cmd_forward,
    "reconstruct": cmd_reconstruct,
    "gauge-class": cmd_gauge_class,
    "spectrum": cmd_spectrum,
    "roundtrip": cmd_roundtrip,
    "trace": cmd_trace,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tsi", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--spec", required=True, help="problem file (JSON)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--kmax", type=int)
    p.add_argument("--grid", type=int, help="y-grid size for change of variables")
    p.add_argument("--cutoff", type=int, help="Fourier cutoff of the fields")
    p.add_argument("--tol", type=float, help="coefficient tolerance for B and V")
    p.add_argument("--directions", help='direction list, e.g. "1,0;0,1"')
    p.add_argument("--table", help="invariant table (reconstruct, gauge-class)")
    p.add_argument("--cosines", help="cosine file (reconstruct)")
    p.add_argument("--n-grid", type=int, help="spectral grid size N")
    p.add_argument("--n-lowest", type=int, help="number of eigenvalues")
    return p


def _envelope(code: str, message: str, field) -> str:
    return io.to_json({"error": {"code": code, "message": message, "field": field}})


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 3 if exc.code else 0
    try:
        spec = _apply_overrides(io.load_spec(args.spec), args)
        result, code = COMMANDS[args.command](spec, args)
    except TSIError as exc:
        print(_envelope(exc.code, exc.message, exc.field), file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(_envelope("numerical_failure", str(exc), None), file=sys.stderr)
        return 2
    print(io.to_json(result))
    return code


if __name__ == "__main__":
    sys.exit(main())
