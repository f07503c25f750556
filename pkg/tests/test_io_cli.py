import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tsi import io
from tsi.cli import main, parse_directions
from tsi.errors import SpecParseError
from tsi.fields import field_difference, make_potential
from tsi.invariants import build_invariant_table
from tsi.lattice import primitive_directions

FAST = ["--kmax", "12", "--grid", "256"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), (json.loads(err) if err.strip() else None)


def write_spec(tmp_path, base, name="spec.json", **changes):
    data = json.loads(base.read_text())
    for dotted, value in changes.items():
        node = data
        *head, last = dotted.split("__")
        for h in head:
            node = node.setdefault(h, {})
        node[last] = value
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_spec_round_trip(specs_dir):
    spec = io.load_spec(specs_dir / "flagship.json")
    again = io.parse_spec(io.dump_spec(spec))
    assert again == spec
    assert spec.config.kmax == 32 and spec.config.mode == "given"


def test_spec_units(specs_dir):
    spec = io.load_spec(specs_dir / "flagship.json")
    lat = spec.build_lattice()
    B = spec.build_B(lat)
    b0 = 2 * math.pi / lat.delta_area
    assert_allclose(B.mean, b0)
    assert_allclose(B.coeffs[(1, 0)], 0.1 * b0)
    assert spec.build_V(lat).coeffs[(1, 1)] == 0.3


@pytest.mark.parametrize("text,field", [
    ('{"lattice": {"e1": [1, 0], "e2": [0, 1]}, "B": {"coefficients": []}, "bogus": 1}', "bogus"),
    ('{"lattice": {"e1": [1, 0]}, "B": {"coefficients": []}}', "lattice.e2"),
    ('{"lattice": {"e1": [1, 0], "e2": [0, 1]},\n "B": {"coefficients": [[1, 0]]}}', "B.coefficients.0"),
    ('{"lattice": {"e1": [1, 0], "e2": [0, 1]},\n "B": ', "line 2"),
])
def test_parse_errors(text, field):
    with pytest.raises(SpecParseError) as info:
        io.parse_spec(text)
    assert info.value.field.startswith(field)
    assert info.value.exit_code == 3


def test_config_rejects_unknown_mode():
    text = '{"lattice": {"e1": [1, 0], "e2": [0, 1]}, "B": {"coefficients": []}, ' \
           '"config": {"mode": "guess"}}'
    with pytest.raises(SpecParseError, match="config.mode"):
        io.parse_spec(text)


def test_parse_directions():
    assert parse_directions("1,0;0,1  2,-1") == [(1, 0), (0, 1), (2, -1)]
    with pytest.raises(SpecParseError):
        parse_directions("1;2")


def test_table_json_round_trip(oblique, flagship):
    B, V = flagship
    table = build_invariant_table(make_potential(B, (0.3, 0.7)), V, oblique, [(1, 0), (1, 1)], 4,
                                  256)
    back = io.table_from_json(json.loads(io.to_json(io.table_to_json(table))))
    assert back.entries == table.entries
    assert back.kmax == table.kmax


def test_csv_round_trip(tmp_path):
    io.write_csv(tmp_path / "a.csv", ["x", "y"], [(0.1, 1 / 3), (2.0, -1e-17)])
    header, data = io.read_csv(tmp_path / "a.csv")
    assert header == ["x", "y"]
    assert data[0, 1] == 1 / 3 and data[1, 1] == -1e-17


def test_json_non_finite():
    assert json.loads(io.to_json({"a": np.float64("nan"), "b": np.int64(3)})) == {"a": "nan", "b": 3}


def test_validate_ok(capsys, specs_dir, tmp_path):
    code, out, _ = run(capsys, "validate", "--spec", specs_dir / "flagship.json", "--out", tmp_path)
    assert code == 0 and out["ok"]
    assert (tmp_path / "validation.json").exists()


def test_validate_square_fails(capsys, specs_dir):
    code, out, _ = run(capsys, "validate", "--spec", specs_dir / "square.json")
    assert code == 1
    assert not out["checks"]["length_condition"]["pass"]


def test_validate_strong_field(capsys, specs_dir):
    code, out, _ = run(capsys, "validate", "--spec", specs_dir / "strong_field.json")
    assert code == 1
    assert out["checks"]["field_condition"]["margin"] < 0


@pytest.fixture(scope="module")
def forward_dir(tmp_path_factory, specs_dir):
    out = tmp_path_factory.mktemp("forward")
    assert main(["forward", "--spec", str(specs_dir / "flagship.json"), "--out", str(out)] + FAST) == 0
    return out


def test_forward_outputs(forward_dir):
    for name in ("table.json", "cosines.json", "sprime.csv", "B_grid.csv"):
        assert (forward_dir / name).exists()
    table = io.table_from_json(io.read_json(forward_dir / "table.json", "table"))
    assert set(table.directions()) == set(primitive_directions(2))
    header, data = io.read_csv(forward_dir / "sprime.csv")
    # s'(y) integrates to one over a period
    assert_allclose(data[:, 1:].mean(axis=0), 1.0, atol=1e-12)


def test_forward_deterministic(capsys, specs_dir, tmp_path, forward_dir):
    code, _, _ = run(capsys, "forward", "--spec", specs_dir / "flagship.json", "--out", tmp_path,
                     *FAST)
    assert code == 0
    assert (tmp_path / "table.json").read_bytes() == (forward_dir / "table.json").read_bytes()


def test_reconstruct_from_a0(capsys, specs_dir, forward_dir, tmp_path):
    code, out, _ = run(capsys, "reconstruct", "--spec", specs_dir / "flagship.json",
                       "--table", forward_dir / "table.json", "--out", tmp_path, *FAST)
    assert code == 0 and out["cosine_source"] == "a0"
    spec = io.load_spec(specs_dir / "flagship.json")
    lat = spec.build_lattice()
    B_rec = io.field_from_triples(lat, out["B"])
    assert field_difference(B_rec, spec.build_B(lat))[0] < 1e-7
    assert (tmp_path / "sprime_recovered.csv").exists()


def test_reconstruct_from_cosine_file(capsys, specs_dir, forward_dir):
    code, out, _ = run(capsys, "reconstruct", "--spec", specs_dir / "flagship.json",
                       "--table", forward_dir / "table.json",
                       "--cosines", forward_dir / "cosines.json", *FAST)
    assert code == 0 and out["cosine_source"] == "file"


def test_reconstruct_missing_cosine(capsys, specs_dir, forward_dir, tmp_path):
    data = json.loads((forward_dir / "cosines.json").read_text())
    data["values"] = [v for v in data["values"] if not (v[:3] == [1, 1, 5])]
    (tmp_path / "cos.json").write_text(json.dumps(data))
    code, _, err = run(capsys, "reconstruct", "--spec", specs_dir / "flagship.json",
                       "--table", forward_dir / "table.json", "--cosines", tmp_path / "cos.json",
                       *FAST)
    assert code == 2
    assert err["error"]["code"] == "ill_conditioned"
    assert "(1,1)" in err["error"]["message"] and "k=5" in err["error"]["message"]


def test_reconstruct_needs_table(capsys, specs_dir):
    code, _, err = run(capsys, "reconstruct", "--spec", specs_dir / "flagship.json")
    assert code == 3 and err["error"]["field"] == "--table"


def test_gauge_class_cli(capsys, specs_dir, forward_dir, tmp_path):
    code, out, _ = run(capsys, "gauge-class", "--spec", specs_dir / "flagship.json",
                       "--table", forward_dir / "table.json", "--out", tmp_path)
    assert code == 0
    assert out["max_error_vs_a0"] < 1e-7
    assert (tmp_path / "gauge_class.json").exists()


def test_roundtrip_cli(capsys, specs_dir, tmp_path):
    spec = write_spec(tmp_path, specs_dir / "flagship.json", config__mode="gauge")
    code, out, _ = run(capsys, "roundtrip", "--spec", spec, "--out", tmp_path / "rt", *FAST)
    assert code == 0 and out["ok"]
    assert out["errors"]["B_rel_l2"] < 1e-6


def test_roundtrip_cli_tolerance_failure(capsys, specs_dir, tmp_path):
    spec = write_spec(tmp_path, specs_dir / "flagship.json", config__forward_grid=33,
                      config__spot_checks=0)
    code, out, _ = run(capsys, "roundtrip", "--spec", spec, "--grid", "256")
    assert code == 2 and not out["ok"]
    assert any(f.startswith("quadrature-limited") for f in out["flags"])


def test_roundtrip_hypothesis_violation(capsys, specs_dir):
    code, _, err = run(capsys, "roundtrip", "--spec", specs_dir / "square.json", *FAST)
    assert code == 1 and err["error"]["code"] == "hypothesis_violation"


def test_roundtrip_needs_a0(capsys, specs_dir, tmp_path):
    data = json.loads((specs_dir / "flagship.json").read_text())
    del data["a0"]
    (tmp_path / "s.json").write_text(json.dumps(data))
    code, _, err = run(capsys, "roundtrip", "--spec", tmp_path / "s.json")
    assert code == 3 and err["error"]["field"] == "a0"


def test_spectrum_cli(capsys, specs_dir, tmp_path):
    code, out, _ = run(capsys, "spectrum", "--spec", specs_dir / "constant_field.json",
                       "--n-grid", "32", "--n-lowest", "3", "--out", tmp_path)
    assert code == 0
    b0 = 2 * math.pi / 1.1
    assert abs(out["eigenvalues"][0] / b0 - 1) < 1e-2
    header, data = io.read_csv(tmp_path / "eigenvalues.csv")
    assert data.shape == (3, 2)


def test_trace_cli(capsys, specs_dir, tmp_path):
    code, out, _ = run(capsys, "trace", "--spec", specs_dir / "constant_field.json",
                       "--n-grid", "24", "--n-lowest", "4", "--out", tmp_path)
    assert code == 0 and out["width"] > 0
    header, data = io.read_csv(tmp_path / "trace.csv")
    assert header == ["t", "trace"] and data.shape[0] == 301


def test_empty_potential(capsys, specs_dir, tmp_path):
    spec = write_spec(tmp_path, specs_dir / "flagship.json", V__coefficients=[])
    code, out, _ = run(capsys, "reconstruct", "--spec", spec, "--table",
                       tmp_path / "missing.json")
    assert code == 3
    assert main(["forward", "--spec", str(spec), "--out", str(tmp_path)] + FAST) == 0
    capsys.readouterr()
    code, out, _ = run(capsys, "reconstruct", "--spec", spec, "--table", tmp_path / "table.json",
                       *FAST)
    assert code == 0
    assert max(abs(v) for _, _, v in out["V"]) < 1e-7


def test_bad_override(capsys, specs_dir):
    code, _, err = run(capsys, "validate", "--spec", specs_dir / "flagship.json", "--kmax", "-3")
    assert code == 3 and err["error"]["code"] == "parse_error"


def test_unknown_command(capsys, specs_dir):
    assert main(["explode", "--spec", str(specs_dir / "flagship.json")]) == 3
    capsys.readouterr()


def test_missing_spec_file(capsys, tmp_path):
    code, _, err = run(capsys, "validate", "--spec", tmp_path / "nope.json")
    assert code == 3 and err["error"]["field"] == "spec"
