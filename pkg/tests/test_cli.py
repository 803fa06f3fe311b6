import json
import math
from pathlib import Path

import jsonschema
import pytest

from multicharge.cli import run_command, write_atomic
from multicharge.errors import ParseError
from multicharge.models import flywheel_charges, parse_model

SCHEMAS = Path(__file__).resolve().parents[1] / "schemas"


def _schema(name):
    return json.loads((SCHEMAS / name).read_text())


def _run(tmp_path, argv, name="out.json"):
    out = tmp_path / name
    code = run_command(argv + ["--out", str(out)])
    return code, out


def test_parse_model_examples():
    spec = parse_model('{"charges": ["pauli_z"], "betas": [0.5]}')
    assert spec.k == 1 and spec.dim == 2
    with pytest.raises(ParseError) as err:
        parse_model('{"charges": ["pauli_z"], "betas": [1, 2]}')
    assert (err.value.path, err.value.reason) == ("/betas", "length mismatch")
    fly = parse_model('{"scenario": "flywheel", "inertia": 2.0}')
    energy, ang = fly.charges
    ell = [-2, -1, 0, 1, 2]
    assert [energy.matrix[i, i].real for i in range(5)] == [l * l / 4.0 for l in ell]
    assert [ang.matrix[i, i].real for i in range(5)] == ell
    assert flywheel_charges(1.0)[0].matrix[0, 0] == 2.0


@pytest.mark.parametrize("doc, path", [
    ("{", "/"),
    ('{"betas": []}', "/charges"),
    ('{"charges": []}', "/charges"),
    ('{"charges": ["pauli_q"]}', "/charges/0"),
    ('{"charges": ["pauli_z", "identity(3)"]}', "/charges/1"),
    ('{"charges": ["pauli_z"], "betas": ["a"]}', "/betas"),
    ('{"charges": ["pauli_z"], "system": {"populations": [1]}}', "/system/populations"),
    ('{"charges": ["pauli_z"], "system": {"diag": [0.6, 0.6]}}', "/system"),
    ('{"charges": ["pauli_z"], "bath_copies": -1}', "/bath_copies"),
    ('{"scenario": "nope"}', "/scenario"),
    ('{"scenario": "flywheel", "inertia": 0}', "/inertia"),
])
def test_parse_model_errors(doc, path):
    with pytest.raises(ParseError) as err:
        parse_model(doc)
    assert err.value.path == path


def test_model_document_validates_against_schema():
    jsonschema.validate({"charges": ["pauli_x", {"diag": [1, 0]}], "betas": [1, 2], "bath_copies": 2},
                        _schema("model.schema.json"))


def test_gge_solve_round_trip(tmp_path):
    code, out = _run(tmp_path, ["gge", "solve", "--charges", "pauli_x,pauli_y", "--targets", "0.3,0.4"])
    assert code == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, _schema("gge_solve.schema.json"))
    assert doc["rebuild_error"] < 1e-9


def test_gge_solve_infeasible(tmp_path, capsys):
    code, out = _run(tmp_path, ["gge", "solve", "--charges", "pauli_z", "--targets", "1.5"])
    assert code == 1
    assert "Infeasible" in capsys.readouterr().err
    assert not out.exists()


def test_validation_exit_code(tmp_path, capsys):
    model = tmp_path / "m.json"
    model.write_text('{"charges": ["pauli_z"], "betas": [1, 2]}')
    code, _ = _run(tmp_path, ["gge", "build", "--model", str(model)])
    assert code == 2
    assert "ParseError: /betas: length mismatch" in capsys.readouterr().err
    assert run_command(["gge", "frobnicate"]) == 2
    assert run_command(["gge", "build"]) == 2


def test_gge_build_scenario(tmp_path):
    code, out = _run(tmp_path, ["gge", "build", "--scenario", "spin-xy"])
    assert code == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, _schema("gge_build.schema.json"))
    assert doc["eigenvalues"] == pytest.approx([0.11920, 0.88080], abs=1e-5)


def test_landauer_spin_erasure(tmp_path):
    code, out = _run(tmp_path, ["landauer", "erase", "--scenario", "spin-erasure"])
    assert code == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, _schema("erasure_report.schema.json"))
    assert doc["quality"] < 1e-6
    assert doc["weighted_heat"] >= math.log(2) - 1e-9
    assert doc["heat_flows"][0] == 0.0


def test_protocol_commands(tmp_path):
    code, out = _run(tmp_path, ["protocol", "extract", "--scenario", "two-charge-qubit", "--delta-p", "0.02"],
                     "trace.csv")
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "step,work_0,work_1,dF_system,dF_bath,slack"
    assert len(lines) > 5
    code, out = _run(tmp_path, ["protocol", "trade", "--scenario", "two-charge-qubit", "--pair", "0,1"])
    assert code == 0
    jsonschema.validate(json.loads(out.read_text()), _schema("trade.schema.json"))
    code, out = _run(tmp_path, ["protocol", "audit", "--scenario", "spin-xy", "--trials", "20", "--format", "json"])
    doc = json.loads(out.read_text())
    assert doc["min_slack"] >= -1e-9 and doc["max_thermal_weighted_work"] <= 1e-9
    assert run_command(["protocol", "trade", "--scenario", "two-charge-qubit", "--pair", "0"]) == 2


def test_micro_and_typicality_pipeline(tmp_path):
    code, ams = _run(tmp_path, ["micro", "ams", "--scenario", "pauli-ams", "--copies", "4"], "ams.json")
    assert code == 0
    doc = json.loads(ams.read_text())
    jsonschema.validate(doc, _schema("ams.schema.json"))
    code, out = _run(tmp_path, ["typicality", "sample", "--ams", str(ams), "--trials", "50"])
    assert code == 0
    jsonschema.validate(json.loads(out.read_text()), _schema("typicality_report.schema.json"))
    code, zams = _run(tmp_path, ["micro", "ams", "--charges", "pauli_z", "--values", "0", "--delta", "0.1"], "z.json")
    code, out = _run(tmp_path, ["typicality", "evolve", "--ams", str(zams), "--steps", "20"])
    assert code == 0
    jsonschema.validate(json.loads(out.read_text()), _schema("time_average.schema.json"))
    code, out = _run(tmp_path, ["micro", "scan", "--scenario", "pauli-ams", "--values", "0.2,0.2", "--n", "2..4"],
                     "scan.csv")
    assert code == 0
    assert out.read_text().splitlines()[0] == "copies,avg_relative_entropy,dim_subspace"


def test_empty_window_is_runtime_error(tmp_path, capsys):
    code, _ = _run(tmp_path, ["micro", "ams", "--charges", "pauli_z", "--values", "0.1", "--delta", "0.01"])
    assert code == 1
    assert "EmptyWindow" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["protocol", "audit", "--scenario", "spin-xy", "--trials", "10", "--seed", "4"],
    ["micro", "ams", "--scenario", "pauli-ams", "--copies", "4", "--seed", "3", "--trials", "30"],
    ["gge", "solve", "--charges", "pauli_x,pauli_y", "--targets", "0.1,-0.2"],
])
def test_outputs_are_byte_identical(tmp_path, argv):
    a = tmp_path / "a.out"
    b = tmp_path / "b.out"
    assert run_command(argv + ["--out", str(a)]) == 0
    assert run_command(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "x.json"
    write_atomic(str(target), "one")
    write_atomic(str(target), "two")
    assert target.read_text() == "two"
    assert [p.name for p in tmp_path.iterdir()] == ["x.json"]
