import json

import jsonschema
import pytest

from halflight import cli, fixtures


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def example1_doc():
    fx = fixtures.get("example1")
    return cli.run_analysis(fx.spec, fx.point_array[:3])


def _numbers(node):
    if isinstance(node, dict):
        for v in node.values():
            yield from _numbers(v)
    elif isinstance(node, list):
        for v in node:
            yield from _numbers(v)
    elif isinstance(node, float):
        yield node


def test_report_validates_against_schema(example1_doc):
    jsonschema.validate(json.loads(json.dumps(example1_doc)), cli.REPORT_SCHEMA)
    assert example1_doc["passed"]
    assert set(example1_doc["suites"]) == set(cli.SUITES)


def test_analyze_example1_json(capsys):
    code, out, _ = run(capsys, "analyze", "--fixture", "example1", "--points", "3")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, cli.REPORT_SCHEMA)
    c = doc["classification"]
    assert c["flags"]["screen_homothetic"]["value"] is True
    assert c["phi"] == pytest.approx(0.5, abs=1e-8)


def test_analyze_plane_is_totally_geodesic(capsys):
    code, out, _ = run(capsys, "analyze", "--fixture", "plane", "--suite", "classify")
    assert code == 0
    doc = json.loads(out)
    assert doc["suites"] == ["classify"]
    assert doc["classification"]["flags"]["totally_geodesic"]["value"] is True


def test_text_and_json_carry_identical_numbers(capsys, tmp_path):
    _, js, _ = run(capsys, "analyze", "--fixture", "example2", "--points", "2", "--seed", "1")
    _, txt, _ = run(capsys, "analyze", "--fixture", "example2", "--points", "2", "--seed", "1", "--format", "text")
    doc = json.loads(js)
    nums = list(_numbers(doc))
    assert len(nums) > 100
    for x in nums:
        assert repr(x) in txt
    assert txt.strip() == cli.to_text(doc)


def test_text_residual_lines():
    text = cli.to_text({"residuals": {"gauss": {"value": 1e-9, "tolerance": 1e-7, "pass": True}}})
    assert text == "residuals.gauss: 1e-09 tol 1e-07 PASS"


def test_config_file_round_trip(capsys, tmp_path):
    path = tmp_path / "ex.json"
    assert run(capsys, "fixtures", "export", "example1", "-o", str(path))[0] == 0
    cfg = json.loads(path.read_text())
    assert cfg["spec"]["components"][3] == "sqrt(v1^2 - v2^2)"
    code, out, _ = run(capsys, "analyze", "--config", str(path), "--points", "2", "--suite", "frames")
    assert code == 0
    assert json.loads(out)["frames"]["residuals"]


def test_top_level_config_and_sampling_strategies(capsys, tmp_path):
    cfg = {"components": ["v1", "v1", "v2", "0"], "domain": [[-1, 1], [-1, 1]],
           "sample": {"strategy": "grid", "count": 4}}
    path = tmp_path / "plane.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "analyze", "--config", str(path), "--suite", "frames")
    assert code == 0
    assert len(json.loads(out)["points"]) == 4


def test_tolerance_override_flag_and_environment(capsys, monkeypatch):
    code, out, _ = run(capsys, "analyze", "--fixture", "plane", "--suite", "frames", "--tol", "1e-30")
    doc = json.loads(out)
    assert all(r["tolerance"] == 1e-30 for r in doc["frames"]["residuals"].values())
    monkeypatch.setenv("HALFLIGHT_TOL", "0.25")
    code, out, _ = run(capsys, "analyze", "--fixture", "plane", "--suite", "frames")
    assert all(r["tolerance"] == 0.25 for r in json.loads(out)["frames"]["residuals"].values())
    monkeypatch.setenv("HALFLIGHT_TOL", "tight")
    code, _, err = run(capsys, "analyze", "--fixture", "plane", "--suite", "frames")
    assert code == 2 and "HALFLIGHT_TOL" in err


def test_verify_exit_codes(capsys):
    code, out, _ = run(capsys, "verify", "--fixture", "example3", "--format", "text")
    assert code == 0
    assert "DISCREPANCY" in out and out.strip().endswith("PASS")
    code, out, _ = run(capsys, "verify", "--fixture", "example1", "--tol", "1e-15")
    assert code == 1
    assert json.loads(out)["passed"] is False


def test_malformed_expression_is_an_input_error(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"components": ["v1", "v1 +", "v2", "0"], "domain": [[-1, 1], [-1, 1]]}))
    code, _, err = run(capsys, "analyze", "--config", str(path))
    assert code == 2 and "parse error" in err


@pytest.mark.parametrize("cfg, fragment", [
    ({"components": ["v1", "v1", "v2", "0"]}, "domain"),
    ({"components": ["v1", "v1", "v2", "0"], "domain": [[-1, 1], [-1, 1]], "k": 1}, "k = 1.0"),
    ({"components": ["v1", "v1", "v3", "0"], "domain": [[-1, 1], [-1, 1]]}, "v3"),
])
def test_config_errors(capsys, tmp_path, cfg, fragment):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    code, _, err = run(capsys, "analyze", "--config", str(path))
    assert code == 2 and fragment in err


def test_input_errors(capsys, tmp_path):
    assert run(capsys, "analyze", "--fixture", "sphere")[0] == 2
    assert run(capsys, "analyze")[0] == 2
    bad = tmp_path / "x.json"
    bad.write_text("{not json")
    assert run(capsys, "analyze", "--config", str(bad))[0] == 2
    assert run(capsys, "analyze", "--config", str(tmp_path / "missing.json"))[0] == 2


def test_geometric_degeneracy_exit_code(capsys, tmp_path):
    path = tmp_path / "riemannian.json"
    path.write_text(json.dumps({"components": ["0", "v1", "v2", "v1*v2"], "domain": [[-1, 1], [-1, 1]]}))
    code, _, err = run(capsys, "analyze", "--config", str(path))
    assert code == 3 and "NotHalfLightlike" in err


def test_fixtures_list(capsys):
    code, out, _ = run(capsys, "fixtures", "list")
    assert code == 0
    assert len(out.strip().splitlines()) == len(fixtures.list_fixtures())
    assert "[PAPER]" in out
