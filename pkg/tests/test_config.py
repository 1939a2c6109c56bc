import json

import numpy as np
import pytest

from covertsec.config import ConfigError, load, load_scheme, loads, parse_scenario_file, save_scheme
from covertsec.fixtures import FIXTURES, fixture, random_fixture


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_fixture_round_trip(name):
    first = parse_scenario_file(fixture(name))
    second = loads(first.dumps())
    assert second.to_dict() == first.to_dict()
    assert loads(second.dumps()).dumps() == second.dumps()
    np.testing.assert_array_equal(first.system.A, second.system.A)


def test_random_fixture_round_trip():
    sf = parse_scenario_file(random_fixture(5, 3, 4, 2))
    assert loads(sf.dumps()).to_dict() == sf.to_dict()
    assert sf.defense.threat.compromised_outputs == (4,)


def test_fighter_fixture_contents():
    sf = parse_scenario_file(fixture("fighter"))
    assert sf.system.sample_period == 0.5
    assert sf.system.A[0, 0] == 1.0214 and sf.system.B[2, 1] == -1.5840
    assert sf.scheme.D_d[0, 1] == 0.575 and sf.scheme.exact is not None
    np.testing.assert_array_equal(sf.scheme.C_d, -sf.scheme.D_d)
    assert sf.defense.secure_outputs == (1, 2)
    assert {"input1-sensor1", "input2-sensor1", "input3-sensor1", "input4-sensor1"} <= set(sf.scenarios)


def test_syntax_error_reports_line():
    text = '{\n  "name": "x",\n  "system": {\n    "A": [[1.0,]]\n  }\n}\n'
    with pytest.raises(ConfigError) as info:
        loads(text)
    assert info.value.line == 4 and "line 4" in str(info.value)


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d["system"]["A"][1].pop(), "system.A[1]"),
        (lambda d: d["system"]["B"][0].__setitem__(0, "x"), "system.B[0][0]"),
        (lambda d: d["system"].pop("C"), "system.C"),
        (lambda d: d["scenarios"]["input1-sensor1"].__setitem__("inputs", [7]), "scenarios.input1-sensor1"),
        (lambda d: d["scenarios"]["input1-sensor1"].__setitem__("inputs", [1.5]), "scenarios.input1-sensor1.inputs[0]"),
        (lambda d: d["defense"].__setitem__("secure_outputs", [1]), "defense.secure_outputs"),
        (lambda d: d["simulation"].__setitem__("speed", 3), "simulation"),
        (lambda d: d["scheme"]["decoder"].__setitem__("D_d", [[1.0]]), "scheme"),
        (lambda d: d.__setitem__("extra", 1), ""),
    ],
)
def test_field_precise_diagnostics(mutate, field):
    data = fixture("fighter")
    mutate(data)
    with pytest.raises(ConfigError) as info:
        parse_scenario_file(data)
    assert info.value.field_path == field
    assert info.value.exit_code == 2


def test_dimension_mismatch_is_reported():
    data = fixture("example1")
    data["system"]["C"] = [[1.0, 0.0, 0.0]]
    with pytest.raises(ConfigError) as info:
        parse_scenario_file(data)
    assert info.value.field_path == "system"


def test_scheme_file_reference(tmp_path):
    sf = parse_scenario_file(fixture("fighter"))
    save_scheme(sf.scheme, tmp_path / "scheme.json")
    data = fixture("fighter")
    data["scheme"] = {"path": "scheme.json"}
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(data))
    loaded = load(cfg)
    np.testing.assert_array_equal(loaded.scheme.A_e, sf.scheme.A_e)
    assert loaded.scheme.exact is not None
    assert load_scheme(tmp_path / "scheme.json").label == "published"


def test_missing_files(tmp_path):
    with pytest.raises(ConfigError):
        load(tmp_path / "nope.json")
    data = fixture("fighter")
    data["scheme"] = {"path": "missing.json"}
    with pytest.raises(ConfigError) as info:
        parse_scenario_file(data, tmp_path)
    assert info.value.field_path == "scheme.path"


def test_unknown_scenario_name():
    sf = parse_scenario_file(fixture("example1"))
    with pytest.raises(ConfigError):
        sf.scenario("nope")
