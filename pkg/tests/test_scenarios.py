import json
from pathlib import Path

import jsonschema
import pytest

from synhub.config import load_schema
from synhub.errors import ConfigError
from synhub.scenarios import TABLE_HEADER, load_suite, run_scenario_suite
from synhub.util import write_json

ROOT = Path(__file__).resolve().parents[1]


def _suite(tmp_path, scenarios):
    p = tmp_path / "suite.json"
    write_json(str(p), {"schema": "synhub.suite.v1", "scenarios": scenarios})
    return str(p)


@pytest.fixture
def base_config_file(short_config, tmp_path):
    p = tmp_path / "base.json"
    write_json(str(p), short_config())
    return str(p)


def test_robustness_suite_fixture_loads():
    suite = load_suite(str(ROOT / "fixtures" / "scenarios" / "robustness.json"))
    assert [s["name"] for s in suite["scenarios"]][0] == "canned"


def test_duplicate_scenario_names_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_suite(_suite(tmp_path, [{"name": "a", "overrides": {}}, {"name": "a", "overrides": {}}]))


def test_initial_weight_does_not_change_forward_decisions(tmp_path, base_config_file):
    suite = _suite(tmp_path, [
        {"name": "base", "overrides": {}},
        {"name": "abm-0.5", "overrides": {"memristor": {"initial_weight": {"ABm": 0.5}}}},
    ])
    report = run_scenario_suite(suite, str(tmp_path / "report.json"), base_config=base_config_file)
    jsonschema.validate(instance=report, schema=load_schema("scenarios"))
    base, other = report["scenarios"]
    assert base["ok"] and other["ok"]
    assert other["forward_stream_identical"] is True
    assert other["signature"]["forward_majorities"] == base["signature"]["forward_majorities"]
    assert (tmp_path / "scenarios" / "abm-0.5" / "manifest.json").is_file()


def test_failing_scenario_is_isolated(tmp_path, base_config_file):
    suite = _suite(tmp_path, [
        {"name": "base", "overrides": {}},
        {"name": "bad-key", "overrides": {"no_such_section": {"x": 1}}},
    ])
    emit = tmp_path / "out" / "report.json"
    report = run_scenario_suite(suite, str(emit), base_config=base_config_file, emit_dir=str(tmp_path / "runs"))
    base, bad = report["scenarios"]
    assert base["ok"] is True
    assert bad["ok"] is False and "no_such_section" in bad["error"]
    assert report["qualitatively_equal"] is False
    assert json.loads(emit.read_text(encoding="utf-8")) == report
    table = (tmp_path / "out" / "report.csv").read_text(encoding="utf-8").splitlines()
    assert table[0] == ",".join(TABLE_HEADER)
    assert len(table) == 3


@pytest.fixture(scope="module")
def canned_vs_repeat(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("robustness")
    suite = _suite(tmp, [
        {"name": "canned", "overrides": {}},
        {"name": "repeat-abm-0.5", "overrides": {"memristor": {"initial_weight": {"ABm": 0.5}}}},
    ])
    return run_scenario_suite(suite, str(tmp / "report.json"),
                              base_config=str(ROOT / "fixtures" / "configs" / "canned.json"))


def test_canned_pattern_robust_to_initial_weight(canned_vs_repeat):
    canned, repeat = canned_vs_repeat["scenarios"]
    assert canned["signature"]["forward_majorities"] == [["NoChange"], ["LTP"], ["NoChange"], ["LTD"]]
    assert canned["signature"]["bn_onset_phase"] == 1
    assert repeat["matches_baseline"] is True
    assert repeat["forward_stream_identical"] is True
    assert canned_vs_repeat["qualitatively_equal"] is True
    assert canned_vs_repeat["witness"] is None
