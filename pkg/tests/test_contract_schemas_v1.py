from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import pytest

from synhub.contract_ids import (
    CONFIG_SCHEMA_V1,
    MANIFEST_SCHEMA_V1,
    SCENARIOS_SCHEMA_V1,
    SUITE_SCHEMA_V1,
    SUMMARY_SCHEMA_V1,
)

ROOT = Path(__file__).resolve().parents[1]
SCHEMAS = ROOT / "synhub" / "contracts" / "schemas"

def _load_schema(name: str) -> dict:
    p = SCHEMAS / f"{name}.schema.json"
    assert p.exists(), f"Missing schema file: {p}"
    return json.loads(p.read_text(encoding="utf-8"))

def _assert_schema_contract(schema: dict, expected_id: str) -> None:
    assert schema.get("$id") == expected_id, f"$id mismatch: {schema.get('$id')} != {expected_id}"
    props = schema.get("properties", {})
    assert "schema" in props, "missing properties.schema"
    assert props["schema"].get("const") == expected_id, "properties.schema.const mismatch"


@pytest.mark.parametrize(
    "name,contract_id",
    [
        ("config", CONFIG_SCHEMA_V1),
        ("summary", SUMMARY_SCHEMA_V1),
        ("manifest", MANIFEST_SCHEMA_V1),
        ("suite", SUITE_SCHEMA_V1),
        ("scenarios", SCENARIOS_SCHEMA_V1),
    ],
)
def test_schema_v1_matches_contract_id(name, contract_id):
    _assert_schema_contract(_load_schema(name), contract_id)


@pytest.mark.parametrize(
    "name,fixture",
    [
        ("config", "fixtures/configs/canned.json"),
        ("config", "fixtures/runs/two_phase/config.json"),
        ("suite", "fixtures/scenarios/robustness.json"),
        ("summary", "expected/summary/two_phase.summary.json"),
        ("manifest", "expected/manifest/sim_run.manifest.json"),
        ("scenarios", "expected/scenarios/robustness.scenarios.json"),
    ],
)
def test_fixture_validates_against_schema(name, fixture):
    instance = json.loads((ROOT / fixture).read_text(encoding="utf-8"))
    jsonschema.validate(instance=instance, schema=_load_schema(name))
