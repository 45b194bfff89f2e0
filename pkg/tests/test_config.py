import json
from pathlib import Path

import pytest

from synhub.config import (
    DEFAULT_CONFIG,
    apply_overrides,
    config_from_dict,
    default_config,
    load_config,
    neuron_names,
    parse_addr,
)
from synhub.errors import ConfigError
from synhub.util import rng_for

ROOT = Path(__file__).resolve().parents[1]


def test_canned_fixture_is_the_default_experiment():
    cfg = load_config(str(ROOT / "fixtures" / "configs" / "canned.json"))
    assert cfg["schedule"] == DEFAULT_CONFIG["schedule"]
    assert cfg["memristor"]["initial_weight"] == {"ABm": 0.3, "BAm": 0.5}


def test_partial_config_is_merged_onto_defaults():
    cfg = config_from_dict({"seed": 9, "bcm": {"low_hz": 4.0}})
    assert cfg["seed"] == 9
    assert cfg["bcm"] == {**DEFAULT_CONFIG["bcm"], "low_hz": 4.0}


def test_overrides_reject_unknown_keys():
    with pytest.raises(ConfigError, match="bcm.lo_hz"):
        apply_overrides(default_config(), {"bcm": {"lo_hz": 1.0}})


def test_overrides_do_not_mutate_base():
    base = default_config()
    apply_overrides(base, {"memristor": {"initial_weight": {"ABm": 0.9}}})
    assert base == DEFAULT_CONFIG


@pytest.mark.parametrize(
    "patch",
    [
        {"artificial": {"dt_ms": 2.0}},
        {"transport": {"mode": "tcp"}},
        {"memristor": {"alpha_p": -0.1}},
        {"schema": "synhub.config.v0"},
    ],
)
def test_invalid_values_rejected(patch):
    with pytest.raises(ConfigError):
        apply_overrides(default_config(), patch)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "missing.json"))
    p = tmp_path / "broken.json"
    p.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(str(p))
    p.write_text(json.dumps([1, 2]), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(p))


def test_parse_addr():
    assert parse_addr("127.0.0.1:47001") == ("127.0.0.1", 47001)
    with pytest.raises(ConfigError):
        parse_addr("localhost")


def test_neuron_names():
    assert neuron_names(default_config()) == {1: "ANPRE", 2: "ANPOST", 3: "BN"}


def test_rng_streams_are_independent_of_creation_order():
    a1 = rng_for(1, "anpost").random()
    rng_for(1, "bio:response").random()
    assert rng_for(1, "anpost").random() == a1
    assert rng_for(1, "anpost").random() != rng_for(2, "anpost").random()
