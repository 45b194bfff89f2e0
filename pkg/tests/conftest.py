import copy
from pathlib import Path

import pytest

from synhub.config import apply_overrides, default_config, load_config
from synhub.engine import run_sim

ROOT = Path(__file__).resolve().parents[1]
CANNED = ROOT / "fixtures" / "configs" / "canned.json"

SHORT_SCHEDULE = {
    "phases": [{"rate_hz": 25.0, "duration_s": 3.0}, {"rate_hz": 4.0, "duration_s": 3.0}],
    "tail_s": 0.2,
    "settle_s": 1.0,
}


def _short_config(**overrides):
    cfg = apply_overrides(default_config(), {"schedule": SHORT_SCHEDULE})
    return apply_overrides(cfg, overrides) if overrides else cfg


@pytest.fixture
def short_config():
    """Factory for a two-phase 6 s experiment; keyword overrides are merged section-wise."""
    return _short_config


@pytest.fixture(scope="session")
def canned_config():
    return load_config(str(CANNED))


@pytest.fixture(scope="session")
def canned_run(canned_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("canned")
    return run_sim(copy.deepcopy(canned_config), str(out))
