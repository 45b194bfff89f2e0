import json
from pathlib import Path

import jsonschema
import pytest

from synhub.config import apply_overrides, default_config, load_schema
from synhub.errors import ConfigError
from synhub.summary import _mode, summarize, summarize_dir

ROOT = Path(__file__).resolve().parents[1]
RUN = ROOT / "fixtures" / "runs" / "two_phase"
GOLDEN = ROOT / "expected" / "summary" / "two_phase.summary.json"


def one_phase(rate_hz=25.0):
    return apply_overrides(default_config(), {
        "schedule": {"phases": [{"rate_hz": rate_hz, "duration_s": 4.0}], "settle_s": 0.0}
    })


def plast(t, sid, decision, w):
    return {"abs_time_ms": str(t), "synapse_id": sid, "decision": decision, "weight_after": f"{w:.6f}"}


def test_summary_matches_golden_fixture():
    fixture = json.loads(GOLDEN.read_text(encoding="utf-8"))
    assert summarize_dir(str(RUN)) == fixture


def test_summary_emit_validates_against_schema(tmp_path):
    out = tmp_path / "summary.json"
    summary = summarize_dir(str(RUN), emit=str(out))
    assert json.loads(out.read_text(encoding="utf-8")) == summary
    jsonschema.validate(instance=summary, schema=load_schema("summary"))


def test_decision_fractions_and_majority():
    rows = [plast(100, "ABm", "LTP", 0.4), plast(200, "ABm", "LTP", 0.5),
            plast(300, "ABm", "LTD", 0.45), plast(400, "ABm", "LTP", 0.55)]
    s = summarize(one_phase(), [], rows)
    st = s["phases"][0]["synapses"]["ABm"]
    assert st["counts"] == {"LTP": 3, "LTD": 1, "NoChange": 0}
    assert st["fractions"] == {"LTP": 0.75, "LTD": 0.25, "NoChange": 0.0}
    assert st["majority"] == "LTP"
    assert st["final_weight"] == 0.55
    # 0.75 < 0.9 of the expected decision
    assert s["acceptance"]["forward_plasticity_follows_rate"] is False


def test_settle_window_excludes_early_decisions():
    cfg = apply_overrides(one_phase(), {"schedule": {"settle_s": 1.0}})
    rows = [plast(500, "ABm", "LTD", 0.3), plast(1500, "ABm", "LTP", 0.4)]
    st = summarize(cfg, [], rows)["phases"][0]["synapses"]["ABm"]
    assert st["n_settled"] == 1 and st["majority"] == "LTP"
    assert st["mean_weight"] == pytest.approx(0.35)


def test_mode_tie_breaks_lexically():
    assert _mode(["NoChange", "LTP", "LTD", "LTP", "LTD"]) == "LTD"
    assert _mode([]) is None


def test_empty_schedule_has_no_applicable_criteria():
    cfg = apply_overrides(default_config(), {"schedule": {"phases": []}})
    s = summarize(cfg, [], [])
    assert s["phases"] == [] and s["duration_ms"] == 0.0
    assert set(s["acceptance"].values()) == {None}


def test_summarize_dir_requires_run_directory(tmp_path):
    with pytest.raises(ConfigError):
        summarize_dir(str(tmp_path))
