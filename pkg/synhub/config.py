import copy
import json
from pathlib import Path
from typing import Any, Dict, Mapping

import jsonschema
from jsonschema.validators import Draft202012Validator

from .contract_ids import CONFIG_SCHEMA_V1
from .errors import ConfigError

SCHEMA_DIR = Path(__file__).resolve().parent / "contracts" / "schemas"

LINK_NAMES = ("primary->hub", "hub->secondary", "secondary->hub", "hub->primary")


def _link_defaults() -> Dict[str, Any]:
    return {"static_delay_ms": None, "jitter_ms": 2.0, "loss_prob": 0.0, "fifo": True}


DEFAULT_CONFIG: Dict[str, Any] = {
    "schema": CONFIG_SCHEMA_V1,
    "seed": 1,
    "transport": {
        "mode": "sim",
        "static_delay_range_ms": [10.0, 90.0],
        "links": {name: _link_defaults() for name in LINK_NAMES},
    },
    "hub": {
        "host": "127.0.0.1",
        "listen_port": 47001,
        "primary_addr": "127.0.0.1:47000",
        "secondary_addr": "127.0.0.1:47002",
        "stimulus_hold_ms": None,
    },
    "partners": {"primary": 1, "synapse": 2, "secondary": 3},
    "neurons": {
        "ANPRE": {"id": 1, "partner": "primary"},
        "ANPOST": {"id": 2, "partner": "primary"},
        "BN": {"id": 3, "partner": "secondary"},
    },
    "connectome": [
        {"pre": "ANPRE", "synapse_id": "ABm", "post": "BN", "post_partner": "secondary", "pathway": "forward"},
        {"pre": "BN", "synapse_id": "BAm", "post": "ANPOST", "post_partner": "primary", "pathway": "reverse"},
    ],
    "bcm": {"low_hz": 5.0, "high_hz": 20.0, "window_ms": 1000.0, "history_capacity": 4096},
    "memristor": {
        "alpha_p": 0.05,
        "alpha_d": 0.05,
        "noise_sigma": 0.1,
        "initial_weight": {"ABm": 0.3, "BAm": 0.5},
        "default_initial_weight": 0.5,
    },
    "stim": {"f_min": 10.0, "f_max": 200.0, "burst_duration_ms": 50.0, "epsc_quantum": 20.0},
    "schedule": {
        "phases": [
            {"rate_hz": 10.0, "duration_s": 20.0},
            {"rate_hz": 25.0, "duration_s": 20.0},
            {"rate_hz": 10.0, "duration_s": 20.0},
            {"rate_hz": 4.0, "duration_s": 40.0},
        ],
        "tail_s": 0.5,
        "settle_s": 2.0,
    },
    "artificial": {
        "dt_ms": 0.5,
        "forced_neuron": "ANPRE",
        "adaptive_neuron": "ANPOST",
        "anpost": {
            "tau_m": 20.0,
            "tau_w": 100.0,
            "tau_syn": 100.0,
            "v_rest": -70.0,
            "v_threshold": -50.0,
            "v_reset": -58.0,
            "v_peak": 0.0,
            "delta_T": 2.0,
            "a": 0.05,
            "b": 2.0,
            "t_refractory": 5.0,
            "spont_rate_hz": 2.0,
            "i_background": None,
            "i_noise_sigma": 1.0,
            "calibration_seed": 7,
            "calibration_window_s": 30.0,
        },
    },
    "bio": {
        "neuron": "BN",
        "ap_threshold_pulses": 16,
        "psp_amp_max": 10.0,
        "jitter": 0.05,
        "spont_rate_hz": 0.0,
        "refractory_ms": 200.0,
        "response_latency_ms": 2.0,
        "summation_mode": False,
        "summation_tau_ms": 50.0,
    },
    "output": {"dir": "out/run"},
}


def deep_merge(base: Mapping[str, Any], over: Mapping[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(dict(base))
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check_known_keys(base: Mapping[str, Any], over: Mapping[str, Any], prefix: str = "") -> None:
    for k, v in over.items():
        path = f"{prefix}{k}"
        if k not in base:
            raise ConfigError(f"override references unknown config key '{path}'")
        if isinstance(v, Mapping) and isinstance(base[k], Mapping):
            _check_known_keys(base[k], v, prefix=path + ".")


def apply_overrides(cfg: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    _check_known_keys(cfg, overrides)
    merged = deep_merge(cfg, overrides)
    validate_config(merged)
    return merged


def load_schema(name: str) -> Dict[str, Any]:
    return json.loads((SCHEMA_DIR / f"{name}.schema.json").read_text(encoding="utf-8"))


def validate_config(cfg: Mapping[str, Any]) -> None:
    schema = load_schema("config")
    try:
        jsonschema.validate(instance=cfg, schema=schema, cls=Draft202012Validator)
    except jsonschema.ValidationError as e:
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {e.message}") from None


def config_from_dict(obj: Mapping[str, Any]) -> Dict[str, Any]:
    if not isinstance(obj, Mapping):
        raise ConfigError("config must be a JSON object")
    cfg = deep_merge(DEFAULT_CONFIG, obj)
    validate_config(cfg)
    return cfg


def load_config(path: str) -> Dict[str, Any]:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {path} ({e})") from None
    return config_from_dict(obj)


def default_config() -> Dict[str, Any]:
    return copy.deepcopy(DEFAULT_CONFIG)


def neuron_ids(cfg: Mapping[str, Any]) -> Dict[str, int]:
    return {name: int(spec["id"]) for name, spec in cfg["neurons"].items()}


def neuron_names(cfg: Mapping[str, Any]) -> Dict[int, str]:
    return {nid: name for name, nid in neuron_ids(cfg).items()}


def parse_addr(addr: str) -> tuple:
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"address must look like host:port, got {addr!r}")
    return host, int(port)
