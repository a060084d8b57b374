"""Flat key = value config files for the bench CLI.

Keys match ScenarioConfig / MlgdConfig field names plus an optional
`name`; `#` starts a comment; blank lines are ignored.  Example:

    # two lightly loaded users
    n_tx = 8
    n_rx = 2
    n_streams = 2
    n_users = 2
    total_power = 1.0
    master_seed = 0
    total_iters = 200
    window = 10
"""

from beamopt.mlgd import MlgdConfig
from beamopt.scenario import ScenarioConfig

_SCENARIO_INT = ("n_tx", "n_rx", "n_streams", "n_users", "master_seed")
_SCENARIO_FLOAT = ("total_power", "snr_db")
_MLGD_INT = ("total_iters", "window")
_MLGD_FLOAT = ("meta_lr",)
_MLGD_BOOL = ("detach_inputs",)
_MLGD_STR = ("update_order", "report", "input_encoding")

_BOOL_WORDS = {
    "1": True, "true": True, "yes": True, "on": True,
    "0": False, "false": False, "no": False, "off": False,
}


def parse_config_text(text):
    """Parse config text into a {key: string} dict; raises on bad lines."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError("line %d: expected 'key = value'" % lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ValueError("line %d: empty key or value" % lineno)
        if key in out:
            raise ValueError("line %d: duplicate key %r" % (lineno, key))
        out[key] = value
    return out


def _bool(value, key):
    try:
        return _BOOL_WORDS[value.lower()]
    except KeyError:
        raise ValueError("%s must be a boolean, got %r" % (key, value)) from None


def build_configs(raw):
    """Typed (ScenarioConfig, MlgdConfig, name) from a parsed key dict."""
    scenario_kw = {}
    mlgd_kw = {}
    name = ""
    for key, value in raw.items():
        if key == "name":
            name = value
        elif key in _SCENARIO_INT:
            scenario_kw[key] = int(value)
        elif key in _SCENARIO_FLOAT:
            scenario_kw[key] = float(value)
        elif key == "user_weights":
            scenario_kw[key] = tuple(float(x) for x in value.split(",") if x.strip())
        elif key in _MLGD_INT:
            mlgd_kw[key] = int(value)
        elif key in _MLGD_FLOAT:
            mlgd_kw[key] = float(value)
        elif key in _MLGD_BOOL:
            mlgd_kw[key] = _bool(value, key)
        elif key in _MLGD_STR:
            mlgd_kw[key] = value
        else:
            raise ValueError("unknown config key: %r" % key)
    missing = [k for k in ("n_tx", "n_rx", "n_streams", "n_users")
               if k not in scenario_kw]
    if missing:
        raise ValueError("config missing required keys: %s" % ", ".join(missing))
    return ScenarioConfig(**scenario_kw), MlgdConfig(**mlgd_kw), name


def load_config(path):
    """Read and type a config file; returns (ScenarioConfig, MlgdConfig, name)."""
    with open(path) as f:
        return build_configs(parse_config_text(f.read()))
