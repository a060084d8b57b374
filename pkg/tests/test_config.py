"""Flat key = value config parsing and typing."""

import pytest

from beamopt.config import build_configs, load_config, parse_config_text

GOOD = """
# benchmark scenario
name = demo
n_tx = 8
n_rx = 2          # receive antennas
n_streams = 2
n_users = 2
total_power = 2.0
snr_db = 15
master_seed = 3
user_weights = 1.0, 2.0
total_iters = 100
window = 5
meta_lr = 1e-3
detach_inputs = off
update_order = gauss_seidel
input_encoding = log_magnitude
report = last_iterate
"""


def test_parse_skips_comments_and_blanks():
    raw = parse_config_text(GOOD)
    assert raw["n_tx"] == "8"
    assert raw["n_rx"] == "2"
    assert "name" in raw and raw["name"] == "demo"


def test_parse_rejects_bad_lines():
    with pytest.raises(ValueError):
        parse_config_text("n_tx 8")
    with pytest.raises(ValueError):
        parse_config_text("= 8")
    with pytest.raises(ValueError):
        parse_config_text("n_tx =")
    with pytest.raises(ValueError):
        parse_config_text("n_tx = 8\nn_tx = 4")


def test_build_configs_types_everything():
    scenario, mcfg, name = build_configs(parse_config_text(GOOD))
    assert name == "demo"
    assert scenario.n_tx == 8 and scenario.n_users == 2
    assert scenario.total_power == 2.0 and scenario.snr_db == 15.0
    assert scenario.master_seed == 3
    assert scenario.user_weights == (1.0, 2.0)
    assert mcfg.total_iters == 100 and mcfg.window == 5
    assert mcfg.meta_lr == 1e-3
    assert mcfg.detach_inputs is False
    assert mcfg.update_order == "gauss_seidel"
    assert mcfg.input_encoding == "log_magnitude"
    assert mcfg.report == "last_iterate"


def test_build_configs_defaults():
    scenario, mcfg, name = build_configs(
        {"n_tx": "4", "n_rx": "2", "n_streams": "1", "n_users": "2"}
    )
    assert name == ""
    assert scenario.total_power == 1.0
    assert mcfg.total_iters == 200 and mcfg.window == 10
    assert mcfg.detach_inputs is True and mcfg.input_encoding == "raw"


def test_build_configs_rejects_unknown_and_missing():
    with pytest.raises(ValueError):
        build_configs({"n_tx": "4", "n_rx": "2", "n_streams": "1",
                       "n_users": "2", "typo_key": "1"})
    with pytest.raises(ValueError):
        build_configs({"n_tx": "4"})
    with pytest.raises(ValueError):
        build_configs({"n_tx": "4", "n_rx": "2", "n_streams": "1",
                       "n_users": "2", "detach_inputs": "maybe"})


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text(GOOD)
    scenario, mcfg, name = load_config(str(path))
    assert scenario.n_users == 2 and mcfg.window == 5 and name == "demo"
