import json
import math

import pytest
from hypothesis import given, strategies as st

from ehstorage import ConfigError
from ehstorage.config import (
    DEFAULT_CONFIG,
    db_to_linear,
    dbm_to_watts,
    from_dict,
    joules_to_uw,
    linear_to_db,
    load_config,
    uw_to_joules,
)


def test_reference_defaults():
    cfg = load_config()
    assert cfg.harvest_mean_eff == 1e-5
    assert cfg.buffers == (4, 7, 20)
    assert cfg.deltas[0] == 0.1 and cfg.deltas[-1] == 1.5 and len(cfg.deltas) == 29
    assert 10 * math.log10(cfg.link.snr_bar) == pytest.approx(24.6, abs=1e-12)
    assert cfg.link.snr_threshold == pytest.approx(2 ** 2.1 - 1, abs=1e-12)
    assert cfg.imperfections.circuit_power == pytest.approx(0.2e-6)
    assert cfg.imperfections.pa_inefficiency == 1.5
    assert cfg.imperfections.storage_efficiency == 0.9
    assert cfg.profile.harvest_mean * 0.9 == pytest.approx(1e-5, rel=1e-14)
    assert cfg.n_c == 2


def test_effective_and_target_power():
    cfg = load_config()
    eff = cfg.effective(0.965)
    assert eff.m_eff == pytest.approx(9.65e-6)
    assert eff.delta == pytest.approx(0.965)
    assert cfg.target_power(eff.m_eff) == pytest.approx((9.65e-6 - 0.2e-6) / 1.5)


def test_conversions():
    assert dbm_to_watts(30.0) == 1.0
    assert dbm_to_watts(-103.0) == pytest.approx(10 ** (-13.3))
    assert db_to_linear(10.0) == 10.0
    assert linear_to_db(100.0) == 20.0


@given(st.floats(1e-6, 1e9))
def test_microwatt_round_trip(uw):
    back = joules_to_uw(uw_to_joules(uw))
    assert back == pytest.approx(uw, rel=1e-12)


@pytest.mark.parametrize("raw", [
    {"sytem": {}},
    {"system": {"alpha": 1.5}},
    {"buffers": [1]},
    {"buffers": ["inf"]},
    {"policy_sweep": {"start": 0.1, "stop": 1.0}},
    {"policy_sweep": [0.5, 0.4]},
    {"sim": {"n_slots": 0}},
    {"sim": {"n_slots": 1000, "warmup_slots": 1000}},
    {"output": {"format": "xml"}},
    {"system": {"dl_power_W": 1.0, "dl_power_dBm": 30.0}},
])
def test_rejects_bad_configs(raw):
    with pytest.raises(ConfigError):
        from_dict(raw)


def test_geometry_route_and_analytic_only():
    cfg = from_dict({"system": {"dl_power_dBm": 30.0, "dl_gain_dB": -40.0, "rf_dc_efficiency": 0.5},
                     "sim": "analytic-only", "buffers": ["infinite", 3],
                     "policy_sweep": [0.5, 1.0]})
    assert cfg.sim is None
    assert cfg.harvest_mean_eff == pytest.approx(0.9 * 0.5 * 1.0 * 1e-4)
    assert cfg.buffers == ("infinite", 3)
    assert cfg.deltas == (0.5, 1.0)


def test_load_from_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"buffers": [5]}), encoding="utf-8")
    assert load_config(path).buffers == (5,)
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_default_dict_is_schema_valid():
    from_dict(DEFAULT_CONFIG)
