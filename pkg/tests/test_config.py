import json

import pytest

from haselhand import config_hash, default_config, load_config, save_config
from haselhand.config import (
    ProfileSpec,
    ScenarioPreset,
    SimConfig,
    config_from_dict,
    config_to_dict,
    resolve_scenario,
)
from haselhand.errors import ConfigError


class TestRoundTrip:
    def test_dict_round_trip_preserves_hash(self, cfg):
        doc = config_to_dict(cfg)
        again = config_from_dict(doc)
        assert config_hash(again) == config_hash(cfg)

    def test_file_round_trip(self, cfg, tmp_path):
        path = tmp_path / "config.json"
        save_config(cfg, path)
        loaded = load_config(path)
        assert config_hash(loaded) == config_hash(cfg)

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{\n  broken\n}")
        with pytest.raises(ConfigError, match="line"):
            load_config(path)

    def test_missing_block_reported(self):
        with pytest.raises(ConfigError, match="stacks"):
            config_from_dict({"tendons": {}})


class TestCrossReferences:
    def test_preset_with_unknown_finger(self, cfg):
        doc = config_to_dict(cfg)
        doc["presets"]["broken"] = {
            "fingers": ["tentacle"],
            "profiles": {"*": {"kind": "ramp_hold", "target_kv": 5.5, "ramp_s": 1.0}},
        }
        with pytest.raises(ConfigError, match="tentacle"):
            config_from_dict(doc)

    def test_preset_with_unknown_object(self, cfg):
        doc = config_to_dict(cfg)
        doc["presets"]["broken"] = {
            "fingers": ["index"],
            "object": "anvil",
            "profiles": {"*": {"kind": "ramp_hold", "target_kv": 5.5, "ramp_s": 1.0}},
        }
        with pytest.raises(ConfigError, match="anvil"):
            config_from_dict(doc)

    def test_finger_with_unknown_stack(self, cfg):
        doc = config_to_dict(cfg)
        doc["fingers"]["index"]["tendons"] = ["index_mcp", "missing_stack"]
        with pytest.raises(ConfigError, match="missing_stack"):
            config_from_dict(doc)

    def test_profile_target_above_ceiling(self, cfg):
        doc = config_to_dict(cfg)
        doc["presets"]["pinch_cube"]["profiles"]["*"]["target_kv"] = 5.9
        loaded = config_from_dict(doc)
        with pytest.raises(ConfigError, match="ceiling"):
            resolve_scenario(loaded, "pinch_cube")


class TestSimConfig:
    def test_sample_period_must_divide_duration(self):
        with pytest.raises(ConfigError):
            SimConfig(duration=2.0005)

    def test_internal_step_must_divide_sample(self):
        with pytest.raises(ConfigError):
            SimConfig(dt_internal=3e-4)

    def test_steps_per_sample(self):
        assert SimConfig().steps_per_sample == 10


class TestPresetValidation:
    def test_controller_name_checked(self):
        with pytest.raises(ConfigError):
            ScenarioPreset("x", ("index",), controller="pid")

    def test_wildcard_profile_required(self):
        with pytest.raises(ConfigError):
            ScenarioPreset("x", ("index",), profiles={"index_mcp": ProfileSpec()})

    def test_default_config_self_consistent(self, cfg):
        # Every preset resolves; every chain's profile fits the ceiling.
        for name in cfg.presets:
            scenario = resolve_scenario(cfg, name)
            assert scenario.chains
