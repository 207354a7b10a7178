"""Scenario configuration: presets, file loading, validation."""

import numpy as np
import pytest

from invobs.config import (ConfigError, DEFAULT_PRESETS, ScenarioConfig,
                           build_gains, build_noise, config_from_mapping,
                           default_initial_states, load_batch, load_config,
                           preset, validate)


def test_presets_are_valid():
    for name in ("car-default", "reactor-default", "ins-flight"):
        cfg = validate(preset(name))
        assert cfg.label == name
        build_gains(cfg)
    assert set(DEFAULT_PRESETS) == {"car", "reactor", "ins"}
    with pytest.raises(ConfigError, match="preset"):
        preset("submarine")


def test_default_initial_states_shapes():
    for system, dim in (("car", 3), ("reactor", 3), ("ins", 7)):
        truth, est = default_initial_states(system)
        assert len(truth) == dim and len(est) == dim
    truth, est = default_initial_states("ins")
    assert np.linalg.norm(np.asarray(truth)[:4]) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(np.asarray(est)[:4]) == pytest.approx(1.0, abs=1e-12)


def test_build_gains_overrides_and_rejects():
    cfg = ScenarioConfig("car", "x", 1.0, 0.01, gains={"a": 2.0})
    assert build_gains(cfg).a == 2.0
    with pytest.raises(ConfigError, match="unknown gain"):
        build_gains(ScenarioConfig("car", "x", 1.0, 0.01, gains={"M12": 1.0}))
    with pytest.raises(ConfigError, match="bad gains"):
        build_gains(ScenarioConfig("car", "x", 1.0, 0.01, gains={"a": -1.0}))


def test_build_noise_rules():
    assert build_noise(ScenarioConfig("ins", "x", 1.0, 1e-3)) is None
    spec = build_noise(ScenarioConfig("ins", "x", 1.0, 1e-3, noise=True))
    assert spec.accel_sigma == 1.0
    spec = build_noise(ScenarioConfig(
        "ins", "x", 1.0, 1e-3, noise=True,
        noise_overrides={"accel_sigma": 0.0, "gyro_bias": [0, 0, 0]}))
    assert spec.accel_sigma == 0.0
    assert np.allclose(spec.gyro_bias, 0.0)
    with pytest.raises(ConfigError, match="only applies"):
        build_noise(ScenarioConfig("car", "x", 1.0, 0.01, noise=True))
    with pytest.raises(ConfigError, match="3-vector"):
        build_noise(ScenarioConfig("ins", "x", 1.0, 1e-3, noise=True,
                                   noise_overrides={"mag_bias": [1.0, 2.0]}))


@pytest.mark.parametrize("bad, msg", [
    (dict(system="boat"), "system"),
    (dict(label="a b"), "label"),
    (dict(label=""), "label"),
    (dict(t_end=1.0, dt=0.3), "whole number"),
    (dict(dt=-0.1), "positive"),
    (dict(seed=-1), "seed"),
    (dict(seed=True), "seed"),
    (dict(initial_truth=(1.0, 2.0)), "3-vector"),
])
def test_validate_rejects(bad, msg):
    base = dict(system="car", label="ok", t_end=1.0, dt=0.01)
    base.update(bad)
    with pytest.raises(ConfigError, match=msg):
        validate(ScenarioConfig(**base))


def test_validate_reactor_positivity():
    with pytest.raises(ConfigError, match="positive"):
        validate(ScenarioConfig("reactor", "x", 1.0, 0.1,
                                initial_estimate=(1.0, -0.5, 300.0)))


def test_validate_ins_quaternion_norm():
    good = (1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0)
    validate(ScenarioConfig("ins", "x", 1.0, 1e-3, initial_truth=good))
    with pytest.raises(ConfigError, match="unit norm"):
        validate(ScenarioConfig("ins", "x", 1.0, 1e-3,
                                initial_truth=(2.0,) + good[1:]))


def test_config_from_mapping_preset_plus_overrides():
    cfg = config_from_mapping({"preset": "car-default", "t_end": 5.0,
                               "seed": 3, "gains": {"b": 0.5}})
    assert cfg.system == "car" and cfg.t_end == 5.0 and cfg.seed == 3
    assert build_gains(cfg).b == 0.5
    with pytest.raises(ConfigError, match="unknown configuration"):
        config_from_mapping({"preset": "car-default", "speed": 3})
    with pytest.raises(ConfigError, match="needs"):
        config_from_mapping({"system": "car", "t_end": 5.0})


def test_load_config_roundtrip(tmp_path):
    p = tmp_path / "scn.yaml"
    p.write_text("preset: reactor-default\nt_end: 10.0\nlabel: quick\n")
    cfg = load_config(str(p))
    assert cfg.system == "reactor" and cfg.t_end == 10.0 and cfg.label == "quick"


def test_load_config_rejects_garbage(tmp_path):
    p = tmp_path / "scn.yaml"
    p.write_text("a: [unclosed\n")
    with pytest.raises(ConfigError, match="parse"):
        load_config(str(p))


def test_load_batch(tmp_path):
    p = tmp_path / "batch.yaml"
    p.write_text(
        "scenarios:\n"
        "  - {preset: car-default, t_end: 2.0, label: one}\n"
        "  - {preset: car-default, t_end: 3.0, label: two}\n")
    cfgs = load_batch(str(p))
    assert [c.label for c in cfgs] == ["one", "two"]
    p.write_text(
        "scenarios:\n"
        "  - {preset: car-default, label: same}\n"
        "  - {preset: car-default, label: same}\n")
    with pytest.raises(ConfigError, match="unique"):
        load_batch(str(p))
    p.write_text("not_scenarios: []\n")
    with pytest.raises(ConfigError, match="scenarios"):
        load_batch(str(p))
