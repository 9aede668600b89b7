import pytest
import yaml

from dcee import ConfigurationError, default_config, load_config, scenario_from_dict
from dcee.config import CONTROLLER_TYPES


def test_default_config_is_valid():
    cfg = scenario_from_dict(default_config())
    assert cfg.n_steps == 9000
    assert cfg.controller.type == "numerical_dcee"
    assert len(cfg.schedule) == 3
    assert cfg.schedule[0].t_start == 0.0


def test_default_config_returns_fresh_copies():
    a = default_config()
    a["vehicle"]["mass"] = 1.0
    assert default_config()["vehicle"]["mass"] == 1500.0


def test_partial_override_merges_over_defaults():
    cfg = scenario_from_dict({"noise": {"sigma_reward": 0.0}})
    assert cfg.noise.sigma_reward == 0.0
    assert cfg.vehicle.mass == 1500.0


def test_unknown_key_rejected():
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"vehcle": {"mass": 1000.0}})
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"vehicle": {"mas": 1000.0}})


def test_schedule_validation():
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"schedule": []})
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"schedule": [{"t_start": 5.0, "v_star": 20.0}]})
    with pytest.raises(ConfigurationError):
        scenario_from_dict(
            {"schedule": [{"t_start": 0.0, "v_star": 20.0}, {"t_start": 0.0, "v_star": 25.0}]}
        )


def test_schedule_builds_true_parameters():
    cfg = scenario_from_dict({})
    from dcee import optimal_condition

    stars = [optimal_condition(cfg.reward, seg.theta_true) for seg in cfg.schedule]
    assert stars == pytest.approx([25.0, 20.0, 30.0])
    assert [seg.disturbance_force for seg in cfg.schedule] == [0.0, 200.0, -200.0]


def test_horizon_must_divide():
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"horizon_s": 900.05})
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"horizon_s": -1.0})


def test_controller_type_validation():
    for ctype in CONTROLLER_TYPES:
        cfg = scenario_from_dict({"controller": {"type": ctype}})
        assert cfg.controller.type == ctype
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"controller": {"type": "mpc"}})


def test_solver_settings_validated():
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"controller": {"solver": {"max_iters": 0}}})


def test_ensemble_settings():
    cfg = scenario_from_dict({"ensemble": {"N": 3, "eta_lo": 0.01, "eta_hi": 0.02}})
    assert cfg.ensemble.n_members == 3
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"ensemble": {"N": 0}})
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"ensemble": {"eta_lo": 0.5, "eta_hi": 0.1}})
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"ensemble": {"spread": [0.1, 0.1]}})


def test_load_config_from_yaml(tmp_path):
    path = tmp_path / "scen.yaml"
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump({"horizon_s": 10.0, "noise": {"seed": 42}}, fh)
    cfg = load_config(path)
    assert cfg.horizon_s == 10.0
    assert cfg.noise.seed == 42
    assert cfg.vehicle.dt == 0.1


def test_load_config_missing_file():
    with pytest.raises(ConfigurationError):
        load_config("/nonexistent/config.yaml")


def test_load_config_rejects_non_mapping(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("- just\n- a\n- list\n", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_config(path)


def test_shipped_configs_parse():
    import os

    root = os.path.join(os.path.dirname(__file__), "..", "configs")
    for name in ("default.yaml", "noise_free.yaml"):
        cfg = load_config(os.path.join(root, name))
        assert cfg.n_steps > 0


def test_raw_echo_carries_full_schema():
    cfg = scenario_from_dict({"v0": 7.0})
    assert cfg.raw["v0"] == 7.0
    assert set(cfg.raw) == {
        "vehicle",
        "reward",
        "noise",
        "schedule",
        "horizon_s",
        "v0",
        "controller",
        "ensemble",
    }
