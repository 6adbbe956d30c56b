import math

import pytest

import terrasim


def test_bekker_pressure_matches_closed_form():
    soil = terrasim.SoilParams()
    z, b = 0.03, 0.2
    expected = (soil.K_c / b + soil.K_phi) * z**soil.n
    assert terrasim.bekker_pressure(z, b, soil) == pytest.approx(expected, rel=1e-12)


def test_janosi_shear_approaches_strength():
    soil = terrasim.SoilParams()
    p = 1e4
    tau_max = terrasim.shear_strength(p, soil)
    assert terrasim.janosi_shear(0.0, p, soil) == 0.0
    assert terrasim.janosi_shear(10 * soil.k_shear, p, soil) == pytest.approx(tau_max, rel=1e-4)


def test_smoothed_normal_force_is_zero_when_separated():
    params = terrasim.SmoothedContactParams()
    assert terrasim.normal_force_smoothed(-1e-3, 0.0, params) == 0.0
    assert terrasim.normal_force_smoothed(2e-3, 0.0, params) > 0.0


def test_gait_sample_starts_at_rest_and_round_trips(tmp_path):
    gait = terrasim.GaitProgram.gait1()
    q0 = terrasim.gait_sample(gait, 0.0)
    assert q0.shape == (6,)
    assert all(v == 0.0 for v in q0)
    path = tmp_path / "gait.csv"
    terrasim.gait_to_csv(gait, 3.0, 100.0, str(path))
    traj = terrasim.gait_from_csv(str(path))
    assert traj.joints == 6
    for a, b in zip(traj.sample(2.5), terrasim.gait_sample(gait, 2.5)):
        assert a == b


def test_presets_parse():
    names = terrasim.preset_names()
    assert "sidewind-rigid-gait1" in names
    cfg = terrasim.load_preset("sidewind-rigid-gait1")
    assert cfg.tier == "rigid"
    assert cfg.motion == "sidewind"


def test_config_errors_raise():
    with pytest.raises(terrasim.ParseError):
        terrasim.parse_config_text("[scenario]\nmotion = drop\nmotion = drop\n")
    with pytest.raises(terrasim.ConfigError):
        terrasim.parse_config_text("[scenario]\nmotion = fly\n[time]\n")
    with pytest.raises(terrasim.IoError):
        terrasim.parse_config("/nonexistent/run.cfg")


def test_short_drop_run_and_recompute(tmp_path):
    cfg = terrasim.load_preset("drop-rigid")
    cfg.duration = 0.3
    cfg.output_dir = str(tmp_path / "drop")
    metrics = terrasim.run_scenario(cfg)
    assert metrics["step_count"] == 300
    assert math.isfinite(metrics["peak_normal_force"])
    assert metrics["peak_normal_force"] > 0.0
    again = terrasim.recompute_metrics(cfg.output_dir)
    assert again["peak_normal_force"] == metrics["peak_normal_force"]
