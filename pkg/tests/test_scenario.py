import numpy as np
import pytest

from nvclock import clock_composer as cc
from nvclock.config import config_hash, load_config
from nvclock.errors import ConfigError
from nvclock.noise_stats import NoiseSpec, psn_composite, psn_fractional
from nvclock.scenario import (
    MODES,
    ScenarioConfig,
    run_scenario,
    scenario_from_dict,
    sensitivity_sweep,
    strategy_comparison,
    temperature_in_units,
)

N = 4000


def quiet(**kw):
    return ScenarioConfig(n_cycles=N, psn=False, **kw)


def test_all_noise_off_gives_zero():
    for m in MODES:
        ts = run_scenario(quiet(mode=m))
        assert np.all(ts.frac_psi == 0)
        assert not ts.flagged.any()


def test_config_validation():
    with pytest.raises(ConfigError):
        ScenarioConfig(mode="bogus")
    with pytest.raises(ConfigError):
        ScenarioConfig(n_cycles=50)


def test_reproducible_and_seed_dependent():
    cfg = ScenarioConfig(n_cycles=N, temperature_noise=(NoiseSpec("random_walk", 1e-3),), seed=9)
    a, b = run_scenario(cfg), run_scenario(cfg)
    assert a.frac_psi.tobytes() == b.frac_psi.tobytes()
    c = run_scenario(cfg.with_(seed=10))
    assert not np.array_equal(a.frac_psi, c.frac_psi)


def test_mode_identities():
    cfg = ScenarioConfig(n_cycles=N, temperature_noise=(NoiseSpec("random_walk", 1e-3),),
                         lo_noise=(NoiseSpec("white", 1e-9),), seed=3)
    comp = run_scenario(cfg)
    d = run_scenario(cfg.with_(mode="D_only"))
    q = run_scenario(cfg.with_(mode="Q_only"))
    assert np.array_equal(d.frac_psi, comp.frac_D)
    assert np.array_equal(q.frac_psi, comp.frac_Q)
    c = cfg.constants
    assert np.allclose(comp.frac_psi, cc.composite_correction(comp.frac_Q, comp.frac_D, c), rtol=0, atol=1e-20)


def test_temperature_only_composite_bound():
    cfg = quiet(temperature_noise=(NoiseSpec("random_walk", 1e-3),), seed=4)
    ts = run_scenario(cfg)
    c = cfg.constants
    dT = ts.true_temperature - c.T0
    k = 0.5 * abs(c.lambda_D * c.lambda_Q / (c.lambda_D - c.lambda_Q) * c.second_order_combination)
    # the residual is quadratic in dT point by point, so its RMS is set by <dT^4>
    # absolute slack covers cancellation in (D - D0)/D0, about 1e-16 per term
    assert np.all(np.abs(ts.frac_psi) <= k * dT**2 * (1 + 1e-6) + 1e-15)
    assert np.sqrt(np.mean(ts.frac_psi**2)) <= k * np.sqrt(np.mean(dT**4)) * (1 + 1e-6) + 1e-15
    ts2 = run_scenario(cfg.with_(second_order=True))
    assert np.max(np.abs(ts2.frac_psi)) < 1e-3 * np.max(np.abs(ts.frac_psi)) + 1e-20


def test_temperature_in_units():
    c = quiet().constants
    ts = run_scenario(quiet(temperature_noise=(NoiseSpec("random_walk", 1e-3),)).with_(
        constants=c.with_(lambda_D2=0.0)))
    tD, tQ = temperature_in_units(ts, c)
    assert np.allclose(tD, ts.true_temperature - c.T0, atol=1e-9)
    assert np.allclose(tQ, ts.true_temperature - c.T0, atol=1e-9)
    ts = run_scenario(quiet(lo_noise=(NoiseSpec("random_walk", 1e-10),)))
    tD, tQ = temperature_in_units(ts, c)
    assert np.allclose(tQ - tD, (1 / c.lambda_Q - 1 / c.lambda_D) * ts.true_LO_offset, rtol=1e-9, atol=1e-18)
    z = run_scenario(quiet())
    assert np.all(temperature_in_units(z, c)[0] == 0)


def test_lo_tracking_chi2():
    cfg = ScenarioConfig(n_cycles=20000, lo_noise=(NoiseSpec("random_walk", 1e-9),), seed=12)
    ts = run_scenario(cfg)
    c = cfg.constants
    s = psn_composite(psn_fractional(cfg.readout_D.psn(c.D0, 1.0)), psn_fractional(cfg.readout_Q.psn(c.Q0, 1.0)), c)
    chi2 = np.mean((ts.clock_error / s) ** 2)
    assert 0.9 < chi2 < 1.1


def test_thermometer_mode():
    cfg = quiet(mode="thermometer_compensated", temperature_noise=(NoiseSpec("random_walk", 1e-3),))
    ts = run_scenario(cfg.with_(constants=cfg.constants.with_(lambda_D2=0.0)))
    assert np.max(np.abs(ts.frac_psi)) < 1e-15
    drift = run_scenario(cfg.with_(thermometer_noise=(NoiseSpec("linear_drift", 1e-5),),
                                   constants=cfg.constants.with_(lambda_D2=0.0)))
    t = drift.timestamps
    assert np.allclose(drift.frac_psi, -cfg.constants.lambda_D * 1e-5 * t, rtol=1e-6, atol=1e-15)


def test_capture_range_flagged():
    cfg = quiet(temperature_noise=(NoiseSpec("linear_drift", 2e-3),), mode="D_only")
    ts = run_scenario(cfg)
    assert ts.flagged.any()


def test_sweeps():
    cfg = ScenarioConfig(n_cycles=N)
    c = cfg.constants
    r = sensitivity_sweep(cfg, "temperature", np.linspace(296, 298, 21))
    assert r.slope["D"] == pytest.approx(c.lambda_D, rel=0.01)
    assert abs(r.slope["psi"]) < 0.01 * abs(c.lambda_D)
    assert r.method["psi"] == "quadratic"
    r = sensitivity_sweep(cfg, "pulse_area_scale", np.linspace(0.9, 1.1, 5))
    assert np.all(np.isfinite(r.frac_Q))
    assert "no_signal" in r.flags["Q"]
    r = sensitivity_sweep(cfg, "Bz", np.linspace(474, 476, 5))
    assert r.slope["Q"] != 0
    with pytest.raises(ConfigError):
        sensitivity_sweep(cfg, "humidity", [1, 2, 3])


def test_strategy_comparison_threads_identical():
    cfg = ScenarioConfig(n_cycles=N, temperature_noise=(NoiseSpec("random_walk", 1e-3),), seed=1)
    a = strategy_comparison(cfg, workers=1)
    b = strategy_comparison(cfg, workers=4)
    assert set(a) == {"uncompensated", "thermometer_compensated", "cryogenic", "stabilized", "composite"}
    for k in a:
        assert a[k][1].sigmas.tobytes() == b[k][1].sigmas.tobytes()


def test_strategy_comparison_behaviour():
    cfg = ScenarioConfig(n_cycles=20000, temperature_noise=(NoiseSpec("random_walk", 1e-3),), seed=2)
    perfect = strategy_comparison(cfg, thermometer_noise=())
    tau = 4096
    comp = perfect["composite"][1].at(tau)
    therm = perfect["thermometer_compensated"][1].at(tau)
    unc = perfect["uncompensated"][1].at(tau)
    assert therm < comp * 1.5  # both null temperature, thermometer path has only D shot noise
    drift = strategy_comparison(cfg, thermometer_noise=(NoiseSpec("random_walk", 3e-4),))
    assert drift["thermometer_compensated"][1].at(tau) > 3 * drift["composite"][1].at(tau)
    assert drift["composite"][1].at(tau) < unc / 10
    # cryogenic variant: temperature part scaled by 1/15
    quiet_cfg = cfg.with_(psn=False)
    r = strategy_comparison(quiet_cfg)
    ratio = r["uncompensated"][0].frac_psi / r["cryogenic"][0].frac_psi
    ok = np.isfinite(ratio)
    assert np.allclose(ratio[ok][1:], 15.0, rtol=1e-3)


def test_config_loading(tmp_path):
    cfg = load_config()
    assert cfg["schema_version"] == 1
    sc = scenario_from_dict(cfg)
    assert sc.mode == "composite"
    p = tmp_path / "c.yaml"
    p.write_text("schema_version: 1\nscenario: {mode: D_only, n_cycles: 500}\n")
    cfg2 = load_config(p)
    assert scenario_from_dict(cfg2).mode == "D_only"
    assert cfg2["readout"]["D"]["T2"] == 1.68e-6
    p.write_text("schema_version: 2\n")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text("bogus: 1\n")
    with pytest.raises(ConfigError):
        load_config(p)
    a = {"x": 1, "y": {"b": 2, "a": 1}}
    b = {"y": {"a": 1, "b": 2}, "x": 1}
    assert config_hash(a) == config_hash(b)
