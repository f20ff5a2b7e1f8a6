import filecmp

import numpy as np
import pytest

from agetail import harness
from agetail.aoi import AoiCostConfig
from agetail.channel import ChannelModel
from agetail.cli import main
from agetail.evt import GpdParams
from agetail.power import TradeoffConfig, UrllcConstraint
from agetail.simulate import COLUMNS, run_sensor, run_sensor_reference
from agetail.harness import SimConfig, load_config

SMALL = SimConfig(num_sensors=3, horizon=4000, warmup=200, exceedances=20, iterations=500)
MODEL = GpdParams(1.0, 0.0)


def _col(name):
    return COLUMNS.index(name)


def test_kernel_matches_reference(rng):
    cfg = SMALL
    x = rng.uniform(0.01, 0.3, 801)
    g = rng.exponential(1.0, 800) * cfg.channel_model().path_gain
    con = UrllcConstraint(0.2, 1e-4, 0.01, 4.0, GpdParams(1.0, 0.05))
    fast = run_sensor(x, g, cfg.link_budget, cfg.aoi_cost, TradeoffConfig(300.0, cfg.p_max_w), con)
    slow = run_sensor_reference(x, g, cfg.link_budget, cfg.aoi_cost, TradeoffConfig(300.0, cfg.p_max_w), con)
    for name, attr in (("power", "power"), ("tx_time", "tx_time"), ("queue_delay", "queue_delay"),
                       ("peak_aoi", "peak_aoi"), ("virtual_queue", "virtual_queue"), ("p_min", "p_min"),
                       ("reception_time", "reception_time")):
        np.testing.assert_allclose(fast[:, _col(name)], [getattr(r, attr) for r in slow], rtol=1e-12, atol=1e-15)
    assert (fast[:, _col("infeasible")] == [r.infeasible for r in slow]).all()


def test_records_invariants(rng):
    cfg = SMALL
    x = rng.uniform(0.001, 0.5, 2001)
    g = rng.exponential(1.0, 2000) * cfg.channel_model().path_gain
    con = UrllcConstraint(0.2, 1e-4, 0.01, 4.0, GpdParams(1.0, 0.05))
    out = run_sensor(x, g, cfg.link_budget, cfg.aoi_cost, TradeoffConfig(10.0, cfg.p_max_w), con)
    p = out[:, _col("power")]
    assert np.all((p >= 0) & (p <= cfg.p_max_w))
    for name in ("tx_time", "queue_delay", "peak_aoi", "stay_time"):
        assert np.all(out[:, _col(name)] >= 0)
    assert np.all(np.diff(out[:, _col("reception_time")]) > 0)


def test_zero_v_deterministic_channel_uses_full_power():
    cfg = SMALL.replace(fading="none", v=0.0)
    gain = ChannelModel(fading="none").path_gain
    con = UrllcConstraint(0.2, 1e-4, 0.01, 4.0, MODEL)
    out = run_sensor(np.full(1001, 0.1), np.full(1000, gain), cfg.link_budget, cfg.aoi_cost, cfg.tradeoff, con)
    assert np.all(out[:, _col("power")] == cfg.p_max_w)


def test_tiny_v_keeps_age_cost_under_threshold():
    m = harness.run_online_phase(SMALL.replace(v=1e-6, horizon=20000), MODEL).metrics
    assert m.f_avg <= SMALL.f_threshold * 1.05


def test_online_phase_deterministic():
    a = harness.run_online_phase(SMALL, MODEL)
    b = harness.run_online_phase(SMALL, MODEL)
    assert a.metrics == b.metrics
    np.testing.assert_array_equal(a.ccdf, b.ccdf)


def test_sensor_independence():
    # changing the other sensors' traffic leaves sensor 0 untouched
    base = harness.run_online_phase(SMALL.replace(sensor_hursts=(0.5, 0.5, 0.5)), MODEL, keep_records=[0, 1])
    other = harness.run_online_phase(SMALL.replace(sensor_hursts=(0.5, 0.8, 0.9)), MODEL, keep_records=[0, 1])
    np.testing.assert_array_equal(base.records[0], other.records[0])
    assert not np.array_equal(base.records[1], other.records[1])


def test_parallel_matches_serial():
    a = harness.run_online_phase(SMALL, MODEL).metrics
    b = harness.run_online_phase(SMALL.replace(workers=2), MODEL).metrics
    assert a == b


def test_ccdf_is_survival_function():
    res = harness.run_online_phase(SMALL.replace(v=1e5), MODEL)
    assert res.ccdf[0] <= 1.0 and res.ccdf[-1] >= 0.0
    assert np.all(np.diff(res.ccdf) <= 0)
    assert res.ccdf_delay[0] == 0.0


def test_single_sensor_training():
    res = harness.run_training_phase(SMALL.replace(num_sensors=1))
    assert res.proposed == res.fedavg == res.reports[0].model
    assert res.selection.tolist() == [True]


def test_iid_training_selects_everyone():
    res = harness.run_training_phase(SMALL.replace(num_sensors=10))
    assert res.selection.all()
    assert len(res.thresholds) == 10


def test_sweep_structure_check():
    ms = harness.sweep_v(SMALL, [1.0, 10**2.5, 1e5], MODEL)
    assert [m.v for m in ms] == [1.0, 10**2.5, 1e5]
    chk = harness.check_sweep_structure(ms)
    assert set(chk) >= {"interior_power_minimum", "peak_aoi_s_nondecreasing"}


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("num_sensors = 4\np_max_dbm = 0\nfading = none\nsensor_hursts = 0.5, 0.6, 0.7, 0.8\n")
    cfg = load_config(path, horizon=5000)
    assert cfg.num_sensors == 4 and cfg.horizon == 5000 and cfg.fading == "none"
    assert cfg.p_max_w == pytest.approx(1e-3)
    assert cfg.sensor_hurst(3) == 0.8
    path.write_text("[sim]\nbogus = 1\n")
    with pytest.raises(ValueError):
        load_config(path)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(horizon=10, warmup=10)
    with pytest.raises(ValueError):
        SimConfig(num_sensors=2, sensor_hursts=(0.5,))


def _cli(out, *args):
    flags = ["--seed", "7", "--num-sensors", "2", "--horizon", "3000", "--warmup", "100",
             "--exceedances", "20", "--iterations", "300", "--out", str(out)]
    assert main([args[0], *flags, *args[1:]]) == 0


def test_cli_outputs_are_byte_identical(tmp_path):
    for run in ("a", "b"):
        d = tmp_path / run
        _cli(d, "train")
        _cli(d, "simulate", "--model", str(d / "models.csv"))
        _cli(d, "sweep", "--model", str(d / "models.csv"), "--v-grid", "1", "1000")
    for name in ("models.csv", "selection.csv", "metrics.csv", "records.csv", "ccdf.csv", "sweep.csv"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False), name
    header = (tmp_path / "a" / "sweep.csv").read_text().splitlines()[0]
    assert header == ",".join(harness.SWEEP_FIELDS)
    assert (tmp_path / "a" / "ccdf.csv").read_text().startswith("delay_s,ccdf\n")


def test_cli_hurst(tmp_path, capsys, rng):
    path = tmp_path / "series.csv"
    path.write_text("value\n" + "\n".join(repr(float(v)) for v in rng.standard_normal(4096)) + "\n")
    assert main(["hurst", "--input", str(path)]) == 0
    h = float(capsys.readouterr().out)
    assert 0.5 <= h < 0.65


def test_cli_requires_seed(tmp_path):
    with pytest.raises(SystemExit):
        main(["train", "--out", str(tmp_path)])
