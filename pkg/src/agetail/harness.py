"""Two-phase experiment driver.

The training phase builds every sensor's local GPD from historical
inter-arrivals and aggregates them at the controller; the online phase
runs the power-control loop for a fixed global model.  Every random
stream is keyed by ``(master_seed, run, sensor, stream)`` so a sensor's
trajectory never depends on how many other sensors are simulated.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .aoi import AoiCostConfig
from .channel import ChannelModel, ChannelSampler, LinkBudget, dbm_to_watts
from .evt import GpdParams, extract_exceedances, fit_local
from .federated import LocalModelReport, fed_average, hurst_estimate, select_models
from .power import TradeoffConfig, UrllcConstraint
from .simulate import COLUMNS, records_from_array, run_sensor
from .traffic import TrafficGenerator, TrafficModel

log = logging.getLogger(__name__)

__all__ = [
    "SimConfig",
    "TrainingResult",
    "OnlineMetrics",
    "OnlineResult",
    "run_training_phase",
    "run_online_phase",
    "sweep_v",
    "selection_study",
    "check_sweep_structure",
    "load_config",
    "write_metrics_csv",
    "write_sweep_csv",
    "write_ccdf_csv",
    "write_records_csv",
    "DEFAULT_V_GRID",
    "SWEEP_FIELDS",
]

STREAM_HISTORY, STREAM_ONLINE, STREAM_CHANNEL = 0, 1, 2

# V multiplies power in watts, so the interesting range sits well above 1
DEFAULT_V_GRID = tuple(float(v) for v in 10.0 ** np.arange(0.0, 5.01, 0.5))
CCDF_GRID = np.round(np.arange(0.0, 0.4005, 0.001), 3)

SWEEP_FIELDS = (
    "v",
    "p_avg_w",
    "p_min_avg_w",
    "peak_aoi_s",
    "f_avg",
    "queue_delay_s",
    "tx_delay_s",
    "e2e_delay_s",
    "violation_prob",
)


@dataclass(frozen=True)
class SimConfig:
    """Flat run configuration; defaults reproduce the reference simulation setup.

    Decibel quantities are converted once, in ``__post_init__``.
    """

    num_sensors: int = 50
    bandwidth_hz: float = 1e6
    p_max_dbm: float = 10.0
    beta: float = 1.0
    data_bits: float = 1e4
    noise_dbm_hz: float = -174.0
    learning_rate: float = 0.01
    epsilon: float = 1e-4
    tail_quantile: float = 0.01
    f_threshold: float = 0.25
    iterations: int = 3000
    q_threshold_s: float = 0.2
    distance_m: float = 15.0
    carrier_ghz: float = 2.625
    fading: str = "rayleigh"
    mean_interarrival: float = 0.1
    underlying_std: float = 0.05
    hurst: float = 0.5
    sensor_hursts: Optional[tuple] = None
    exceedances: int = 80
    init_sigma: float = 1.0
    init_xi: float = 0.1
    restarts: int = 1
    v: float = 10.0**2.5
    horizon: int = 100_000
    warmup: int = 1000
    monte_carlo_runs: int = 1
    seed: int = 0
    workers: int = 1
    p_max_w: float = field(init=False, repr=False)
    noise_psd_w: float = field(init=False, repr=False)

    def __post_init__(self):
        if not self.horizon > self.warmup >= 0:
            raise ValueError("need horizon > warmup >= 0")
        if self.num_sensors < 1:
            raise ValueError("num_sensors must be >= 1")
        if self.sensor_hursts is not None:
            hs = tuple(float(h) for h in self.sensor_hursts)
            if len(hs) != self.num_sensors:
                raise ValueError("sensor_hursts needs one entry per sensor")
            object.__setattr__(self, "sensor_hursts", hs)
        object.__setattr__(self, "p_max_w", dbm_to_watts(self.p_max_dbm))
        object.__setattr__(self, "noise_psd_w", dbm_to_watts(self.noise_dbm_hz))

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    @property
    def link_budget(self) -> LinkBudget:
        return LinkBudget(self.bandwidth_hz, self.data_bits, self.noise_psd_w, self.num_sensors)

    @property
    def aoi_cost(self) -> AoiCostConfig:
        return AoiCostConfig(self.beta, self.f_threshold)

    @property
    def tradeoff(self) -> TradeoffConfig:
        return TradeoffConfig(self.v, self.p_max_w)

    @property
    def history_length(self) -> int:
        # nearest-rank thresholding leaves exactly this many exceedances
        return int(round(self.exceedances / self.tail_quantile))

    def sensor_hurst(self, k: int) -> float:
        return self.hurst if self.sensor_hursts is None else self.sensor_hursts[k]

    def traffic_model(self, k: int) -> TrafficModel:
        return TrafficModel(self.mean_interarrival, self.underlying_std, self.sensor_hurst(k))

    def channel_model(self) -> ChannelModel:
        return ChannelModel(self.distance_m, self.carrier_ghz, self.fading)

    def rng(self, run: int, sensor: int, stream: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, run, sensor, stream]))


_INT_KEYS = {f.name for f in dataclasses.fields(SimConfig) if f.type in ("int", int)}
_STR_KEYS = {"fading"}


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key == "sensor_hursts":
        return tuple(float(t) for t in raw.replace(",", " ").split()) if raw else None
    if key in _STR_KEYS:
        return raw
    if key in _INT_KEYS:
        return int(float(raw))
    return float(raw)


def load_config(path: Optional[Union[str, Path]] = None, **overrides) -> SimConfig:
    """Read ``key = value`` pairs (section ``[sim]`` optional) and apply overrides."""
    values = {}
    if path is not None:
        text = Path(path).read_text()
        if not text.lstrip().startswith("["):
            text = "[sim]\n" + text
        parser = configparser.ConfigParser()
        parser.read_string(text)
        known = {f.name for f in dataclasses.fields(SimConfig) if f.init}
        for section in parser.sections():
            for key, raw in parser[section].items():
                if key not in known:
                    raise ValueError(f"unknown config key {key!r}")
                values[key] = _coerce(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return SimConfig(**values)


@dataclass
class TrainingResult:
    proposed: GpdParams
    fedavg: GpdParams
    reports: list
    selection: np.ndarray
    thresholds: list  # per sensor (x0, tail_prob)


def _train_sensor(cfg: SimConfig, run: int, k: int):
    x = TrafficGenerator(cfg.traffic_model(k), cfg.rng(run, k, STREAM_HISTORY)).generate(cfg.history_length)
    exc = extract_exceedances(x, cfg.tail_quantile)
    model = fit_local(exc, GpdParams(cfg.init_sigma, cfg.init_xi), cfg.learning_rate, cfg.iterations)
    report = LocalModelReport(k, model, len(exc), hurst_estimate(x))
    return report, (exc.threshold_x0, exc.tail_prob)


def sensor_thresholds(cfg: SimConfig, run: int = 0) -> list:
    """Each sensor's (x0, tail_prob) from its historical data, without fitting."""
    out = []
    for k in range(cfg.num_sensors):
        x = TrafficGenerator(cfg.traffic_model(k), cfg.rng(run, k, STREAM_HISTORY)).generate(cfg.history_length)
        exc = extract_exceedances(x, cfg.tail_quantile)
        out.append((exc.threshold_x0, exc.tail_prob))
    return out


def run_training_phase(cfg: SimConfig, run: int = 0) -> TrainingResult:
    """Local fits, Hurst estimates, model selection and both global models."""
    reports, thresholds = [], []
    for k in range(cfg.num_sensors):
        rep, thr = _train_sensor(cfg, run, k)
        reports.append(rep)
        thresholds.append(thr)
    rng = cfg.rng(run, cfg.num_sensors, STREAM_HISTORY)
    selection = select_models(reports, restarts=cfg.restarts, rng=rng)
    return TrainingResult(
        proposed=fed_average(reports, selection),
        fedavg=fed_average(reports),
        reports=reports,
        selection=selection,
        thresholds=thresholds,
    )


@dataclass(frozen=True)
class OnlineMetrics:
    v: float
    p_avg_w: float
    p_min_avg_w: float
    peak_aoi_s: float
    f_avg: float
    queue_delay_s: float
    tx_delay_s: float
    e2e_delay_s: float
    violation_prob: float
    stay_time_s: float
    infeasible_rate: float
    virtual_queue_end: float
    samples: int

    def row(self) -> list:
        return [getattr(self, f) for f in SWEEP_FIELDS]


@dataclass
class OnlineResult:
    metrics: OnlineMetrics
    ccdf_delay: np.ndarray
    ccdf: np.ndarray
    records: dict  # sensor_id -> array with columns COLUMNS (post warm-up)


_SUM_COLS = ("power", "p_min", "peak_aoi", "cost", "queue_delay", "tx_time", "stay_time", "infeasible")


def _online_sensor(args):
    cfg, model, threshold, run, k, keep = args
    x0, tail_prob = threshold
    constraint = UrllcConstraint(cfg.q_threshold_s, cfg.epsilon, tail_prob, x0, model)
    x = TrafficGenerator(cfg.traffic_model(k), cfg.rng(run, k, STREAM_ONLINE)).generate(cfg.horizon + 1)
    g = ChannelSampler(cfg.channel_model(), cfg.rng(run, k, STREAM_CHANNEL)).draw_many(cfg.horizon)
    out = run_sensor(x, g, cfg.link_budget, cfg.aoi_cost, cfg.tradeoff, constraint)
    z_end = out[-1, COLUMNS.index("virtual_queue")]
    kept = out[cfg.warmup :]
    sums = {c: float(kept[:, COLUMNS.index(c)].sum()) for c in _SUM_COLS}
    q = np.sort(kept[:, COLUMNS.index("queue_delay")])
    above = q.size - np.searchsorted(q, CCDF_GRID, side="right")
    viol = int(q.size - np.searchsorted(q, cfg.q_threshold_s, side="right"))
    return k, kept.shape[0], sums, above, viol, z_end, (kept if keep else None)


def _map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def run_online_phase(
    cfg: SimConfig,
    model: GpdParams,
    thresholds: Optional[Sequence] = None,
    run: int = 0,
    keep_records: Sequence[int] = (),
) -> OnlineResult:
    """Simulate all sensors for ``cfg.horizon`` transmissions under ``model``.

    ``thresholds`` gives each sensor's (x0, tail_prob); by default they are
    recomputed from the same historical data the training phase used.
    Averages are pooled over sensors after discarding ``cfg.warmup`` slots.
    """
    if thresholds is None:
        thresholds = sensor_thresholds(cfg, run)
    keep = set(keep_records)
    jobs = [(cfg, model, thresholds[k], run, k, k in keep) for k in range(cfg.num_sensors)]
    results = sorted(_map(_online_sensor, jobs, cfg.workers), key=lambda r: r[0])
    n = sum(r[1] for r in results)
    tot = {c: sum(r[2][c] for r in results) for c in _SUM_COLS}
    above = sum(r[3] for r in results)
    viol = sum(r[4] for r in results)
    qd = tot["queue_delay"] / n
    td = tot["tx_time"] / n
    metrics = OnlineMetrics(
        v=cfg.v,
        p_avg_w=tot["power"] / n,
        p_min_avg_w=tot["p_min"] / n,
        peak_aoi_s=tot["peak_aoi"] / n,
        f_avg=tot["cost"] / n,
        queue_delay_s=qd,
        tx_delay_s=td,
        e2e_delay_s=qd + td,
        violation_prob=viol / n,
        stay_time_s=tot["stay_time"] / n,
        infeasible_rate=tot["infeasible"] / n,
        virtual_queue_end=float(np.mean([r[5] for r in results])),
        samples=n,
    )
    records = {r[0]: r[6] for r in results if r[6] is not None}
    return OnlineResult(metrics, CCDF_GRID.copy(), above / n, records)


def sweep_v(
    cfg: SimConfig,
    v_values: Sequence[float],
    model: GpdParams,
    thresholds: Optional[Sequence] = None,
) -> list[OnlineMetrics]:
    """Online phase once per V, with common random numbers across V."""
    if len(v_values) == 0:
        raise ValueError("empty V grid")
    if thresholds is None:
        thresholds = sensor_thresholds(cfg)
    out = []
    for v in v_values:
        m = run_online_phase(cfg.replace(v=float(v)), model, thresholds).metrics
        log.info("V=%.3g P=%.3e Pmin=%.3e A=%.4f viol=%.2e", v, m.p_avg_w, m.p_min_avg_w, m.peak_aoi_s, m.violation_prob)
        out.append(m)
    return out


def _inversions(values) -> int:
    return int(np.sum(np.diff(np.asarray(values)) < 0))


def check_sweep_structure(metrics: Sequence[OnlineMetrics], allowed_inversions: int = 1) -> dict:
    """Qualitative shape of a V sweep: interior power minimum, monotone age and delays."""
    p = [m.p_avg_w for m in metrics]
    i_min = int(np.argmin(p))
    out = {"interior_power_minimum": 0 < i_min < len(p) - 1, "argmin_index": i_min}
    for name in ("peak_aoi_s", "f_avg", "queue_delay_s", "tx_delay_s", "e2e_delay_s"):
        out[f"{name}_nondecreasing"] = _inversions([getattr(m, name) for m in metrics]) <= allowed_inversions
    return out


@dataclass
class SelectionStudy:
    exceedances: int
    rounds: int
    proposed: np.ndarray  # (rounds, 2)
    fedavg: np.ndarray
    selected_counts: np.ndarray

    @property
    def proposed_std(self) -> np.ndarray:
        return self.proposed.std(axis=0, ddof=1)

    @property
    def fedavg_std(self) -> np.ndarray:
        return self.fedavg.std(axis=0, ddof=1)


def selection_study(cfg: SimConfig, rounds: int) -> SelectionStudy:
    """Repeat the training phase ``rounds`` times and collect both global models."""
    prop, avg, nsel = [], [], []
    for r in range(rounds):
        res = run_training_phase(cfg, run=r)
        prop.append(res.proposed.as_array())
        avg.append(res.fedavg.as_array())
        nsel.append(int(res.selection.sum()))
    return SelectionStudy(cfg.exceedances, rounds, np.array(prop), np.array(avg), np.array(nsel))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_sweep_csv(metrics: Sequence[OnlineMetrics], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_FIELDS)
        for m in metrics:
            w.writerow([_fmt(v) for v in m.row()])


def write_metrics_csv(metrics: OnlineMetrics, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        for f in dataclasses.fields(metrics):
            w.writerow([f.name, _fmt(getattr(metrics, f.name))])


def write_ccdf_csv(result: OnlineResult, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delay_s", "ccdf"])
        for d, c in zip(result.ccdf_delay, result.ccdf):
            w.writerow([_fmt(d), _fmt(c)])


RECORD_FIELDS = (
    "sensor_id",
    "index",
    "power_w",
    "tx_time_s",
    "queue_delay_s",
    "peak_aoi_s",
    "interarrival_s",
    "virtual_queue",
    "p_min_w",
    "infeasible",
)


def write_records_csv(result: OnlineResult, path: Union[str, Path], warmup: int = 0) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for k in sorted(result.records):
            for rec in records_from_array(result.records[k], k, start_index=warmup + 1):
                w.writerow(
                    [
                        rec.sensor_id,
                        rec.index,
                        _fmt(rec.power),
                        _fmt(rec.tx_time),
                        _fmt(rec.queue_delay),
                        _fmt(rec.peak_aoi),
                        _fmt(rec.interarrival),
                        _fmt(rec.virtual_queue),
                        _fmt(rec.p_min),
                        int(rec.infeasible),
                    ]
                )
