"""Command line entry point: ``agetail {train,simulate,sweep,hurst,study}``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .federated import fed_average, hurst_estimate, read_reports, read_selection, write_reports, write_selection
from .harness import SimConfig, load_config

log = logging.getLogger("agetail")

_HELP = {
    "num_sensors": "K, number of sensors",
    "p_max_dbm": "sensor power budget (dBm)",
    "noise_dbm_hz": "noise PSD (dBm/Hz)",
    "v": "drift-plus-penalty tradeoff weight (power in W)",
    "sensor_hursts": "per-sensor Hurst exponents, comma separated",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--seed", type=int, required=True, help="master seed")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    for f in dataclasses.fields(SimConfig):
        if not f.init or f.name == "seed":
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.name == "sensor_hursts":
            p.add_argument(flag, type=str, default=None, help=_HELP.get(f.name))
        else:
            kind = type(f.default) if f.default is not None else float
            p.add_argument(flag, type=kind, default=None, help=_HELP.get(f.name, f"default {f.default}"))


def _config(args) -> SimConfig:
    overrides = {}
    for f in dataclasses.fields(SimConfig):
        if f.init and f.name != "seed":
            val = getattr(args, f.name, None)
            if f.name == "sensor_hursts" and val is not None:
                val = tuple(float(t) for t in val.split(","))
            overrides[f.name] = val
    overrides["seed"] = args.seed
    return load_config(args.config, **overrides)


def cmd_train(args) -> int:
    cfg = _config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    res = harness.run_training_phase(cfg)
    write_reports(res.reports, args.out / "models.csv", thresholds=res.thresholds)
    write_selection(res.reports, res.selection, args.out / "selection.csv")
    log.info("proposed %s | fedavg %s | selected %d/%d", res.proposed, res.fedavg, res.selection.sum(), cfg.num_sensors)
    return 0


def _load_model(args, cfg):
    reports, thresholds = read_reports(args.model)
    if len(reports) != cfg.num_sensors:
        raise SystemExit(f"{args.model} has {len(reports)} sensors, config expects {cfg.num_sensors}")
    sel_path = args.selection or args.model.with_name("selection.csv")
    selection = read_selection(sel_path) if Path(sel_path).exists() and not args.fedavg else None
    return fed_average(reports, selection), thresholds


def cmd_simulate(args) -> int:
    cfg = _config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    model, thresholds = _load_model(args, cfg)
    res = harness.run_online_phase(cfg, model, thresholds, keep_records=args.record_sensors)
    harness.write_metrics_csv(res.metrics, args.out / "metrics.csv")
    harness.write_ccdf_csv(res, args.out / "ccdf.csv")
    harness.write_records_csv(res, args.out / "records.csv", warmup=cfg.warmup)
    log.info("%s", res.metrics)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    if args.model is not None:
        model, thresholds = _load_model(args, cfg)
    else:
        res = harness.run_training_phase(cfg)
        model, thresholds = res.proposed, res.thresholds
    grid = args.v_grid if args.v_grid else list(harness.DEFAULT_V_GRID)
    metrics = harness.sweep_v(cfg, grid, model, thresholds)
    harness.write_sweep_csv(metrics, args.out / "sweep.csv")
    return 0


def cmd_hurst(args) -> int:
    with open(args.input, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        float(rows[0][args.column])
    except ValueError:
        rows = rows[1:]
    series = np.array([float(r[args.column]) for r in rows])
    print(f"{hurst_estimate(series, clamp=not args.raw):.6f}")
    return 0


def cmd_study(args) -> int:
    cfg = _config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    st = harness.selection_study(cfg, args.rounds)
    with open(args.out / "study.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["exceedances", "rounds", "scheme", "sigma_std", "xi_std"])
        w.writerow([cfg.exceedances, args.rounds, "proposed", *(repr(float(v)) for v in st.proposed_std)])
        w.writerow([cfg.exceedances, args.rounds, "fedavg", *(repr(float(v)) for v in st.fedavg_std)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agetail", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit local GPDs and select models (models.csv, selection.csv)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    for name, func, help_ in (
        ("simulate", cmd_simulate, "online power control (metrics.csv, records.csv, ccdf.csv)"),
        ("sweep", cmd_sweep, "online phase over a V grid (sweep.csv)"),
    ):
        p = sub.add_parser(name, help=help_)
        _add_config_flags(p)
        p.add_argument("--model", type=Path, required=name == "simulate", help="models.csv from `train`")
        p.add_argument("--selection", type=Path, help="selection.csv (default: next to --model)")
        p.add_argument("--fedavg", action="store_true", help="ignore the selection, average all models")
        if name == "simulate":
            p.add_argument("--record-sensors", type=int, nargs="*", default=[0], help="sensors written to records.csv")
        else:
            p.add_argument("--v-grid", type=float, nargs="+", help="V values (default 10^0..10^5, half decades)")
        p.set_defaults(func=func)

    p = sub.add_parser("hurst", help="R/S Hurst estimate of a CSV column")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--column", type=int, default=0)
    p.add_argument("--raw", action="store_true", help="do not clamp to [0.5, 1)")
    p.set_defaults(func=cmd_hurst)

    p = sub.add_parser("study", help="spread of the global model, proposed vs FedAvg (study.csv)")
    _add_config_flags(p)
    p.add_argument("--rounds", type=int, default=200)
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
