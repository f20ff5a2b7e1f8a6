"""Per-sensor transmission loop.

``run_sensor`` is the compiled hot loop used by the harness;
``run_sensor_reference`` walks the same recursion through the public
per-slot functions and exists to cross-check it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .aoi import AoiCostConfig, SensorState, advance_queue, advance_virtual_queue, peak_aoi
from .channel import LinkBudget, transmission_time, tx_time
from .power import TradeoffConfig, UrllcConstraint, min_power, min_power_kernel, solve_kernel, solve_per_slot, tail_allowance

__all__ = ["TransmissionRecord", "COLUMNS", "run_sensor", "run_sensor_reference", "records_from_array"]

COLUMNS = (
    "power",
    "p_min",
    "tx_time",
    "queue_delay",
    "peak_aoi",
    "interarrival",
    "virtual_queue",
    "infeasible",
    "cost",
    "stay_time",
    "reception_time",
)
_COL = {name: i for i, name in enumerate(COLUMNS)}


@dataclass(frozen=True)
class TransmissionRecord:
    sensor_id: int
    index: int
    power: float
    tx_time: float
    queue_delay: float
    peak_aoi: float
    interarrival: float
    virtual_queue: float
    p_min: float
    infeasible: bool
    reception_time: float = math.nan


@njit(cache=True)
def _run(x, gains, load, snr_per_gain, beta, f_th, v, p_max, q_th, allowance, out):
    n_tx = gains.size
    anchor = 0.0
    q = 0.0
    z = 0.0
    arrival = 0.0
    for n in range(n_tx):
        xn = x[n]
        arrival += xn
        c = anchor + max(xn - anchor, 0.0)
        snr_coef = snr_per_gain * gains[n]
        p_min = min_power_kernel(load, snr_coef, q_th, allowance, q)
        infeasible = p_min > p_max
        lo = p_max if infeasible else p_min
        p = solve_kernel(c, z, beta, v, load, snr_coef, lo, p_max)
        t = tx_time(load, snr_coef, p)
        peak = c + t
        cost = peak**beta / beta
        out[n, 0] = p
        out[n, 1] = lo
        out[n, 2] = t
        out[n, 3] = q
        out[n, 4] = peak
        out[n, 5] = xn
        out[n, 6] = z
        out[n, 7] = 1.0 if infeasible else 0.0
        out[n, 8] = cost
        out[n, 9] = peak - anchor
        out[n, 10] = arrival + q + t
        z = max(z + cost - f_th, 0.0)
        anchor = q + t
        q = max(anchor - x[n + 1], 0.0)


def run_sensor(
    interarrivals: np.ndarray,
    gains: np.ndarray,
    budget: LinkBudget,
    aoi_cfg: AoiCostConfig,
    tradeoff: TradeoffConfig,
    constraint: UrllcConstraint,
) -> np.ndarray:
    """Simulate ``len(gains)`` transmissions; needs one more inter-arrival than gains.

    Returns an array with one row per transmission and columns ``COLUMNS``.
    Infeasible slots transmit at ``p_max`` and report ``p_min = p_max``.
    """
    x = np.ascontiguousarray(interarrivals, dtype=float)
    g = np.ascontiguousarray(gains, dtype=float)
    if x.size != g.size + 1:
        raise ValueError("need len(interarrivals) == len(gains) + 1")
    out = np.empty((g.size, len(COLUMNS)))
    _run(
        x,
        g,
        budget.load,
        budget.snr_per_watt(1.0),
        float(aoi_cfg.beta),
        aoi_cfg.f_threshold,
        tradeoff.v,
        tradeoff.p_max,
        constraint.q_threshold,
        tail_allowance(constraint),
        out,
    )
    return out


def run_sensor_reference(
    interarrivals,
    gains,
    budget: LinkBudget,
    aoi_cfg: AoiCostConfig,
    tradeoff: TradeoffConfig,
    constraint: UrllcConstraint,
    sensor_id: int = 0,
) -> list[TransmissionRecord]:
    """Slow, readable version of :func:`run_sensor` built from the public operations."""
    state = SensorState()
    records = []
    arrival = 0.0
    for n, gain in enumerate(gains):
        xn = float(interarrivals[n])
        arrival += xn
        c = state.slot_constant(xn)
        p_min = min_power(constraint, budget, gain, state.queue_delay, p_max=tradeoff.p_max)
        infeasible = p_min is None
        floor = tradeoff.p_max if infeasible else p_min
        p = solve_per_slot(state, c, tradeoff, aoi_cfg, budget, gain, floor)
        t = transmission_time(budget, gain, p)
        peak = peak_aoi(state.aoi_anchor, xn, t)
        rx = arrival + state.queue_delay + t
        records.append(
            TransmissionRecord(sensor_id, state.index, p, t, state.queue_delay, peak, xn, state.virtual_queue, floor, infeasible, rx)
        )
        state.virtual_queue = advance_virtual_queue(state.virtual_queue, peak, aoi_cfg)
        q_next = advance_queue(state.queue_delay, t, float(interarrivals[n + 1]))
        state.aoi_anchor = state.queue_delay + t
        state.last_reception = rx
        state.queue_delay = q_next
        state.index += 1
    return records


def records_from_array(rows: np.ndarray, sensor_id: int, start_index: int = 1) -> list[TransmissionRecord]:
    return [
        TransmissionRecord(
            sensor_id,
            start_index + i,
            r[_COL["power"]],
            r[_COL["tx_time"]],
            r[_COL["queue_delay"]],
            r[_COL["peak_aoi"]],
            r[_COL["interarrival"]],
            r[_COL["virtual_queue"]],
            r[_COL["p_min"]],
            bool(r[_COL["infeasible"]]),
            r[_COL["reception_time"]],
        )
        for i, r in enumerate(rows)
    ]
