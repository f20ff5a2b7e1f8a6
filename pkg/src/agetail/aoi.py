"""Queuing delay, age of information and the virtual age-cost queue."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "AoiCostConfig",
    "SensorState",
    "peak_aoi",
    "advance_queue",
    "advance_virtual_queue",
    "age_cost",
    "aoi_trajectory",
]


@dataclass(frozen=True)
class AoiCostConfig:
    beta: float = 1.0
    f_threshold: float = 0.25

    def __post_init__(self):
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if not self.f_threshold > 0:
            raise ValueError("f_threshold must be positive")


@dataclass
class SensorState:
    """Head-of-line state of one sensor between transmissions.

    ``aoi_anchor`` is the age of the last received update at its reception
    instant ``last_reception``; before any reception both are zero.
    """

    queue_delay: float = 0.0
    virtual_queue: float = 0.0
    aoi_anchor: float = 0.0
    last_reception: float = 0.0
    index: int = 1

    def slot_constant(self, interarrival: float) -> float:
        """Age already accumulated when the new update starts transmission."""
        return self.aoi_anchor + max(interarrival - self.aoi_anchor, 0.0)


def peak_aoi(aoi_anchor: float, interarrival: float, tx_time: float) -> float:
    if min(aoi_anchor, interarrival, tx_time) < 0:
        raise ValueError("inputs must be non-negative")
    return aoi_anchor + max(interarrival - aoi_anchor, 0.0) + tx_time


def advance_queue(queue_delay: float, tx_time: float, next_interarrival: float) -> float:
    if queue_delay < 0 or tx_time < 0 or next_interarrival <= 0:
        raise ValueError("invalid queue inputs")
    return max(queue_delay + tx_time - next_interarrival, 0.0)


def age_cost(peak: float, beta: float) -> float:
    return peak**beta / beta


def advance_virtual_queue(z: float, peak: float, cfg: AoiCostConfig) -> float:
    if z < 0:
        raise ValueError("virtual queue must be non-negative")
    return max(z + age_cost(peak, cfg.beta) - cfg.f_threshold, 0.0)


def aoi_trajectory(records: Iterable, times) -> np.ndarray:
    """Sample the sawtooth AoI at ``times``.

    ``records`` yield objects with ``reception_time``, ``queue_delay`` and
    ``tx_time`` in temporal order.  Times before the first reception give NaN.
    Sampling exactly at a reception instant returns the reset value.
    """
    recs = list(records)
    t_rx = np.array([r.reception_time for r in recs], dtype=float)
    if np.any(np.diff(t_rx) < 0):
        raise ValueError("records must be in temporal order")
    reset = np.array([r.queue_delay + r.tx_time for r in recs], dtype=float)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    idx = np.searchsorted(t_rx, times, side="right") - 1
    out = np.full(times.shape, np.nan)
    ok = idx >= 0
    out[ok] = reset[idx[ok]] + times[ok] - t_rx[idx[ok]]
    return out
