"""Uplink channel: indoor path loss, block fading and transmission time."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

__all__ = [
    "ChannelModel",
    "LinkBudget",
    "ChannelSampler",
    "path_loss_db",
    "draw_gain",
    "transmission_time",
    "dbm_to_watts",
]

LN2 = math.log(2.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1e3


def path_loss_db(distance_m: float, carrier_ghz: float) -> float:
    """``33 log10(d) + 20 log10(fc) + 32`` dB."""
    if distance_m <= 0:
        raise ValueError("distance must be positive")
    return 33.0 * math.log10(distance_m) + 20.0 * math.log10(carrier_ghz) + 32.0


@dataclass(frozen=True)
class ChannelModel:
    distance_m: float = 15.0
    carrier_ghz: float = 2.625
    fading: str = "rayleigh"
    seed: int = 0

    def __post_init__(self):
        if self.fading not in ("none", "rayleigh"):
            raise ValueError(f"unknown fading mode {self.fading!r}")
        if not self.distance_m > 0:
            raise ValueError("distance must be positive")

    @property
    def path_gain(self) -> float:
        return 10.0 ** (-path_loss_db(self.distance_m, self.carrier_ghz) / 10.0)


@dataclass(frozen=True)
class LinkBudget:
    """Orthogonal equal split of ``bandwidth_hz`` among ``num_sensors``."""

    bandwidth_hz: float = 1e6
    data_bits: float = 1e4
    noise_psd: float = dbm_to_watts(-174.0)  # W/Hz
    num_sensors: int = 50

    def __post_init__(self):
        for name in ("bandwidth_hz", "data_bits", "noise_psd", "num_sensors"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def bandwidth_per_sensor(self) -> float:
        return self.bandwidth_hz / self.num_sensors

    @property
    def load(self) -> float:
        """K*D/W: transmission time at unit spectral efficiency (s)."""
        return self.num_sensors * self.data_bits / self.bandwidth_hz

    def snr_per_watt(self, gain: float) -> float:
        """K*h/(W*N0): received SNR per watt of transmit power."""
        return self.num_sensors * gain / (self.bandwidth_hz * self.noise_psd)


class ChannelSampler:
    """Per-sensor gain source; draw ``i`` depends only on the seed and ``i``."""

    def __init__(self, model: ChannelModel, rng: Optional[np.random.Generator] = None):
        self.model = model
        self.rng = rng if rng is not None else np.random.default_rng(model.seed)

    def draw(self) -> float:
        return float(self.draw_many(1)[0])

    def draw_many(self, n: int) -> np.ndarray:
        g = self.model.path_gain
        if self.model.fading == "none":
            return np.full(n, g)
        return g * self.rng.standard_exponential(n)


def draw_gain(model: ChannelModel) -> float:
    """First gain draw for ``model``'s seed."""
    return ChannelSampler(model).draw()


@njit(cache=True)
def tx_time(load, snr_coef, power):
    """K*D / (W log2(1 + snr_coef * P)); inf at P = 0."""
    if power <= 0.0:
        return math.inf
    rate = math.log1p(snr_coef * power)
    if rate <= 0.0:
        return math.inf
    return load * LN2 / rate


@njit(cache=True)
def tx_time_slope(load, snr_coef, power):
    """dT/dP (negative)."""
    u = snr_coef * power
    rate = math.log1p(u)
    if rate <= 0.0:
        return -math.inf
    return -load * LN2 * snr_coef / ((1.0 + u) * rate * rate)


def transmission_time(budget: LinkBudget, gain: float, power: float) -> float:
    if power <= 0:
        raise ValueError("transmission time is undefined for non-positive power")
    if gain <= 0:
        raise ValueError("gain must be positive")
    return float(tx_time(budget.load, budget.snr_per_watt(gain), power))
