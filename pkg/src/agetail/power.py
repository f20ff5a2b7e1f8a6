"""Tail-constrained minimum power and the per-transmission drift-plus-penalty solve.

The queuing-delay constraint ``Pr{q' > q_th} <= eps`` turns, through the
GPD tail of ``X = -ln x``, into a cap on the transmission time:

    T <= q_th - q + d,   d = exp{(sigma/xi)[1 - (eps/Fbar)^(-xi)] - x0}

and hence into a floor on power.  ``d`` only depends on the tail model, so
the simulator computes it once per sensor (:func:`tail_allowance`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from numba import njit

from .aoi import AoiCostConfig, SensorState
from .channel import LN2, LinkBudget, tx_time, tx_time_slope
from .evt import GpdParams

__all__ = [
    "UrllcConstraint",
    "TradeoffConfig",
    "tail_allowance",
    "min_power",
    "slot_objective",
    "slot_derivative",
    "solve_per_slot",
    "stationarity_residual",
]

XI_LIMIT_EPS = 1e-6
MAX_BISECT = 64
GOLDEN_ITERS = 200


@dataclass(frozen=True)
class UrllcConstraint:
    q_threshold: float
    epsilon: float
    tail_prob: float
    x0: float
    gpd: GpdParams

    def __post_init__(self):
        if not self.q_threshold > 0:
            raise ValueError("q_threshold must be positive")
        if not 0 < self.epsilon < self.tail_prob < 1:
            raise ValueError("need 0 < epsilon < tail_prob < 1")


@dataclass(frozen=True)
class TradeoffConfig:
    v: float
    p_max: float

    def __post_init__(self):
        if self.v < 0:
            raise ValueError("V must be non-negative")
        if not self.p_max > 0:
            raise ValueError("p_max must be positive")


def tail_allowance(c: UrllcConstraint) -> float:
    """Largest ``q + T - q_th`` meeting the tail constraint."""
    sigma, xi = c.gpd.sigma, c.gpd.xi
    ratio = c.epsilon / c.tail_prob
    if abs(xi) < XI_LIMIT_EPS:
        expo = sigma * math.log(ratio)
    else:
        expo = sigma / xi * (1.0 - ratio ** (-xi))
    return math.exp(expo - c.x0)


@njit(cache=True)
def min_power_kernel(load, snr_coef, q_threshold, allowance, queue_delay):
    """Power floor; inf when the deadline budget is non-positive or overflows."""
    budget = q_threshold - queue_delay + allowance
    if budget <= 0.0:
        return math.inf
    arg = load * LN2 / budget
    if arg > 700.0:
        return math.inf
    return math.expm1(arg) / snr_coef


def min_power(
    c: UrllcConstraint,
    budget: LinkBudget,
    gain: float,
    queue_delay: float,
    p_max: Optional[float] = None,
) -> Optional[float]:
    """Minimum transmit power meeting the tail constraint; ``None`` if infeasible.

    Infeasible means the deadline budget ``q_th - q + d`` is non-positive or,
    when ``p_max`` is given, the floor exceeds it.
    """
    if gain <= 0:
        raise ValueError("gain must be positive")
    p = min_power_kernel(budget.load, budget.snr_per_watt(gain), c.q_threshold, tail_allowance(c), queue_delay)
    if math.isinf(p) or (p_max is not None and p > p_max):
        return None
    return float(p)


@njit(cache=True)
def objective_kernel(p, c, z, beta, v, load, snr_coef):
    age = c + tx_time(load, snr_coef, p)
    return z * age**beta / beta + age ** (2.0 * beta) / (2.0 * beta * beta) + v * p


@njit(cache=True)
def derivative_kernel(p, c, z, beta, v, load, snr_coef):
    age = c + tx_time(load, snr_coef, p)
    slope = tx_time_slope(load, snr_coef, p)
    weight = z * age ** (beta - 1.0) + age ** (2.0 * beta - 1.0) / beta
    return weight * slope + v


@njit(cache=True)
def _golden(lo, hi, c, z, beta, v, load, snr_coef):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1 = objective_kernel(x1, c, z, beta, v, load, snr_coef)
    f2 = objective_kernel(x2, c, z, beta, v, load, snr_coef)
    for _ in range(GOLDEN_ITERS):
        if b - a <= 1e-15 * b:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = objective_kernel(x1, c, z, beta, v, load, snr_coef)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = objective_kernel(x2, c, z, beta, v, load, snr_coef)
    best = 0.5 * (a + b)
    fb = objective_kernel(best, c, z, beta, v, load, snr_coef)
    # never return worse than an endpoint
    f_lo = objective_kernel(lo, c, z, beta, v, load, snr_coef)
    f_hi = objective_kernel(hi, c, z, beta, v, load, snr_coef)
    if f_lo < fb and f_lo <= f_hi:
        return lo
    if f_hi < fb:
        return hi
    return best


@njit(cache=True)
def solve_kernel(c, z, beta, v, load, snr_coef, p_lo, p_hi):
    """Minimise the per-slot objective over [p_lo, p_hi] (p_hi > 0).

    The derivative is increasing in P, so its sign change is bracketed by
    bisection; geometric midpoints once the bracket is positive since the
    optimum can sit decades below ``p_hi``.
    """
    if p_lo >= p_hi:
        return p_hi
    g_hi = derivative_kernel(p_hi, c, z, beta, v, load, snr_coef)
    if not math.isfinite(g_hi):
        return _golden(p_lo, p_hi, c, z, beta, v, load, snr_coef)
    if g_hi <= 0.0:
        return p_hi
    lo = p_lo
    hi = p_hi
    if lo > 0.0:
        g_lo = derivative_kernel(lo, c, z, beta, v, load, snr_coef)
        if math.isnan(g_lo):
            return _golden(p_lo, p_hi, c, z, beta, v, load, snr_coef)
        if g_lo >= 0.0:
            return lo
    for _ in range(MAX_BISECT):
        if lo > 0.0:
            if hi - lo <= 1e-13 * hi:
                break
            mid = math.sqrt(lo * hi)
        else:
            if hi <= 1e-300:
                break
            mid = 0.5 * hi
        g = derivative_kernel(mid, c, z, beta, v, load, snr_coef)
        if math.isnan(g):
            return _golden(p_lo, p_hi, c, z, beta, v, load, snr_coef)
        if g > 0.0:
            hi = mid
        else:
            lo = mid
    if lo <= 0.0:
        return hi
    return math.sqrt(lo * hi)


def slot_objective(power, c_n, z, cfg: TradeoffConfig, aoi_cfg: AoiCostConfig, budget: LinkBudget, gain):
    return float(objective_kernel(power, c_n, z, aoi_cfg.beta, cfg.v, budget.load, budget.snr_per_watt(gain)))


def slot_derivative(power, c_n, z, cfg: TradeoffConfig, aoi_cfg: AoiCostConfig, budget: LinkBudget, gain):
    return float(derivative_kernel(power, c_n, z, aoi_cfg.beta, cfg.v, budget.load, budget.snr_per_watt(gain)))


def solve_per_slot(
    state: SensorState,
    c_n: float,
    cfg: TradeoffConfig,
    aoi_cfg: AoiCostConfig,
    budget: LinkBudget,
    gain: float,
    p_min: float,
) -> float:
    """Power minimising the drift-plus-penalty bound, clamped to [p_min, p_max]."""
    if not 0 <= p_min <= cfg.p_max:
        raise ValueError("need 0 <= p_min <= p_max")
    if c_n < 0:
        raise ValueError("c_n must be non-negative")
    return float(
        solve_kernel(
            c_n, state.virtual_queue, aoi_cfg.beta, cfg.v, budget.load, budget.snr_per_watt(gain), p_min, cfg.p_max
        )
    )


def stationarity_residual(power, c_n, z, cfg: TradeoffConfig, aoi_cfg: AoiCostConfig, budget: LinkBudget, gain):
    """|RHS - V| / V of the interior optimality condition at ``power``."""
    g = slot_derivative(power, c_n, z, cfg, aoi_cfg, budget, gain)
    return abs(g) / cfg.v
