import math

import numpy as np
import pytest

from agetail.aoi import AoiCostConfig, SensorState
from agetail.channel import ChannelModel, LinkBudget, dbm_to_watts
from agetail.evt import GpdParams
from agetail.power import (
    TradeoffConfig,
    UrllcConstraint,
    min_power,
    slot_objective,
    solve_per_slot,
    stationarity_residual,
    tail_allowance,
)

BUDGET = LinkBudget()
GAIN = ChannelModel().path_gain
P_MAX = dbm_to_watts(10)

# Independent 40-digit evaluation of the minimum-power formula with
# K=50, D=1e4, W=1e6, N0=-174 dBm/Hz, h=1e-8, q=0, q_th=0.2, x0=2,
# eps/Fbar = e^-2, sigma=1 (xi -> 0 and xi = 0.2).
PMIN_XI0 = 3.098427626577434460513523e-8
PMIN_XI02 = 3.30054978430027330791773e-8
DEADLINE_XI0 = 0.218315638888734180293718  # q_th - q + exp(sigma ln r - x0)


def _constraint(xi=0.0, sigma=1.0, x0=2.0):
    tail = 0.05
    return UrllcConstraint(0.2, tail * math.exp(-2.0), tail, x0, GpdParams(sigma, xi))


def test_allowance_exponential_limit():
    c = _constraint()
    assert 0.2 + tail_allowance(c) == pytest.approx(DEADLINE_XI0, rel=1e-14)


def test_allowance_continuous_across_xi_zero():
    base = tail_allowance(_constraint(0.0))
    for xi in (2e-6, -2e-6, 1e-5):
        assert tail_allowance(_constraint(xi)) == pytest.approx(base, rel=1e-4)


@pytest.mark.parametrize("xi, expected", [(0.0, PMIN_XI0), (0.2, PMIN_XI02)])
def test_min_power_matches_high_precision(xi, expected):
    assert min_power(_constraint(xi), BUDGET, 1e-8, 0.0) == pytest.approx(expected, rel=1e-12)


def test_min_power_vanishes_for_large_slack():
    p = min_power(_constraint(), BUDGET, GAIN, queue_delay=-1e9)
    assert 0.0 <= p < 1e-12


def test_min_power_infeasible_cases():
    c = _constraint()
    assert min_power(c, BUDGET, GAIN, queue_delay=0.5) is None
    assert min_power(c, BUDGET, GAIN, queue_delay=0.2, p_max=P_MAX) is None
    assert min_power(c, BUDGET, GAIN, queue_delay=0.0, p_max=P_MAX) is not None


def test_min_power_meets_tail_constraint_by_monte_carlo(rng):
    # inter-arrivals whose -ln(x) tail is exactly GPD(1, 0) above x0
    sigma, x0, tail, eps = 1.0, 3.0, 0.02, 1e-4
    c = UrllcConstraint(0.2, eps, tail, x0, GpdParams(sigma, 0.0))
    q = 0.15
    p = min_power(c, BUDGET, GAIN, q)
    t = BUDGET.load / math.log2(1 + BUDGET.snr_per_watt(GAIN) * p)
    n = 2_000_000
    is_tail = rng.random(n) < tail
    big_x = np.where(is_tail, x0 + rng.exponential(sigma, n), rng.uniform(0, x0, n))
    viol = np.mean(q + t - np.exp(-big_x) > 0.2)
    assert viol <= eps * (1 + 3 / math.sqrt(eps * n))
    # the floor is tight: 1% less power breaks the budget
    t_less = BUDGET.load / math.log2(1 + BUDGET.snr_per_watt(GAIN) * 0.99 * p)
    assert q + t_less - 0.2 > tail_allowance(c)


def _objective_grid(c, z, beta, v, lo, hi, points=1_000_000):
    # brute-force oracle written independently of the package kernels
    grid = np.unique(np.concatenate([np.geomspace(max(lo, 1e-300), hi, points), [lo, hi]]))
    grid = grid[grid > 0]
    snr = BUDGET.snr_per_watt(GAIN)
    age = c + BUDGET.load * math.log(2) / np.log1p(snr * grid)
    f = z * age**beta / beta + age ** (2 * beta) / (2 * beta**2) + v * grid
    return grid, f


def _obj(p, c, z, beta, v):
    return slot_objective(p, c, z, TradeoffConfig(v, P_MAX), AoiCostConfig(beta), BUDGET, GAIN)


def test_zero_v_transmits_at_max():
    p = solve_per_slot(SensorState(virtual_queue=0.3), 0.1, TradeoffConfig(0.0, P_MAX), AoiCostConfig(), BUDGET, GAIN, 1e-9)
    assert p == P_MAX


def test_huge_v_transmits_at_floor():
    p = solve_per_slot(SensorState(), 0.1, TradeoffConfig(1e9, P_MAX), AoiCostConfig(), BUDGET, GAIN, 1e-7)
    assert p == 1e-7


@pytest.mark.parametrize("seed", range(5))
def test_solver_matches_grid_search(seed):
    r = np.random.default_rng(seed)
    c, z, beta = r.uniform(0.01, 0.3), r.uniform(0, 3), float(r.choice([1.0, 2.0]))
    v = 10 ** r.uniform(0, 5)
    lo = 10 ** r.uniform(-10, -7)
    p = solve_per_slot(SensorState(virtual_queue=z), c, TradeoffConfig(v, P_MAX), AoiCostConfig(beta), BUDGET, GAIN, lo)
    _, f = _objective_grid(c, z, beta, v, lo, P_MAX)
    fs = _obj(p, c, z, beta, v)
    assert abs(fs - f.min()) / abs(f.min()) < 1e-6
    assert fs <= min(_obj(lo, c, z, beta, v), _obj(P_MAX, c, z, beta, v)) + 1e-12


def test_interior_solution_satisfies_stationarity(rng):
    hits = 0
    for _ in range(200):
        c, z, v = rng.uniform(0.01, 0.3), rng.uniform(0, 3), 10 ** rng.uniform(0, 5)
        cfg = TradeoffConfig(v, P_MAX)
        p = solve_per_slot(SensorState(virtual_queue=z), c, cfg, AoiCostConfig(), BUDGET, GAIN, 1e-10)
        if 1e-10 < p < P_MAX:
            hits += 1
            assert stationarity_residual(p, c, z, cfg, AoiCostConfig(), BUDGET, GAIN) < 1e-6
    assert hits > 50


def test_solver_rejects_bad_floor():
    with pytest.raises(ValueError):
        solve_per_slot(SensorState(), 0.1, TradeoffConfig(1.0, P_MAX), AoiCostConfig(), BUDGET, GAIN, 2 * P_MAX)


def test_constraint_validation():
    with pytest.raises(ValueError):
        UrllcConstraint(0.2, 0.02, 0.01, 5.0, GpdParams(1, 0))
