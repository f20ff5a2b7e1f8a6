from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from agetail.aoi import (
    AoiCostConfig,
    SensorState,
    advance_queue,
    advance_virtual_queue,
    aoi_trajectory,
    peak_aoi,
)

times = st.floats(0, 10, allow_nan=False)


@pytest.mark.parametrize(
    "anchor, x, t, expected",
    [(0.3, 0.2, 0.05, 0.35), (0.1, 0.25, 0.05, 0.30), (0.0, 0.0, 0.0, 0.0)],
)
def test_peak_aoi(anchor, x, t, expected):
    assert peak_aoi(anchor, x, t) == pytest.approx(expected)


@pytest.mark.parametrize("q, t, x, expected", [(0.1, 0.05, 0.2, 0.0), (0.1, 0.05, 0.05, 0.1), (0.0, 0.5, 0.1, 0.4)])
def test_advance_queue(q, t, x, expected):
    assert advance_queue(q, t, x) == pytest.approx(expected)


@pytest.mark.parametrize(
    "z, a, beta, expected",
    [(0.0, 0.3, 1.0, 0.05), (0.0, 0.2, 1.0, 0.0), (1.0, 0.5, 2.0, 0.875)],
)
def test_advance_virtual_queue(z, a, beta, expected):
    assert advance_virtual_queue(z, a, AoiCostConfig(beta, 0.25)) == pytest.approx(expected)


@given(times, times, st.floats(1e-6, 10))
def test_queue_never_negative(q, t, x):
    assert advance_queue(q, t, x) >= 0.0


@given(times, times, times)
def test_peak_covers_delay_of_described_update(anchor, x, t):
    # the previous update's age at reception is the anchor; peak exceeds it by at least T
    assert peak_aoi(anchor, x, t) >= anchor + t - 1e-12


@given(st.floats(0, 100), times, st.floats(1, 3))
def test_virtual_queue_non_negative(z, a, beta):
    assert advance_virtual_queue(z, a, AoiCostConfig(beta, 0.25)) >= 0.0


def test_slot_constant_matches_peak_without_tx():
    s = SensorState(aoi_anchor=0.1)
    assert s.slot_constant(0.25) + 0.05 == pytest.approx(peak_aoi(0.1, 0.25, 0.05))


def _rec(t, q, tx):
    return SimpleNamespace(reception_time=t, queue_delay=q, tx_time=tx)


def test_trajectory_reset_and_slope():
    recs = [_rec(1.0, 0.1, 0.05)]
    assert aoi_trajectory(recs, 1.0)[0] == pytest.approx(0.15)
    assert aoi_trajectory(recs, 1.2)[0] == pytest.approx(0.35)
    assert np.isnan(aoi_trajectory(recs, 0.5)[0])


def test_trajectory_left_limit_is_peak():
    # update 1 received at t=1 with age 0.15; update 2 arrives 0.2 s after update 1 was generated
    q1, t1 = 0.1, 0.05
    x2, t2 = 0.2, 0.03
    anchor = q1 + t1
    q2 = max(anchor - x2, 0.0)
    rx2 = 1.0 + max(x2 - anchor, 0.0) + t2
    recs = [_rec(1.0, q1, t1), _rec(rx2, q2, t2)]
    left = aoi_trajectory(recs, rx2 - 1e-12)[0]
    assert left == pytest.approx(peak_aoi(anchor, x2, t2), abs=1e-9)
    assert aoi_trajectory(recs, rx2)[0] == pytest.approx(q2 + t2)


def test_trajectory_rejects_unordered():
    with pytest.raises(ValueError):
        aoi_trajectory([_rec(2.0, 0, 0.1), _rec(1.0, 0, 0.1)], 3.0)


def test_cost_config_validation():
    with pytest.raises(ValueError):
        AoiCostConfig(beta=0.5)
