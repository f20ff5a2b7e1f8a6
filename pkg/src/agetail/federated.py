"""Federated aggregation of local GPD models with correlation-aware selection.

A sensor's contribution to the variance proxy grows with the number of
its exceedances and with the strength of dependence in its data, measured
by the Hurst exponent.  :func:`select_models` minimises that proxy over
binary inclusion vectors by single flips and pairwise swaps.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .evt import GpdParams

__all__ = [
    "LocalModelReport",
    "fed_average",
    "hurst_estimate",
    "rescaled_range",
    "correlation_sum",
    "selection_cost",
    "select_models",
    "is_locally_optimal",
    "exhaustive_selection",
    "write_reports",
    "read_reports",
    "write_selection",
    "read_selection",
]

SRD_HURST = 0.5
HURST_CEIL = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class LocalModelReport:
    sensor_id: int
    model: GpdParams
    sample_count: int
    hurst: float = SRD_HURST

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if not 0.5 <= self.hurst <= 1.0:
            raise ValueError(f"hurst must lie in [0.5, 1], got {self.hurst}")


def _as_selection(selection, k: int) -> np.ndarray:
    eta = np.asarray(selection, dtype=bool)
    if eta.shape != (k,):
        raise ValueError(f"selection must have {k} flags")
    return eta


def fed_average(reports: Sequence[LocalModelReport], selection=None) -> GpdParams:
    """Sample-count weighted average of the selected local models."""
    k = len(reports)
    eta = np.ones(k, dtype=bool) if selection is None else _as_selection(selection, k)
    if not eta.any():
        raise ValueError("empty selection")
    w = np.array([r.sample_count for r in reports], dtype=float) * eta
    theta = np.array([[r.model.sigma, r.model.xi] for r in reports])
    sigma, xi = (w / w.sum()) @ theta
    return GpdParams(float(sigma), float(xi))


def rescaled_range(series, window: int) -> float:
    """Mean R/S over non-overlapping windows of length ``window``."""
    x = np.asarray(series, dtype=float)
    n_win = x.size // window
    if n_win < 1:
        raise ValueError("window longer than series")
    blocks = x[: n_win * window].reshape(n_win, window)
    dev = blocks - blocks.mean(axis=1, keepdims=True)
    walk = np.cumsum(dev, axis=1)
    r = np.maximum(walk.max(axis=1), 0.0) - np.minimum(walk.min(axis=1), 0.0)
    s = blocks.std(axis=1)
    ok = s > 0
    if not ok.any():
        return 0.0
    return float(np.mean(r[ok] / s[ok]))


def hurst_estimate(series, min_window: int = 8, n_sizes: int = 10, clamp: bool = True) -> float:
    """Hurst exponent from the log-log slope of R/S against window size.

    Window sizes are log-spaced in ``[min_window, n/2]``.  The slope is
    clamped to ``[0.5, 1)`` unless ``clamp`` is false.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 64:
        raise ValueError("need at least 64 samples")
    sizes = np.unique(np.round(np.geomspace(min_window, n // 2, n_sizes)).astype(int))
    if sizes.size < 4:
        raise ValueError("fewer than four distinct window sizes")
    rs = np.array([rescaled_range(x, m) for m in sizes])
    if np.any(rs <= 0):
        raise ValueError("zero range in some window size (degenerate series)")
    slope = np.polyfit(np.log(sizes), np.log(rs), 1)[0]
    if not clamp:
        return float(slope)
    return float(np.clip(slope, SRD_HURST, HURST_CEIL))


def correlation_sum(n: int, hurst: float) -> float:
    """sum_{i=1}^{n} sum_{m=1}^{n-i} m^(2H-2) = sum_m (n - m) m^(2H-2)."""
    if n < 2:
        return 0.0
    m = np.arange(1, n, dtype=float)
    return float(np.sum((n - m) * m ** (2.0 * hurst - 2.0)))


def _cost_terms(reports: Sequence[LocalModelReport]):
    counts = np.array([r.sample_count for r in reports], dtype=float)
    num = counts.copy()
    for i, r in enumerate(reports):
        if r.hurst > SRD_HURST:
            num[i] += 2.0 * correlation_sum(r.sample_count, r.hurst)
    return num, counts


def _psi(num, counts, eta) -> float:
    total = counts @ eta
    return float(num @ eta / (total * total))


def selection_cost(reports: Sequence[LocalModelReport], selection) -> float:
    """Variance proxy of the selected weighted average (selection-independent factors dropped)."""
    eta = _as_selection(selection, len(reports))
    if not eta.any():
        raise ValueError("cost is undefined for the empty selection")
    num, counts = _cost_terms(reports)
    return _psi(num, counts, eta.astype(float))


def _neighbours(eta: np.ndarray):
    k = eta.size
    for i in range(k):
        cand = eta.copy()
        cand[i] = not cand[i]
        yield cand
    on = np.flatnonzero(eta)
    off = np.flatnonzero(~eta)
    for i in on:
        for j in off:
            cand = eta.copy()
            cand[i] = False
            cand[j] = True
            yield cand


def _local_search(num, counts, eta: np.ndarray) -> tuple[np.ndarray, float]:
    cost = _psi(num, counts, eta.astype(float))
    improved = True
    while improved:
        improved = False
        for cand in _neighbours(eta):
            if not cand.any():
                continue
            c = _psi(num, counts, cand.astype(float))
            if c < cost:
                eta, cost = cand, c
                improved = True
                break
    return eta, cost


def _ranked_prefix(num, counts) -> np.ndarray:
    order = np.argsort(num / counts, kind="stable")
    cost = np.cumsum(num[order]) / np.cumsum(counts[order]) ** 2
    eta = np.zeros(num.size, dtype=bool)
    eta[order[: int(np.argmin(cost)) + 1]] = True
    return eta


def select_models(
    reports: Sequence[LocalModelReport],
    init=None,
    restarts: int = 1,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Swap-matching search for a low-cost inclusion vector.

    Neighbours are scanned as all single flips in sensor order, then all
    (selected, unselected) swaps in lexicographic order; the first strict
    improvement is taken.  The search runs from ``init`` (all sensors by
    default) and from the best prefix of sensors ranked by per-sample cost,
    since dropping a group of correlated sensors often needs several
    simultaneous flips.  ``restarts > 1`` adds random non-empty starts.  The
    best local optimum is returned.
    """
    k = len(reports)
    if k == 0:
        raise ValueError("no reports")
    eta = np.ones(k, dtype=bool) if init is None else _as_selection(init, k).copy()
    if not eta.any():
        raise ValueError("initial selection must be non-empty")
    num, counts = _cost_terms(reports)
    best, best_cost = _local_search(num, counts, eta)
    cand, c = _local_search(num, counts, _ranked_prefix(num, counts))
    if c < best_cost:
        best, best_cost = cand, c
    if restarts > 1:
        rng = rng if rng is not None else np.random.default_rng(0)
        for _ in range(restarts - 1):
            start = rng.random(k) < 0.5
            if not start.any():
                start[rng.integers(k)] = True
            cand, c = _local_search(num, counts, start)
            if c < best_cost:
                best, best_cost = cand, c
    return best


def is_locally_optimal(reports: Sequence[LocalModelReport], selection) -> bool:
    eta = _as_selection(selection, len(reports))
    num, counts = _cost_terms(reports)
    cost = _psi(num, counts, eta.astype(float))
    return all(_psi(num, counts, c.astype(float)) >= cost for c in _neighbours(eta) if c.any())


def exhaustive_selection(reports: Sequence[LocalModelReport]) -> tuple[np.ndarray, float]:
    """Global optimum over all 2^K - 1 non-empty vectors (small K only)."""
    k = len(reports)
    num, counts = _cost_terms(reports)
    codes = np.arange(1, 2**k)
    etas = ((codes[:, None] >> np.arange(k)) & 1).astype(float)
    totals = etas @ counts
    costs = (etas @ num) / totals**2
    i = int(np.argmin(costs))
    return etas[i].astype(bool), float(costs[i])


def write_reports(reports: Sequence[LocalModelReport], path: Union[str, Path], thresholds=None) -> None:
    """CSV rows ``sensor_id, sigma, xi, sample_count, hurst`` (+ ``x0, tail_prob``)."""
    header = ["sensor_id", "sigma", "xi", "sample_count", "hurst"]
    if thresholds is not None:
        header += ["x0", "tail_prob"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, r in enumerate(reports):
            row = [r.sensor_id, repr(r.model.sigma), repr(r.model.xi), r.sample_count, repr(r.hurst)]
            if thresholds is not None:
                row += [repr(float(thresholds[i][0])), repr(float(thresholds[i][1]))]
            w.writerow(row)


def read_reports(path: Union[str, Path]):
    """Returns ``(reports, thresholds)``; thresholds is None without x0 columns."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    reports = [
        LocalModelReport(
            int(r["sensor_id"]),
            GpdParams(float(r["sigma"]), float(r["xi"])),
            int(r["sample_count"]),
            float(r["hurst"]),
        )
        for r in rows
    ]
    thresholds = None
    if rows and "x0" in rows[0]:
        thresholds = [(float(r["x0"]), float(r["tail_prob"])) for r in rows]
    return reports, thresholds


def write_selection(reports: Sequence[LocalModelReport], selection, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sensor_id", "selected"])
        for r, s in zip(reports, selection):
            w.writerow([r.sensor_id, int(bool(s))])


def read_selection(path: Union[str, Path]) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([bool(int(r["selected"])) for r in csv.DictReader(fh)])
