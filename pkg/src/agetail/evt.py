"""Peaks-over-threshold machinery for the ``X = -ln(x)`` inter-arrival transform.

Local GPD training is plain batch gradient ascent on the average
log-likelihood, with step halving whenever a step would leave the support
(``1 + xi*y/sigma > 0`` for every sample) or lower the objective.  Iterates
are projected onto ``sigma >= 1e-6`` and ``xi >= -0.999``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from numba import njit

__all__ = [
    "GpdParams",
    "ExceedanceSet",
    "extract_exceedances",
    "gpd_ccdf",
    "gpd_logpdf",
    "gpd_sample",
    "loglik_gradient",
    "mean_loglik",
    "fit_local",
    "save_exceedances",
    "load_exceedances",
]

XI_CCDF_EPS = 1e-6
XI_GRAD_EPS = 1e-4
SIGMA_FLOOR = 1e-6
# the likelihood is unbounded for xi < -1
XI_FLOOR = -0.999
MAX_HALVINGS = 60


@dataclass(frozen=True)
class GpdParams:
    sigma: float
    xi: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def supports(self, y) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(1.0 + self.xi * y / self.sigma > 0))

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma, self.xi])


@dataclass
class ExceedanceSet:
    threshold_x0: float
    tail_prob: float
    values: np.ndarray
    positions: np.ndarray = field(default=None)
    n_total: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size == 0:
            raise ValueError("exceedance set is empty")
        if np.any(self.values <= 0):
            raise ValueError("exceedances must be strictly positive")
        if self.positions is None:
            self.positions = np.arange(self.values.size)

    def __len__(self) -> int:
        return self.values.size


def extract_exceedances(interarrivals, tail_quantile: float = 0.01) -> ExceedanceSet:
    """Exceedances of ``-ln(x)`` over its nearest-rank ``1 - tail_quantile`` quantile."""
    x = np.asarray(interarrivals, dtype=float)
    if not 0 < tail_quantile < 0.5:
        raise ValueError("tail_quantile must lie in (0, 0.5)")
    n = x.size
    if n < math.ceil(2.0 / tail_quantile):
        raise ValueError(f"need at least {math.ceil(2.0 / tail_quantile)} samples, got {n}")
    if np.any(x <= 0):
        raise ValueError("inter-arrival times must be positive")
    big_x = -np.log(x)
    # nearest rank; the small slack absorbs float error in (1 - q) * n
    rank = max(1, math.ceil((1.0 - tail_quantile) * n - 1e-9))
    x0 = float(np.partition(big_x, rank - 1)[rank - 1])
    mask = big_x > x0
    if not mask.any():
        raise ValueError("no strict exceedances above the empirical threshold")
    pos = np.flatnonzero(mask)
    return ExceedanceSet(
        threshold_x0=x0,
        tail_prob=pos.size / n,
        values=big_x[pos] - x0,
        positions=pos,
        n_total=n,
    )


@njit(cache=True)
def _ccdf(sigma, xi, y):
    z = y / sigma
    if abs(xi) < XI_CCDF_EPS:
        return math.exp(-z + 0.5 * xi * z * z)
    u = 1.0 + xi * z
    if u <= 0.0:
        return 0.0
    return u ** (-1.0 / xi)


@njit(cache=True)
def _logpdf(sigma, xi, y):
    z = y / sigma
    u = xi * z
    if 1.0 + u <= 0.0:
        return -math.inf
    if abs(xi) < XI_CCDF_EPS:
        return -math.log(sigma) - (z - 0.5 * xi * z * z + xi * xi * z * z * z / 3.0) - math.log1p(u)
    return -math.log(sigma) - (1.0 + 1.0 / xi) * math.log1p(u)


@njit(cache=True)
def _grad(sigma, xi, y):
    z = y / sigma
    u = 1.0 + xi * z
    d_sigma = ((1.0 + xi) * z / u - 1.0) / sigma
    if abs(xi) < XI_GRAD_EPS:
        z2 = z * z
        z3 = z2 * z
        d_xi = (0.5 * z2 - z) + xi * (z2 - 2.0 * z3 / 3.0) + xi * xi * (0.75 * z2 * z2 - z3)
    else:
        d_xi = math.log1p(xi * z) / (xi * xi) - (1.0 + 1.0 / xi) * z / u
    return d_sigma, d_xi


@njit(cache=True)
def _mean_loglik(sigma, xi, ys):
    s = 0.0
    for y in ys:
        lp = _logpdf(sigma, xi, y)
        if lp == -math.inf:
            return -math.inf
        s += lp
    return s / ys.size


@njit(cache=True)
def _fit(ys, sigma, xi, rate, iters, history):
    """Returns (sigma, xi, status); status 0 ok, 1 no feasible step."""
    ll = _mean_loglik(sigma, xi, ys)
    history[0] = ll
    n = ys.size
    for j in range(iters):
        gs = 0.0
        gx = 0.0
        for y in ys:
            a, b = _grad(sigma, xi, y)
            gs += a
            gx += b
        gs /= n
        gx /= n
        step = rate
        moved = False
        feasible = False
        for _ in range(MAX_HALVINGS):
            s_new = max(sigma + step * gs, SIGMA_FLOOR)
            x_new = max(xi + step * gx, XI_FLOOR)
            ll_new = _mean_loglik(s_new, x_new, ys)
            if ll_new > -math.inf:
                feasible = True
                if ll_new >= ll - 1e-12:
                    sigma = s_new
                    xi = x_new
                    ll = ll_new
                    moved = True
                    break
            step *= 0.5
        if not feasible:
            return sigma, xi, 1
        history[j + 1] = ll
        if not moved:
            # ascent direction exhausted to rounding precision
            for k in range(j + 1, iters):
                history[k + 1] = ll
            break
    return sigma, xi, 0


def gpd_ccdf(p: GpdParams, y):
    """Survival function ``(1 + xi*y/sigma)^(-1/xi)``; exponential limit near xi = 0."""
    if np.ndim(y) == 0:
        if y < 0:
            raise ValueError("y must be non-negative")
        return float(_ccdf(p.sigma, p.xi, float(y)))
    y = np.asarray(y, dtype=float)
    return np.array([_ccdf(p.sigma, p.xi, v) for v in y.ravel()]).reshape(y.shape)


def gpd_logpdf(p: GpdParams, y):
    if np.ndim(y) == 0:
        return float(_logpdf(p.sigma, p.xi, float(y)))
    y = np.asarray(y, dtype=float)
    return np.array([_logpdf(p.sigma, p.xi, v) for v in y.ravel()]).reshape(y.shape)


def gpd_sample(p: GpdParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-transform GPD draws."""
    u = rng.random(n)
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    if abs(p.xi) < XI_CCDF_EPS:
        return -p.sigma * np.log(u)
    return p.sigma / p.xi * (u ** (-p.xi) - 1.0)


def loglik_gradient(p: GpdParams, y):
    """Gradient of ``ln phi(theta | y)`` w.r.t. ``(sigma, xi)``.

    Scalar ``y`` gives a tuple; an array gives an array of shape ``(2, n)``.
    """
    if np.ndim(y) == 0:
        if not 1.0 + p.xi * y / p.sigma > 0:
            raise ValueError("y outside the GPD support")
        ds, dx = _grad(p.sigma, p.xi, float(y))
        return float(ds), float(dx)
    y = np.asarray(y, dtype=float)
    if not p.supports(y):
        raise ValueError("y outside the GPD support")
    out = np.empty((2, y.size))
    for i, v in enumerate(y.ravel()):
        out[0, i], out[1, i] = _grad(p.sigma, p.xi, v)
    return out


def mean_loglik(p: GpdParams, y) -> float:
    return float(_mean_loglik(p.sigma, p.xi, np.asarray(y, dtype=float).ravel()))


def fit_local(
    data: Union[ExceedanceSet, np.ndarray],
    init: GpdParams = GpdParams(1.0, 0.1),
    rate: float = 0.01,
    iters: int = 3000,
    return_history: bool = False,
):
    """Batch gradient ascent on the mean GPD log-likelihood.

    ``history[j]`` is the mean log-likelihood after ``j`` iterations.
    """
    ys = np.ascontiguousarray(data.values if isinstance(data, ExceedanceSet) else data, dtype=float)
    if ys.size == 0:
        raise ValueError("no exceedances to fit")
    if not init.supports(ys):
        raise ValueError("initial parameters violate the support condition")
    history = np.empty(iters + 1)
    sigma, xi, status = _fit(ys, float(init.sigma), float(init.xi), float(rate), int(iters), history)
    if status:
        raise RuntimeError("no support-preserving ascent step exists")
    fitted = GpdParams(float(sigma), float(xi))
    if return_history:
        return fitted, history
    return fitted


def save_exceedances(data: ExceedanceSet, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "y"])
        for i, y in zip(data.positions, data.values):
            w.writerow([int(i), repr(float(y))])


def load_exceedances(
    path: Union[str, Path], threshold_x0: float = math.nan, n_total: Optional[int] = None
) -> ExceedanceSet:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "y" not in rows[0]:
        raise ValueError(f"{path}: expected a header with a 'y' column")
    values = np.array([float(r["y"]) for r in rows])
    if "index" in rows[0]:
        pos = np.array([int(r["index"]) for r in rows])
    else:
        pos = np.arange(values.size)
    tail = values.size / n_total if n_total else math.nan
    return ExceedanceSet(threshold_x0, tail, values, pos, n_total or 0)
