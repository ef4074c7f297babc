"""Shared fixtures and independent helpers used across the test suite."""
from __future__ import annotations

from datetime import time

import numpy as np
import pytest

from fstclock import DayGrid, IntervalClass, PartitionSpec, PriceSeries, ReturnSample
from fstclock.series import synthetic_dates


def make_sample(values, label="test") -> ReturnSample:
    return ReturnSample(values=np.asarray(values, dtype=float), interval=IntervalClass.sample(label))


def series_from_matrix(matrix, grid=None, dropped=()) -> PriceSeries:
    matrix = np.asarray(matrix, dtype=float)
    if grid is None:
        grid = DayGrid(open_time=time(9, 40), bar_minutes=20, n_points=matrix.shape[1])
    dates = synthetic_dates(matrix.shape[0])
    return PriceSeries(grid=grid, dates=dates, log_prices=matrix, dropped_dates=dropped)


def brownian_series(
    n_days: int,
    n_bars: int,
    seed: int,
    sigma: float = 1.0,
    bar_minutes: int = 20,
    ar: float = 0.0,
    night_sigma: float = 0.0,
) -> PriceSeries:
    """Plain or AR(1)-correlated random-walk series, built outside the package.

    AR(1) increments: e_b = ar * e_{b-1} + eta_b with unit-variance
    stationary innovations, so the bar-scale lag-1 correlation is exactly
    ``ar``.  Used as the independent oracle for correlation estimators.
    """
    rng = np.random.default_rng(seed)
    rows = np.empty((n_days, n_bars + 1))
    level = 0.0
    for l in range(n_days):
        if l > 0:
            level += night_sigma * rng.standard_normal()
        eta = rng.standard_normal(n_bars)
        if ar:
            e = np.empty(n_bars)
            prev = rng.standard_normal() * 1.0  # stationary start
            for b in range(n_bars):
                prev = ar * prev + math_sqrt1m(ar) * eta[b]
                e[b] = prev
        else:
            e = eta
        rows[l, 0] = level
        rows[l, 1:] = level + np.cumsum(sigma * e)
        level = rows[l, -1]
    grid = DayGrid(open_time=time(9, 40), bar_minutes=bar_minutes, n_points=n_bars + 1)
    return PriceSeries(grid=grid, dates=synthetic_dates(n_days), log_prices=rows)


def math_sqrt1m(ar: float) -> float:
    return float(np.sqrt(1.0 - ar * ar))


def ar1_block_correlation(phi: float, k: int) -> float:
    """Closed-form correlation of adjacent k-sums of a stationary AR(1).

    cov = phi (1 - phi^k)^2 / (1 - phi)^2
    var = k (1 - phi^2) / (1 - phi)^2 - 2 phi (1 - phi^k) / (1 - phi)^2
        ... written below directly from the geometric sums.
    """
    if phi == 0.0:
        return 0.0
    g = (1.0 - phi**k) / (1.0 - phi)
    cov = phi * g * g
    var = k * (1.0 + phi) / (1.0 - phi) - 2.0 * phi * (1.0 - phi**k) / (1.0 - phi) ** 2
    return cov / var


@pytest.fixture(scope="session")
def default_grid() -> DayGrid:
    return DayGrid(open_time=time(9, 40), bar_minutes=20, n_points=20)


@pytest.fixture(scope="session")
def default_partition(default_grid) -> PartitionSpec:
    return PartitionSpec.equal_spacing(default_grid, interval_minutes=20)
