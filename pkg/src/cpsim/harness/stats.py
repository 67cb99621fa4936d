"""Deterministic reductions and rate regression."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


def mean_se(values) -> tuple[float, float]:
    """Sample mean (``math.fsum``, so independent of array layout) and ``std(ddof=1) / sqrt(n)``."""
    x = np.asarray(values, dtype=float).ravel()
    n = x.size
    if n == 0:
        return math.nan, math.nan
    mean = math.fsum(x.tolist()) / n
    if n == 1:
        return mean, math.nan
    var = math.fsum(((x - mean) ** 2).tolist()) / (n - 1)
    return mean, math.sqrt(var / n)


def z_score(estimate: float, se: float, reference: float) -> float:
    if math.isnan(estimate) or math.isnan(reference):
        return math.nan
    if not se > 0:
        return 0.0 if estimate == reference else math.inf
    return (estimate - reference) / se


def within_band(estimate: float, se: float, reference: float, z: float, rel: float) -> bool:
    """``|estimate - reference| <= z * se + rel * |reference|``."""
    if not (math.isfinite(estimate) and math.isfinite(reference)):
        return False
    return abs(estimate - reference) <= z * se + rel * abs(reference)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    stderr: float
    degenerate: bool


def fit_rate(epsilons, errors) -> RateFit:
    """OLS of ``log(error)`` on ``log(epsilon)``; errors that are all zero give a degenerate fit."""
    e = np.asarray(epsilons, dtype=float)
    y = np.asarray(errors, dtype=float)
    ok = (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        return RateFit(math.nan, math.nan, math.nan, True)
    res = stats.linregress(np.log(e[ok]), np.log(y[ok]))
    return RateFit(float(res.slope), float(res.intercept), float(res.stderr), False)
