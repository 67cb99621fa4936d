"""Compound Poisson and Euler-Maruyama schemes for stochastic Volterra equations.

The equation is ``Y_t = y0 + int_0^t sigma(t,s,Y_s) dW_s + int_0^t b(t,s,Y_s) ds``.
Every evaluation time reweights the whole history, so a path costs O(N^2)
kernel evaluations for N jumps.

State convention: the state fed into jump ``k`` is the left limit
``Z_k = Y_{S_k-} = y0 + sum_{i<k} [sigma(S_k, S_i, Z_i) dW_i + eps b(S_k, S_i, Z_i)]``.
For kernels constant in ``t`` this is the value after jump ``k - 1``; for
kernels singular on the diagonal it never evaluates ``(t - s)`` at zero.
A query at time ``t`` sums the terms of all jumps ``S_i <= t`` with first
argument ``t``.

Two code paths exist: a numba kernel for scalar power-law product kernels
(:class:`PowerKernel`) and a generic numpy path for arbitrary callables.
Coefficient callables take ``t``, ``s`` of shape ``(P,)`` and ``x`` of shape
``(P, d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numba as nb
import numpy as np

from .errors import OutOfRangeError, SingularHitError
from .grid import GridBrownian, JumpGrid, JumpGridBatch
from .sde import em_grid_times

TwoTimeCoefficient = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PowerKernel:
    """Scalar linear coefficient ``scale * (t-s)^(-lag_exp) * |s-center|^(-center_exp) * x``."""

    scale: float
    lag_exp: float = 0.0
    center: float = 0.0
    center_exp: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.scale, self.lag_exp, self.center, self.center_exp], dtype=float)

    def factor(self, t, s) -> np.ndarray:
        """Kernel factor without the state, vectorized (numpy arithmetic)."""
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        out = np.full(np.broadcast(t, s).shape, float(self.scale))
        if self.scale == 0:
            return out
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.lag_exp:
                out = out * (t - s) ** (-self.lag_exp)
            if self.center_exp:
                out = out * np.abs(s - self.center) ** (-self.center_exp)
        return out


@dataclass(frozen=True)
class SveModel:
    dim_d: int
    dim_m: int
    drift: TwoTimeCoefficient
    diffusion: TwoTimeCoefficient
    singular_note: str = ""
    power: tuple[PowerKernel, PowerKernel] | None = None

    @classmethod
    def from_power_kernels(cls, drift: PowerKernel, diffusion: PowerKernel, singular_note: str = "") -> "SveModel":
        """Scalar linear model whose simulation runs through the compiled kernel."""

        def b(t, s, x):
            return drift.factor(t, s)[:, None] * x

        def sig(t, s, x):
            return (diffusion.factor(t, s)[:, None] * x)[:, :, None]

        return cls(1, 1, b, sig, singular_note, (drift, diffusion))


@dataclass(frozen=True)
class SveQueryResult:
    query_times: np.ndarray
    values: np.ndarray


@dataclass
class SveBatchResult:
    """Query values for many paths; ``fail_step > 0`` marks a singular hit."""

    values: np.ndarray
    fail_step: np.ndarray
    fail_time: np.ndarray
    fail_history: np.ndarray

    @property
    def failed(self) -> np.ndarray:
        return self.fail_step > 0


# ---------------------------------------------------------------- compiled path


@nb.njit(cache=True, nogil=True)
def _power(u, e):
    if e == 0.0:
        return 1.0
    return math.exp(-e * math.log(u))


@nb.njit(cache=True, nogil=True)
def _weighted(t, times, ag, ad, n_terms, y0, eg, ed):
    """``y0 + sum_{i<n_terms} (lag^-eg ag_i + lag^-ed ad_i)``, diffusion before drift.

    ``ag_i`` and ``ad_i`` already hold everything but the lag factor, so a
    lag exponent of zero reproduces the one-step recursion bit for bit.
    """
    acc = y0
    if eg == 0.0 and ed == 0.0:
        for i in range(n_terms):
            acc += ag[i]
            acc += ad[i]
        return acc
    for i in range(n_terms):
        log_lag = math.log(t - times[i])
        g = ag[i] if eg == 0.0 else math.exp(-eg * log_lag) * ag[i]
        d = ad[i] if ed == 0.0 else math.exp(-ed * log_lag) * ad[i]
        acc += g
        acc += d
    return acc


@nb.njit(cache=True, nogil=True)
def _locate(t, times, ag, ad, n_terms, eg, ed, fail):
    """Record the first history time whose term is non-finite."""
    for i in range(n_terms):
        lag = t - times[i]
        g = _power(lag, eg) * ag[i]
        d = _power(lag, ed) * ad[i]
        if not (math.isfinite(g) and math.isfinite(d)):
            fail[0] = t
            fail[1] = times[i]
            return
    fail[0] = t
    fail[1] = np.nan


@nb.njit(cache=True, nogil=True)
def _power_path(times, dw, n, weight, y0, kd, kg, queries, strict, out, fail):
    """One path: states at ``times[:n]`` then values at ``queries``.

    Returns 0 on success or the 1-based step at which a coefficient blew up
    (``n + q + 1`` when the failure happens in query ``q``).
    """
    ag = np.zeros(n)
    ad = np.zeros(n)
    eg = kg[1] if kg[0] != 0.0 else 0.0
    ed = kd[1] if kd[0] != 0.0 else 0.0
    z = y0
    for j in range(n):
        if j > 0:
            z = _weighted(times[j], times, ag, ad, j, y0, eg, ed)
            if not math.isfinite(z):
                _locate(times[j], times, ag, ad, j, eg, ed, fail)
                return j + 1
        if kg[0] != 0.0:
            ag[j] = ((kg[0] * _power(abs(times[j] - kg[2]), kg[3])) * z) * dw[j]
        if kd[0] != 0.0:
            ad[j] = weight * ((kd[0] * _power(abs(times[j] - kd[2]), kd[3])) * z)
        if not (math.isfinite(ag[j]) and math.isfinite(ad[j])):
            # the center factor of this jump is singular; it first enters the
            # sum of the next state (or of a query)
            fail[0] = times[j + 1] if j + 1 < n else np.nan
            fail[1] = times[j]
            return j + 2
    for q in range(queries.size):
        t = queries[q]
        k = 0
        if strict:
            while k < n and times[k] < t:
                k += 1
        else:
            while k < n and times[k] <= t:
                k += 1
        v = _weighted(t, times, ag, ad, k, y0, eg, ed)
        if not math.isfinite(v):
            _locate(t, times, ag, ad, k, eg, ed, fail)
            return n + q + 1
        out[q] = v
    return 0


@nb.njit(cache=True, nogil=True)
def _power_batch(times, dw, counts, weight, y0, kd, kg, queries, strict, values, fail_step, fail_pair):
    for p in range(times.shape[0]):
        fail = np.zeros(2)
        code = _power_path(times[p], dw[p], counts[p], weight, y0[p], kd, kg, queries, strict, values[p], fail)
        fail_step[p] = code
        if code:
            values[p, :] = np.nan
            fail_pair[p, 0] = fail[0]
            fail_pair[p, 1] = fail[1]


def _power_run(model: SveModel, y0, times, dw, counts, weight, queries, strict) -> SveBatchResult:
    kd, kg = (k.as_array() for k in model.power)
    n_paths = times.shape[0]
    y = np.broadcast_to(np.asarray(y0, dtype=float).reshape(-1), (n_paths,)).copy()
    values = np.full((n_paths, queries.size), np.nan)
    fail_step = np.zeros(n_paths, dtype=np.int64)
    fail_pair = np.full((n_paths, 2), np.nan)
    _power_batch(
        np.ascontiguousarray(times, dtype=float),
        np.ascontiguousarray(dw, dtype=float),
        np.asarray(counts, dtype=np.int64),
        float(weight), y, kd, kg,
        np.ascontiguousarray(queries, dtype=float),
        bool(strict), values, fail_step, fail_pair,
    )
    return SveBatchResult(values[:, :, None], fail_step, fail_pair[:, 0], fail_pair[:, 1])


# ----------------------------------------------------------------- generic path


class _Hit(Exception):
    def __init__(self, t, s):
        self.t, self.s = t, s


def _weighted_sum(model: SveModel, t: float, times, z, dw, weight, y0):
    k = times.shape[0]
    if k == 0:
        return y0.copy()
    tt = np.full(k, t)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        sig = np.asarray(model.diffusion(tt, times, z), dtype=float).reshape(k, model.dim_d, model.dim_m)
        drf = np.asarray(model.drift(tt, times, z), dtype=float).reshape(k, model.dim_d)
        g = np.einsum("pdm,pm->pd", sig, dw)
        d = weight * drf
    ok = np.isfinite(g).all(axis=1) & np.isfinite(d).all(axis=1)
    if not ok.all():
        i = int(np.argmin(ok))
        raise _Hit(t, float(times[i]))
    terms = np.empty((2 * k + 1, model.dim_d))
    terms[0] = y0
    terms[1::2] = g
    terms[2::2] = d
    # np.cumsum adds strictly left to right, matching the one-step recursion
    return np.cumsum(terms, axis=0)[-1]


def _generic_path(model: SveModel, y0, times, dw, n, weight, queries, strict):
    d = model.dim_d
    z = np.empty((n, d))
    for j in range(n):
        try:
            z[j] = _weighted_sum(model, times[j], times[:j], z[:j], dw[:j], weight, y0)
        except _Hit as hit:
            return None, (j + 1, hit.t, hit.s)
    out = np.empty((queries.size, d))
    side = "left" if strict else "right"
    for q, t in enumerate(queries):
        k = int(np.searchsorted(times[:n], t, side=side))
        try:
            out[q] = _weighted_sum(model, t, times[:k], z[:k], dw[:k], weight, y0)
        except _Hit as hit:
            return None, (n + q + 1, hit.t, hit.s)
    return out, None


def _generic_run(model: SveModel, y0, times, dw, counts, weight, queries, strict) -> SveBatchResult:
    n_paths = times.shape[0]
    y = np.asarray(y0, dtype=float)
    y = np.broadcast_to(y.reshape(-1, model.dim_d) if y.ndim else y, (n_paths, model.dim_d))
    values = np.full((n_paths, queries.size, model.dim_d), np.nan)
    fail_step = np.zeros(n_paths, dtype=np.int64)
    fail_time = np.full(n_paths, np.nan)
    fail_hist = np.full(n_paths, np.nan)
    for p in range(n_paths):
        out, hit = _generic_path(model, y[p], times[p], dw[p], int(counts[p]), weight, queries, strict)
        if hit is None:
            values[p] = out
        else:
            fail_step[p], fail_time[p], fail_hist[p] = hit
    return SveBatchResult(values, fail_step, fail_time, fail_hist)


def _run(model, y0, times, dw, counts, weight, queries, strict) -> SveBatchResult:
    if model.power is not None:
        return _power_run(model, y0, times, dw.reshape(dw.shape[0], dw.shape[1]), counts, weight, queries, strict)
    return _generic_run(model, y0, times, dw, counts, weight, queries, strict)


# ------------------------------------------------------------------- public API


def _check_queries(query_times, horizon: float) -> np.ndarray:
    q = np.asarray(query_times, dtype=float).reshape(-1)
    if np.any(q < 0) or np.any(q > horizon):
        raise OutOfRangeError(f"query times must lie in [0, {horizon!r}]")
    return q


def cp_sve_batch(model: SveModel, y0, grids: JumpGridBatch, increments: np.ndarray, query_times) -> SveBatchResult:
    """Compound Poisson SVE values at ``query_times`` for every path of ``grids``.

    ``increments`` has shape ``(P, n, m)`` with ``n >= max(counts)``.
    """
    q = _check_queries(query_times, grids.horizon)
    width = int(grids.counts.max()) if len(grids) else 0
    if increments.shape[1] < width:
        raise OutOfRangeError("Brownian increments do not cover every jump")
    times = grids.times[:, :width]
    times = np.where(np.isfinite(times), times, 0.0)
    return _run(model, y0, times, increments[:, :width], grids.counts, grids.epsilon, q, False)


def em_sve_batch(model: SveModel, y0, step_h: float, query_times, increments: np.ndarray) -> SveBatchResult:
    """Left-point Euler-Maruyama SVE values at grid-multiple ``query_times``.

    ``Y_{t_i} = y0 + sum_{j<i} [sigma(t_i, t_j, Y_{t_j}) dW_{j+1} + h b(t_i, t_j, Y_{t_j})]``.
    """
    q = np.asarray(query_times, dtype=float).reshape(-1)
    idx = np.rint(q / step_h).astype(np.int64)
    if np.any(np.abs(idx * step_h - q) > 1e-9 * np.maximum(1.0, q)) or np.any(idx < 0):
        raise OutOfRangeError("EM query times must be multiples of step_h")
    n = int(idx.max()) if idx.size else 0
    if increments.shape[1] < n:
        raise OutOfRangeError("Brownian increments do not cover every EM step")
    grid = em_grid_times(step_h, n + 1)
    # query t_i exactly as the grid point so the strict "t_j < t_i" count is exact
    q = grid[idx]
    n_paths = increments.shape[0]
    times = np.broadcast_to(grid[:n], (n_paths, n))
    counts = np.full(n_paths, n)
    return _run(model, y0, times, increments[:, :n], counts, step_h, q, True)


def _single(result: SveBatchResult, q: np.ndarray) -> SveQueryResult:
    if result.fail_step[0]:
        raise SingularHitError(int(result.fail_step[0]), float(result.fail_time[0]), float(result.fail_history[0]))
    return SveQueryResult(q, result.values[0])


def cp_sve_values(model: SveModel, y0, grid: JumpGrid, brownian: GridBrownian, query_times) -> SveQueryResult:
    """Compound Poisson approximation of one SVE path at ``query_times``.

    Raises:
        SingularHitError: a kernel evaluation was non-finite.
    """
    if brownian.epsilon != grid.epsilon:
        raise ValueError("brownian and jump grid use different epsilon")
    n = grid.count_cutoff
    if len(brownian) < n:
        raise OutOfRangeError(f"brownian populated to {len(brownian)}, need {n}")
    q = _check_queries(query_times, grid.horizon)
    batch = JumpGridBatch(grid.epsilon, grid.horizon, grid.jump_times[None, : n + 1], np.array([n]))
    y = np.asarray(y0, dtype=float).reshape(1, -1) if np.ndim(y0) else y0
    return _single(cp_sve_batch(model, y, batch, brownian.increments[None, :n], q), q)


def em_sve_values(model: SveModel, y0, step_h: float, query_times, brownian: GridBrownian) -> SveQueryResult:
    """Euler-Maruyama values of one SVE path at grid-multiple ``query_times``.

    Raises:
        SingularHitError: a kernel evaluation was non-finite, for instance an
            interior singularity sitting exactly on a grid point.
    """
    if not np.isclose(brownian.epsilon, step_h, rtol=1e-12, atol=0):
        raise ValueError("brownian grid spacing must equal step_h")
    q = np.asarray(query_times, dtype=float).reshape(-1)
    y = np.asarray(y0, dtype=float).reshape(1, -1) if np.ndim(y0) else y0
    return _single(em_sve_batch(model, y, step_h, q, brownian.increments[None]), q)


__all__ = [
    "PowerKernel",
    "SveModel",
    "SveQueryResult",
    "SveBatchResult",
    "cp_sve_values",
    "em_sve_values",
    "cp_sve_batch",
    "em_sve_batch",
]
