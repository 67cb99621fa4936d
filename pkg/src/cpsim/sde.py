"""Compound Poisson and Euler-Maruyama schemes for ``dX = b(t,X) dt + sigma(t,X) dW``.

Coefficients are vectorized over paths: ``drift(t, x)`` receives ``t`` of shape
``(P,)`` and ``x`` of shape ``(P, d)`` and returns ``(P, d)``; ``diffusion``
returns ``(P, d, m)``.  The single-path functions are thin wrappers around the
batched lockstep recursions, so both give identical numbers.

Each update adds the diffusion term first and the drift term second.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import OutOfRangeError, SingularHitError
from .grid import GridBrownian, JumpGrid, JumpGridBatch, prefix_sum, prefix_sums

Coefficient = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SdeModel:
    dim_d: int
    dim_m: int
    drift: Coefficient
    diffusion: Coefficient
    singular_times: tuple = ()


@dataclass(frozen=True)
class PathSample:
    """Scheme output: ``values[i]`` holds from ``times[i]`` until the next record.

    Before ``times[0]`` the path sits at ``initial``.
    """

    times: np.ndarray
    values: np.ndarray
    initial: np.ndarray


@dataclass(frozen=True)
class StrongErrorSample:
    sup_sq_error: float
    terminal_sq_error: float


@dataclass
class BatchResult:
    """States of many paths after each step, plus failure bookkeeping.

    ``states[p, k]`` is the state after step ``k + 1``; entries past a path's
    step count (or past its failure) are NaN.  ``fail_step`` is 0 for paths
    that completed and the 1-based failing step otherwise.
    """

    states: np.ndarray
    fail_step: np.ndarray
    fail_time: np.ndarray = field(default=None)

    @property
    def failed(self) -> np.ndarray:
        return self.fail_step > 0


def _as_states(x0, n_paths: int, dim_d: int) -> np.ndarray:
    x = np.asarray(x0, dtype=float)
    if x.ndim == 0:
        x = np.full((n_paths, dim_d), float(x))
    elif x.ndim == 1 and x.shape[0] == dim_d and n_paths != dim_d:
        x = np.broadcast_to(x, (n_paths, dim_d)).copy()
    elif x.ndim == 1:
        x = x.reshape(n_paths, dim_d)
    if x.shape != (n_paths, dim_d):
        raise ValueError(f"initial state shape {x.shape} incompatible with ({n_paths}, {dim_d})")
    return x.copy()


def _lockstep(model: SdeModel, x0: np.ndarray, times: np.ndarray, steps: np.ndarray,
              dW: np.ndarray, weight: float) -> BatchResult:
    """Run ``X_k = X_{k-1} + sigma(t_k, X_{k-1}) dW_k + weight * b(t_k, X_{k-1})``.

    ``times[p, k]`` is the coefficient time of step ``k + 1`` for path ``p``
    and ``steps[p]`` the number of steps that path takes.
    """
    n_paths, width = times.shape
    d = model.dim_d
    states = np.full((n_paths, width, d), np.nan)
    fail_step = np.zeros(n_paths, dtype=np.int64)
    fail_time = np.full(n_paths, np.nan)
    x = x0.copy()
    alive = np.ones(n_paths, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for k in range(width):
            rows = np.flatnonzero(alive & (steps > k))
            if rows.size == 0:
                break
            t = times[rows, k]
            xr = x[rows]
            sig = np.asarray(model.diffusion(t, xr), dtype=float).reshape(rows.size, d, model.dim_m)
            drf = np.asarray(model.drift(t, xr), dtype=float).reshape(rows.size, d)
            ok = np.isfinite(sig).all(axis=(1, 2)) & np.isfinite(drf).all(axis=1)
            if not ok.all():
                bad = rows[~ok]
                fail_step[bad] = k + 1
                fail_time[bad] = times[bad, k]
                alive[bad] = False
                rows, t, xr, sig, drf = rows[ok], t[ok], xr[ok], sig[ok], drf[ok]
            xn = xr + np.einsum("pdm,pm->pd", sig, dW[rows, k])
            xn = xn + weight * drf
            x[rows] = xn
            states[rows, k] = xn
    return BatchResult(states, fail_step, fail_time)


def cp_sde_batch(model: SdeModel, x0, grids: JumpGridBatch, increments: np.ndarray) -> BatchResult:
    """Compound Poisson recursion for every path of ``grids``.

    ``increments`` has shape ``(P, n, m)`` with ``n >= max(counts)``.
    """
    counts = grids.counts
    width = int(counts.max()) if counts.size else 0
    if increments.shape[1] < width:
        raise OutOfRangeError("Brownian increments do not cover every jump")
    x = _as_states(x0, len(grids), model.dim_d)
    return _lockstep(model, x, grids.times[:, :width], counts, increments[:, :width], grids.epsilon)


def em_grid_times(step_h: float, n: int) -> np.ndarray:
    """Grid ``k * h`` for ``k = 0..n-1``; computed as ``k / (1/h)`` when ``1/h`` is an integer
    so that points such as ``0.4`` on the ``h = 0.001`` grid are hit exactly."""
    inv = 1.0 / step_h
    k = np.arange(n, dtype=float)
    if abs(inv - round(inv)) < 1e-9 * inv:
        return k / round(inv)
    return k * step_h


def em_sde_batch(model: SdeModel, x0, step_h: float, n_steps: int, increments: np.ndarray) -> BatchResult:
    """Euler-Maruyama with left-point coefficients on ``t_k = k * h``."""
    n_paths = increments.shape[0]
    if increments.shape[1] < n_steps:
        raise OutOfRangeError("Brownian increments do not cover every EM step")
    grid = em_grid_times(step_h, n_steps)
    times = np.broadcast_to(grid, (n_paths, n_steps))
    steps = np.full(n_paths, n_steps)
    x = _as_states(x0, n_paths, model.dim_d)
    return _lockstep(model, x, times, steps, increments[:, :n_steps], step_h)


def _raise_if_failed(result: BatchResult) -> None:
    if result.fail_step[0]:
        raise SingularHitError(int(result.fail_step[0]), float(result.fail_time[0]))


def cp_sde_path(model: SdeModel, x0, grid: JumpGrid, brownian: GridBrownian) -> PathSample:
    """Compound Poisson approximation of one path.

    Returns the state after each of the ``count_cutoff`` jumps.  The k-th jump
    uses the k-th grid increment of ``brownian``, not the increment over the
    random inter-jump interval.

    Raises:
        SingularHitError: a coefficient was non-finite at some jump time.
    """
    if brownian.epsilon != grid.epsilon:
        raise ValueError("brownian and jump grid use different epsilon")
    n = grid.count_cutoff
    if len(brownian) < n:
        raise OutOfRangeError(f"brownian populated to {len(brownian)}, need {n}")
    batch = JumpGridBatch(grid.epsilon, grid.horizon, grid.jump_times[None, : n + 1], np.array([n]))
    result = cp_sde_batch(model, x0, batch, brownian.increments[None, :n])
    _raise_if_failed(result)
    init = _as_states(x0, 1, model.dim_d)[0]
    return PathSample(grid.jump_times[:n].copy(), result.states[0, :n], init)


def em_sde_path(model: SdeModel, x0, step_h: float, n_steps: int, brownian: GridBrownian) -> PathSample:
    """Euler-Maruyama path at ``t_1, ..., t_n``.

    Raises:
        SingularHitError: a coefficient was non-finite at a grid point.
    """
    if not np.isclose(brownian.epsilon, step_h, rtol=1e-12, atol=0):
        raise ValueError("brownian grid spacing must equal step_h")
    if len(brownian) < n_steps:
        raise OutOfRangeError(f"brownian populated to {len(brownian)}, need {n_steps}")
    result = em_sde_batch(model, x0, step_h, n_steps, brownian.increments[None, :n_steps])
    _raise_if_failed(result)
    times = em_grid_times(step_h, n_steps + 1)[1:]
    init = _as_states(x0, 1, model.dim_d)[0]
    return PathSample(times, result.states[0], init)


def scheme_state_at(path: PathSample, t: float) -> np.ndarray:
    """Left-constant lookup: value at the last record ``<= t``."""
    i = int(np.searchsorted(path.times, t, side="right"))
    return path.initial.copy() if i == 0 else path.values[i - 1]


def states_at(result: BatchResult, x0: np.ndarray, step_index: np.ndarray) -> np.ndarray:
    """Per-path state after ``step_index[p]`` steps (initial state for 0)."""
    n_paths = result.states.shape[0]
    out = np.array(x0, dtype=float, copy=True)
    take = step_index > 0
    out[take] = result.states[np.flatnonzero(take), step_index[take] - 1]
    return out.reshape(n_paths, -1)


def grid_indices(eval_times, epsilon: float, horizon: float) -> tuple[np.ndarray, np.ndarray]:
    """Validate evaluation times and split them into grid index and remainder.

    Every time must be a multiple ``j * epsilon`` (``j <= horizon / epsilon``)
    or the horizon itself; the remainder is nonzero only for a horizon off the grid.
    """
    t = np.asarray(eval_times, dtype=float)
    if t.size == 0:
        raise ValueError("eval_times is empty")
    j = np.floor(t / epsilon + 1e-9).astype(np.int64)
    rem = t - j * epsilon
    on_grid = np.abs(rem) <= 1e-9 * np.maximum(1.0, t)
    if not np.all(on_grid | (t == horizon)) or np.any(t < 0) or np.any(t > horizon):
        raise OutOfRangeError("eval_times must be grid multiples of epsilon within [0, horizon] or the horizon")
    rem = np.where(on_grid, 0.0, rem)
    return j, rem


def coupled_brownian(increments: np.ndarray, grid_index: np.ndarray, remainder: np.ndarray,
                     bridge_normals: np.ndarray) -> np.ndarray:
    """``W_t`` at each evaluation time from the grid prefix sums.

    Off-grid remainders get one extra independent Gaussian piece of variance
    ``remainder``; ``bridge_normals`` has shape ``(P, m)``.

    Returns shape ``(P, len(grid_index), m)``.
    """
    w = prefix_sums(increments)[:, grid_index]
    extra = np.sqrt(remainder)[None, :, None] * bridge_normals[:, None, :]
    return w + extra


def strong_errors_batch(model: SdeModel, exact: Callable, x0, grids: JumpGridBatch,
                        increments: np.ndarray, eval_times, bridge_normals=None):
    """Squared sup and terminal errors between the scheme and the coupled exact solution.

    ``exact(t, x0, w_t)`` is vectorized over paths.  Returns
    ``(sup_sq, terminal_sq, result)``; failed paths carry NaN errors.
    """
    eval_times = np.asarray(eval_times, dtype=float)
    j, rem = grid_indices(eval_times, grids.epsilon, grids.horizon)
    n_paths = len(grids)
    need = max(int(grids.counts.max()), int(j.max()))
    if increments.shape[1] < need:
        raise OutOfRangeError("Brownian increments do not cover the evaluation grid")
    if bridge_normals is None:
        bridge_normals = np.zeros((n_paths, model.dim_m))
    x0s = _as_states(x0, n_paths, model.dim_d)
    result = cp_sde_batch(model, x0s, grids, increments)
    w = coupled_brownian(increments, j, rem, bridge_normals)
    sq = np.empty((n_paths, eval_times.size))
    for i, t in enumerate(eval_times):
        scheme = states_at(result, x0s, grids.counts_at(t))
        truth = np.asarray(exact(np.full(n_paths, t), x0s, w[:, i]), dtype=float).reshape(n_paths, -1)
        sq[:, i] = np.sum((scheme - truth) ** 2, axis=1)
    sup_sq = sq.max(axis=1)
    terminal = sq[:, int(np.argmax(eval_times))]
    sup_sq[result.failed] = np.nan
    terminal[result.failed] = np.nan
    return sup_sq, terminal, result


def strong_error_sample(model: SdeModel, exact: Callable, x0, grid: JumpGrid, brownian: GridBrownian,
                        eval_times, bridge_normal=None) -> StrongErrorSample:
    """Coupled strong error of one path.

    The sup over ``[0, T]`` is approximated by the max over ``eval_times``
    (grid multiples of epsilon plus ``T``); the exact solution reads the same
    Brownian prefix sums the scheme consumed.

    Raises:
        SingularHitError: propagated from the scheme.
    """
    n = grid.count_cutoff
    batch = JumpGridBatch(grid.epsilon, grid.horizon, grid.jump_times[None, : n + 1], np.array([n]))
    bn = None if bridge_normal is None else np.asarray(bridge_normal, dtype=float).reshape(1, -1)
    sup_sq, terminal, result = strong_errors_batch(
        model, exact, x0, batch, brownian.increments[None], eval_times, bn
    )
    _raise_if_failed(result)
    return StrongErrorSample(float(sup_sq[0]), float(terminal[0]))


__all__ = [
    "SdeModel",
    "PathSample",
    "StrongErrorSample",
    "BatchResult",
    "cp_sde_path",
    "em_sde_path",
    "scheme_state_at",
    "strong_error_sample",
    "cp_sde_batch",
    "em_sde_batch",
    "strong_errors_batch",
    "em_grid_times",
    "grid_indices",
    "coupled_brownian",
    "prefix_sum",
]
