"""Rescaled Poisson jump clock and Brownian increments on the epsilon-grid.

The clock with jump size ``epsilon`` has i.i.d. exponential waiting times of
mean ``epsilon``, drawn by inverse CDF ``-epsilon * log(U)``.  The Brownian
motion is only ever sampled on the deterministic grid ``k * epsilon``; the
k-th increment drives the k-th jump of the compound Poisson schemes.

Single-path objects (:class:`JumpGrid`, :class:`GridBrownian`) and their
batched counterparts share one code path, so row ``p`` of a batch is
bit-identical to the single-path sample of path ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rng
from .errors import OutOfRangeError


@dataclass(frozen=True)
class JumpGrid:
    """Realized jump times ``S_1 < S_2 < ...`` of one rescaled clock.

    ``jump_times`` runs up to and including the first jump after ``horizon``;
    ``count_cutoff`` is the number of jumps in ``[0, horizon]``.
    """

    epsilon: float
    horizon: float
    jump_times: np.ndarray
    count_cutoff: int

    @property
    def active_times(self) -> np.ndarray:
        return self.jump_times[: self.count_cutoff]


@dataclass(frozen=True)
class JumpGridBatch:
    """Jump times of many paths, padded with ``inf`` past each path's last draw."""

    epsilon: float
    horizon: float
    times: np.ndarray
    counts: np.ndarray

    def __len__(self) -> int:
        return self.times.shape[0]

    def grid(self, p: int) -> JumpGrid:
        row = self.times[p]
        return JumpGrid(self.epsilon, self.horizon, row[np.isfinite(row)].copy(), int(self.counts[p]))

    def counts_at(self, t: float) -> np.ndarray:
        """Per-path ``#{k : S_k <= t}``."""
        _check_time(t, self.horizon)
        return np.sum(self.times <= t, axis=1)


def _initial_chunk(epsilon: float, horizon: float) -> int:
    mean = horizon / epsilon
    return int(math.ceil(mean + 4.0 * math.sqrt(mean) + 8.0))


def _accumulate(epsilon: float, horizon: float, draw: Callable[[int, int], np.ndarray]):
    """Shared generator: ``draw(start, count)`` returns uniforms of shape (P, count)."""
    chunk = _initial_chunk(epsilon, horizon)
    u = draw(0, chunk)
    times = np.cumsum(-epsilon * np.log(u), axis=1)
    drawn = chunk
    pending = times[:, -1] <= horizon
    while np.any(pending):
        more = draw(drawn, chunk)
        waits = -epsilon * np.log(more)
        # carry the last partial sum into the chunk so the float additions
        # happen in the same order as one long cumsum
        ext = np.cumsum(np.concatenate([times[:, -1:], waits], axis=1), axis=1)[:, 1:]
        times = np.concatenate([times, ext], axis=1)
        drawn += chunk
        pending = times[:, -1] <= horizon
    counts = np.sum(times <= horizon, axis=1)
    # truncate each row just past its first jump beyond the horizon
    width = int(counts.max()) + 1
    times = times[:, :width].copy()
    cols = np.arange(width)
    times[cols[None, :] > counts[:, None]] = np.inf
    return times, counts


def _check_eps_horizon(epsilon: float, horizon: float) -> None:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")


def sample_jump_grid(epsilon: float, horizon: float, stream) -> JumpGrid:
    """Draw the jump times of one path.

    ``stream`` is anything with ``exponential_uniforms(start, count)``; a
    :class:`~cpsim.rng.PathStream` in normal use.
    """
    _check_eps_horizon(epsilon, horizon)

    def draw(start, count):
        return np.asarray(stream.exponential_uniforms(start, count), dtype=float)[None, :]

    times, counts = _accumulate(epsilon, horizon, draw)
    n = int(counts[0])
    return JumpGrid(float(epsilon), float(horizon), times[0, : n + 1], n)


def sample_jump_grids(epsilon: float, horizon: float, master_seed: int, path_indices) -> JumpGridBatch:
    """Batched :func:`sample_jump_grid` for the given path indices."""
    _check_eps_horizon(epsilon, horizon)
    paths = np.atleast_1d(np.asarray(path_indices))

    def draw(start, count):
        return rng.uniforms(master_seed, paths, rng.TAG_EXPONENTIAL, start, count)

    times, counts = _accumulate(epsilon, horizon, draw)
    return JumpGridBatch(float(epsilon), float(horizon), times, counts)


def _check_time(t: float, horizon: float) -> None:
    if not 0.0 <= t <= horizon:
        raise OutOfRangeError(f"t={t!r} outside [0, {horizon!r}]")


def count_at(grid: JumpGrid, t: float) -> int:
    """Number of jumps in ``[0, t]`` (a jump exactly at ``t`` counts)."""
    _check_time(t, grid.horizon)
    return int(np.searchsorted(grid.jump_times, t, side="right"))


def rescaled_count(grid: JumpGrid, t: float) -> float:
    """The rescaled clock value ``epsilon * count_at(grid, t)``."""
    return grid.epsilon * count_at(grid, t)


@dataclass(frozen=True)
class GridBrownian:
    """Brownian increments ``W_{k eps} - W_{(k-1) eps}``, stored as rows of an (n, m) array."""

    epsilon: float
    dim_m: int
    increments: np.ndarray

    @classmethod
    def empty(cls, epsilon: float, dim_m: int = 1) -> "GridBrownian":
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        if dim_m < 1:
            raise ValueError("dim_m must be >= 1")
        return cls(float(epsilon), int(dim_m), np.zeros((0, int(dim_m))))

    def __len__(self) -> int:
        return self.increments.shape[0]


def _scaled_normals(z: np.ndarray, epsilon: float, n: int, dim_m: int) -> np.ndarray:
    return math.sqrt(epsilon) * z.reshape(-1, n, dim_m)


def sample_increments(brownian: GridBrownian, up_to_index: int, stream, tag: int = rng.TAG_GAUSSIAN) -> GridBrownian:
    """Extend ``brownian`` so increments ``1..up_to_index`` exist.

    Coordinate ``i`` of increment ``k`` is Gaussian draw ``(k - 1) * m + i`` of
    the stream, so increments never depend on how the extension was chunked.
    """
    have = len(brownian)
    if up_to_index < have:
        raise OutOfRangeError(f"up_to_index={up_to_index} below populated length {have}")
    if up_to_index == have:
        return brownian
    m = brownian.dim_m
    n_new = up_to_index - have
    if tag == rng.TAG_GAUSSIAN and hasattr(stream, "gaussians"):
        z = np.asarray(stream.gaussians(have * m, n_new * m), dtype=float)
    else:
        z = np.asarray(stream.normals(tag, have * m, n_new * m), dtype=float)
    new = _scaled_normals(z, brownian.epsilon, n_new, m)[0]
    return GridBrownian(brownian.epsilon, m, np.concatenate([brownian.increments, new], axis=0))


def sample_increments_batch(
    epsilon: float, dim_m: int, n_increments: int, master_seed: int, path_indices, tag: int = rng.TAG_GAUSSIAN
) -> np.ndarray:
    """Increments ``1..n_increments`` for many paths, shape ``(P, n, m)``."""
    paths = np.atleast_1d(np.asarray(path_indices))
    z = rng.normals(master_seed, paths, tag, 0, n_increments * dim_m)
    return _scaled_normals(z, epsilon, n_increments, dim_m)


def prefix_sums(increments: np.ndarray) -> np.ndarray:
    """``W_{k eps}`` for ``k = 0..n`` along the increment axis (second to last)."""
    shape = list(increments.shape)
    shape[-2] = 1
    zero = np.zeros(shape)
    return np.cumsum(np.concatenate([zero, increments], axis=-2), axis=-2)


def prefix_sum(brownian: GridBrownian, k: int) -> np.ndarray:
    """``W_{k eps}``: the sum of the first ``k`` increments (zero vector at ``k = 0``)."""
    if not 0 <= k <= len(brownian):
        raise OutOfRangeError(f"k={k} outside populated range [0, {len(brownian)}]")
    if k == 0:
        return np.zeros(brownian.dim_m)
    return np.cumsum(brownian.increments[:k], axis=0)[-1]
