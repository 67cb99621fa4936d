"""Counter-based random streams for per-path reproducible Monte Carlo.

Every random number is a pure function of ``(master_seed, path_index, tag,
draw_index)``.  The generator is Philox4x32-10 (Salmon et al., SC'11): the
64-bit master seed is the Philox key and the 128-bit counter is
``(draw_lo, draw_hi, path_index, tag)``.  Nothing is stateful, so any subset of
paths can be generated in any order or on any worker with identical results.

Derived variates (fixed per release):

* uniform on the open interval (0, 1): 53 bits from words 0 and 1,
  ``(k + 0.5) / 2**53``;
* standard normal: Box-Muller cosine branch, one Philox block per variate
  (words 0-1 for the radius uniform, words 2-3 for the angle uniform).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

TAG_EXPONENTIAL = 1
TAG_GAUSSIAN = 2
TAG_BRIDGE = 3
TAG_INITIAL = 4
TAG_EM_GAUSSIAN = 5

_MAX_SEED = 2**64
_MAX_PATH = 2**32
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds; all arguments are 32-bit words."""
    c0 = np.uint32(c0)
    c1 = np.uint32(c1)
    c2 = np.uint32(c2)
    c3 = np.uint32(c3)
    k0 = np.uint32(k0)
    k1 = np.uint32(k1)
    for _ in range(10):
        p0 = np.uint64(0xD2511F53) * np.uint64(c0)
        p1 = np.uint64(0xCD9E8D57) * np.uint64(c2)
        hi0 = np.uint32(p0 >> np.uint64(32))
        lo0 = np.uint32(p0 & np.uint64(0xFFFFFFFF))
        hi1 = np.uint32(p1 >> np.uint64(32))
        lo1 = np.uint32(p1 & np.uint64(0xFFFFFFFF))
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = np.uint32(k0 + np.uint32(0x9E3779B9))
        k1 = np.uint32(k1 + np.uint32(0xBB67AE85))
    return c0, c1, c2, c3


@nb.njit(cache=True, nogil=True)
def _open_unit(w0, w1):
    k = (np.uint64(w0) >> np.uint64(5)) * np.uint64(67108864) + (np.uint64(w1) >> np.uint64(6))
    return (np.float64(k) + 0.5) * _INV_2_53


@nb.njit(cache=True, nogil=True)
def _fill_uniforms(out, k0, k1, paths, tag, start):
    n_paths, count = out.shape
    for p in range(n_paths):
        path = paths[p]
        for j in range(count):
            d = np.uint64(start + j)
            w0, w1, _, _ = philox4x32(
                d & np.uint64(0xFFFFFFFF), d >> np.uint64(32), path, tag, k0, k1
            )
            out[p, j] = _open_unit(w0, w1)


@nb.njit(cache=True, nogil=True)
def _fill_normals(out, k0, k1, paths, tag, start):
    n_paths, count = out.shape
    for p in range(n_paths):
        path = paths[p]
        for j in range(count):
            d = np.uint64(start + j)
            w0, w1, w2, w3 = philox4x32(
                d & np.uint64(0xFFFFFFFF), d >> np.uint64(32), path, tag, k0, k1
            )
            u1 = _open_unit(w0, w1)
            u2 = _open_unit(w2, w3)
            out[p, j] = np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def _key(master_seed: int) -> tuple[int, int]:
    seed = int(master_seed)
    if not 0 <= seed < _MAX_SEED:
        raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {master_seed}")
    return seed & 0xFFFFFFFF, seed >> 32


def _paths(path_indices) -> np.ndarray:
    paths = np.atleast_1d(np.asarray(path_indices, dtype=np.int64))
    if paths.size and (paths.min() < 0 or paths.max() >= _MAX_PATH):
        raise ValueError("path indices must lie in [0, 2**32)")
    return paths.astype(np.uint32)


def uniforms(master_seed: int, path_indices, tag: int, start: int, count: int) -> np.ndarray:
    """Open-interval uniforms, shape ``(len(path_indices), count)``.

    Row ``p``, column ``j`` is draw ``start + j`` of sub-stream ``tag`` of path
    ``path_indices[p]``.
    """
    k0, k1 = _key(master_seed)
    paths = _paths(path_indices)
    out = np.empty((paths.size, int(count)))
    if out.size:
        _fill_uniforms(out, k0, k1, paths, np.uint32(tag), np.uint64(start))
    return out


def normals(master_seed: int, path_indices, tag: int, start: int, count: int) -> np.ndarray:
    """Standard normals, laid out like :func:`uniforms`."""
    k0, k1 = _key(master_seed)
    paths = _paths(path_indices)
    out = np.empty((paths.size, int(count)))
    if out.size:
        _fill_normals(out, k0, k1, paths, np.uint32(tag), np.uint64(start))
    return out


@dataclass(frozen=True)
class PathStream:
    """The random source of one simulated path.

    Two independent sub-streams are exposed to the grid samplers: uniforms for
    the exponential waiting times and normals for the Brownian increments.
    Extra tags (bridge increment, initial value, EM baseline noise) are drawn
    through :meth:`uniforms` / :meth:`normals` directly.
    """

    master_seed: int
    path_index: int

    def __post_init__(self):
        _key(self.master_seed)
        _paths([self.path_index])

    def uniforms(self, tag: int, start: int, count: int) -> np.ndarray:
        return uniforms(self.master_seed, [self.path_index], tag, start, count)[0]

    def normals(self, tag: int, start: int, count: int) -> np.ndarray:
        return normals(self.master_seed, [self.path_index], tag, start, count)[0]

    def exponential_uniforms(self, start: int, count: int) -> np.ndarray:
        return self.uniforms(TAG_EXPONENTIAL, start, count)

    def gaussians(self, start: int, count: int) -> np.ndarray:
        return self.normals(TAG_GAUSSIAN, start, count)
