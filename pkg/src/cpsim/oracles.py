"""Analytic and semi-analytic references.

* exact central moments of a Poisson variable, as integer polynomials in the rate;
* closed-form solution and moments of the linear SDE with a two-piece singular drift;
* moment curves of linear Volterra equations with doubly singular kernels, by a
  Neumann series of product-integrated operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy.special import roots_jacobi

from .errors import OutOfRangeError, ParameterError, TruncationError

# ----------------------------------------------------------- Poisson central moments


@dataclass(frozen=True)
class CentralMomentPoly:
    """``E(N - lam)^order`` for ``N ~ Poisson(lam)`` as exact coefficients, constant term first."""

    order: int
    coefficients: tuple

    def __call__(self, lam: float) -> float:
        return float(sum(c * lam**k for k, c in enumerate(self.coefficients)))

    @property
    def degree(self) -> int:
        nz = [k for k, c in enumerate(self.coefficients) if c]
        return nz[-1] if nz else 0


def _trim(c: list) -> list:
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return c


@lru_cache(maxsize=None)
def _central_coeffs(n: int) -> tuple:
    if n == 0:
        return (1,)
    if n == 1:
        return (0,)
    prev2 = list(_central_coeffs(n - 2))
    prev = list(_central_coeffs(n - 1))
    # a_n = lam * (a_{n-1}' + (n-1) a_{n-2})
    deriv = [k * c for k, c in enumerate(prev)][1:] or [0]
    width = max(len(deriv), len(prev2))
    inner = [(deriv[k] if k < len(deriv) else 0) + (n - 1) * (prev2[k] if k < len(prev2) else 0)
             for k in range(width)]
    return tuple(_trim([0] + inner))


def central_moment_poly(n: int) -> CentralMomentPoly:
    """Central moment polynomial from ``a_{n+1} = lam (a_n' + n a_{n-1})``, ``a_0 = 1``, ``a_1 = 0``."""
    if n < 0:
        raise ValueError("order must be nonnegative")
    return CentralMomentPoly(int(n), _central_coeffs(int(n)))


def poisson_central_moment_bruteforce(n: int, lam: float, dps: int = 40) -> float:
    """``sum_k (k - lam)^n P(N = k)`` in high precision, truncated at ``lam + 40 sqrt(lam) + 50``."""
    with mp.workdps(dps):
        lam_m = mp.mpf(lam)
        top = int(math.ceil(lam + 40.0 * math.sqrt(lam) + 50.0))
        total = mp.mpf(0)
        p = mp.exp(-lam_m)
        for k in range(top + 1):
            if k:
                p *= lam_m / k
            total += (k - lam_m) ** n * p
        return float(total)


# --------------------------------------------------------- singular-drift linear SDE


@dataclass(frozen=True)
class SingularDriftParams:
    """``dX = mu(t) X dt + sigma0 X dW`` with
    ``mu(t) = mu0 |t - s0|^-alpha`` on ``[0, 1/2)`` and ``mu1 |t - s1|^-beta`` on ``[1/2, 1]``."""

    sigma0: float = 0.1
    mu0: float = 0.3
    mu1: float = 0.7
    s0: float = 0.4
    s1: float = 0.6
    alpha: float = 0.5
    beta: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.s0 < 0.5:
            raise ParameterError("s0 must lie in (0, 1/2)")
        if not 0.5 < self.s1 < 1.0:
            raise ParameterError("s1 must lie in (1/2, 1)")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ParameterError(f"{name} must lie in (0, 1)")

    def drift_rate(self, t) -> np.ndarray:
        """``mu(t)`` (infinite at ``s0`` and ``s1`` unless that piece has a zero scale)."""
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            lo = self.mu0 * np.abs(t - self.s0) ** (-self.alpha) if self.mu0 else np.zeros_like(t)
            hi = self.mu1 * np.abs(t - self.s1) ** (-self.beta) if self.mu1 else np.zeros_like(t)
        return np.where(t < 0.5, lo, hi)


def _piece(center: float, scale: float, expo: float, a: float, b: float) -> float:
    """``int_a^b scale |s - center|^-expo ds``."""

    def anti(s):
        d = s - center
        return math.copysign(abs(d) ** (1.0 - expo), d) / (1.0 - expo)

    return scale * (anti(b) - anti(a))


def mu_integral(params: SingularDriftParams, t: float) -> float:
    """``int_0^t mu(s) ds`` in closed form."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise OutOfRangeError(f"t={t} outside [0, 1]")
    p = params
    if t <= 0.5:
        return _piece(p.s0, p.mu0, p.alpha, 0.0, t)
    return _piece(p.s0, p.mu0, p.alpha, 0.0, 0.5) + _piece(p.s1, p.mu1, p.beta, 0.5, t)


def exact_linear_path_value(params: SingularDriftParams, x0, t, w_t):
    """``x0 exp(int_0^t mu - sigma0^2 t / 2 + sigma0 w_t)``; vectorized over ``x0``, ``w_t``."""
    t_arr = np.asarray(t, dtype=float)
    if t_arr.ndim == 0:
        m = mu_integral(params, float(t_arr))
    else:
        uniq, inv = np.unique(t_arr, return_inverse=True)
        m = np.array([mu_integral(params, u) for u in uniq])[inv].reshape(t_arr.shape)
    s = params.sigma0
    return np.asarray(x0, dtype=float) * np.exp(m - 0.5 * s * s * t_arr + s * np.asarray(w_t, dtype=float))


def exact_linear_mean(params: SingularDriftParams, t: float, x0_mean: float = 1.0) -> float:
    return x0_mean * math.exp(mu_integral(params, t))


def exact_linear_second_moment(params: SingularDriftParams, t: float, x0_sq_mean: float = 1.0) -> float:
    return x0_sq_mean * math.exp(2.0 * mu_integral(params, t) + params.sigma0**2 * float(t))


# --------------------------------------------------------- singular Volterra moments


@dataclass(frozen=True)
class VolterraMomentParams:
    """Linear equation
    ``X_t = X0 + mu int (t-s)^-alpha0 |s-s0|^-beta0 X ds + sqrt(sigma) int (t-s)^-(alpha1/2) |s-s1|^-(beta1/2) X dW``."""

    mu: float = 0.0
    sigma: float = 0.0
    alpha0: float = 0.0
    beta0: float = 0.0
    alpha1: float = 0.0
    beta1: float = 0.0
    s0: float = 0.0
    s1: float = 0.0
    x0_mean: float = 1.0
    x0_sq_mean: float = 1.0

    def __post_init__(self):
        for name in ("alpha0", "beta0", "alpha1", "beta1", "s0", "s1"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ParameterError(f"{name} must lie in [0, 1)")
        if self.sigma < 0:
            raise ParameterError("sigma must be nonnegative")


@dataclass(frozen=True)
class GridFunction:
    """Piecewise-linear function through ``(nodes, values)``."""

    nodes: np.ndarray
    values: np.ndarray

    def __call__(self, t) -> np.ndarray:
        return np.interp(t, self.nodes, self.values)


@dataclass
class NeumannReport:
    term_norms: list = field(default_factory=list)
    converged: bool = False

    @property
    def n_terms(self) -> int:
        return len(self.term_norms)

    @property
    def tail_norm(self) -> float:
        return self.term_norms[-1] if self.term_norms else 0.0


@lru_cache(maxsize=None)
def _gauss_jacobi(n: int, right_exp: float, left_exp: float):
    """Nodes and weights for ``(1 - x)^-right_exp (1 + x)^-left_exp`` on ``[-1, 1]``."""
    return roots_jacobi(n, -right_exp, -left_exp)


def _check_exponents(alpha: float, beta: float) -> None:
    if not (0.0 <= alpha < 1.0 and 0.0 <= beta < 1.0):
        raise ParameterError(f"exponents must lie in [0, 1), got alpha={alpha}, beta={beta}")


def operator_matrix(nodes: np.ndarray, a: float, alpha: float, beta: float, eval_times,
                    n_gauss: int = 8) -> np.ndarray:
    """Matrix ``M`` with ``(M f)[r] = int_0^{t_r} (t_r - s)^-alpha |s - a|^-beta f(s) ds``.

    ``f`` is the piecewise-linear interpolant of its values at ``nodes``.  The
    integration range is cut at every node, at ``a`` and at ``t_r``; on each
    cell the singular endpoint weights are integrated exactly by Gauss-Jacobi
    and the remaining smooth factors are sampled at its nodes.
    """
    _check_exponents(alpha, beta)
    nodes = np.asarray(nodes, dtype=float)
    evals = np.asarray(eval_times, dtype=float)
    n = nodes.size
    mat = np.zeros((evals.size, n))
    for r, t in enumerate(evals):
        if t <= 0:
            continue
        inner = nodes[(nodes > 0) & (nodes < t)]
        extra = [a] if 0.0 < a < t else []
        pts = np.unique(np.concatenate([[0.0], inner, extra, [t]]))
        lo, hi = pts[:-1], pts[1:]
        right = np.where(hi == t, alpha, 0.0) + np.where(hi == a, beta, 0.0)
        left = np.where(lo == a, beta, 0.0)
        cell = np.minimum(np.searchsorted(nodes, lo, side="right") - 1, n - 2)
        for key in sorted(set(zip(right.tolist(), left.tolist()))):
            sel = (right == key[0]) & (left == key[1])
            x, w = _gauss_jacobi(n_gauss, *key)
            p = lo[sel][:, None]
            q = hi[sel][:, None]
            half = (q - p) / 2
            s = p + half * (1 + x)
            fac = w * half ** (1.0 - key[0] - key[1])
            if alpha:
                fac = fac * np.where(q == t, 1.0, (t - s) ** (-alpha))
            if beta:
                fac = fac * np.where((p == a) | (q == a), 1.0, np.abs(s - a) ** (-beta))
            j = cell[sel]
            lam = (s - nodes[j][:, None]) / (nodes[j + 1] - nodes[j])[:, None]
            np.add.at(mat[r], j, np.sum(fac * (1 - lam), axis=1))
            np.add.at(mat[r], j + 1, np.sum(fac * lam, axis=1))
    return mat


def apply_singular_operator(f: GridFunction, mu: float, a: float, alpha: float, beta: float,
                            eval_grid) -> GridFunction:
    """``(K f)(t) = mu int_0^t (t - s)^-alpha |s - a|^-beta f(s) ds`` on ``eval_grid``."""
    _check_exponents(alpha, beta)
    grid = np.asarray(eval_grid, dtype=float)
    if mu == 0:
        return GridFunction(grid, np.zeros_like(grid))
    mat = operator_matrix(f.nodes, a, alpha, beta, grid)
    return GridFunction(grid, mu * (mat @ np.asarray(f.values, dtype=float)))


def graded_mesh(h: float, singular_points, ratio: float = 0.15, min_gap: float = 1e-11) -> np.ndarray:
    """Uniform mesh of spacing ``h`` on ``[0, 1]`` refined geometrically near ``singular_points``.

    Within ``h / ratio`` of each point the uniform nodes are replaced by
    distances shrinking by the factor ``1 + ratio`` down to ``min_gap``.
    """
    nodes = set(np.linspace(0.0, 1.0, int(round(1.0 / h)) + 1).tolist())
    reach = h / ratio
    gaps = []
    d = reach
    while d > min_gap:
        gaps.append(d)
        d /= 1.0 + ratio
    for p in singular_points:
        nodes = {x for x in nodes if abs(x - p) >= reach or x in (0.0, 1.0)}
        for g in gaps:
            for y in (p - g, p + g):
                if 0.0 < y < 1.0:
                    nodes.add(y)
        if 0.0 <= p <= 1.0:
            nodes.add(float(p))
    return np.array(sorted(nodes))


def neumann_series(mu: float, a: float, alpha: float, beta: float, eval_grid, h: float = 2.0**-10,
                   tol: float = 1e-8, max_terms: int = 60) -> tuple[np.ndarray, NeumannReport]:
    """``1 + sum_{n>=1} (K^n 1)(t)`` on ``eval_grid`` for ``K = K^{mu,a}_{alpha,beta}``.

    Raises:
        TruncationError: the latest term's sup-norm is still ``>= tol`` after ``max_terms``.
    """
    _check_exponents(alpha, beta)
    grid = np.asarray(eval_grid, dtype=float)
    report = NeumannReport()
    if mu == 0:
        report.converged = True
        return np.ones_like(grid), report
    nodes = graded_mesh(h, sorted({float(a), 0.0}))
    mat = mu * operator_matrix(nodes, a, alpha, beta, nodes)
    term = np.ones_like(nodes)
    total = term.copy()
    for _ in range(max_terms):
        term = mat @ term
        total += term
        norm = float(np.max(np.abs(term)))
        report.term_norms.append(norm)
        if norm < tol:
            report.converged = True
            break
    if not report.converged:
        raise TruncationError(report.n_terms, report.tail_norm, tol)
    # K applied to sum_{n>=0} K^n 1 gives the n >= 1 part at arbitrary times
    out = mu * operator_matrix(nodes, a, alpha, beta, grid) @ total
    return 1.0 + out, report


def neumann_moment_curve(params: VolterraMomentParams, which: str, eval_grid, tol: float = 1e-8,
                         max_terms: int = 60, h: float = 2.0**-10) -> tuple[GridFunction, NeumannReport]:
    """Mean (``which='mean'``) or second moment (``which='second-moment'``, needs ``mu = 0``)."""
    grid = np.asarray(eval_grid, dtype=float)
    p = params
    if which == "mean":
        vals, rep = neumann_series(p.mu, p.s0, p.alpha0, p.beta0, grid, h, tol, max_terms)
        return GridFunction(grid, p.x0_mean * vals), rep
    if which == "second-moment":
        if p.mu != 0:
            raise ParameterError("the second-moment series holds only for mu = 0")
        vals, rep = neumann_series(p.sigma, p.s1, p.alpha1, p.beta1, grid, h, tol, max_terms)
        return GridFunction(grid, p.x0_sq_mean * vals), rep
    raise ValueError(f"which must be 'mean' or 'second-moment', got {which!r}")


def mittag_leffler_curve(mu: float, alpha: float, t, n_terms: int = 200) -> np.ndarray:
    """``sum_n (mu Gamma(1 - alpha))^n t^(n(1 - alpha)) / Gamma(n(1 - alpha) + 1)``.

    This is the mean curve of the kernel ``(t - s)^-alpha`` without the second
    singular factor, obtained by iterating the Beta integral.
    """
    t = np.asarray(t, dtype=float)
    c = mu * math.gamma(1.0 - alpha)
    out = np.ones_like(t)
    if c == 0:
        return out
    for n in range(1, n_terms):
        e = n * (1.0 - alpha)
        mag = np.exp(n * math.log(abs(c)) + e * np.log(np.maximum(t, 1e-300)) - math.lgamma(e + 1.0))
        out = out + math.copysign(1.0, c) ** n * np.where(t > 0, mag, 0.0)
    return out
