"""Volterra kernel of fractional Brownian motion.

``B^H_t = int_0^t K_H(t, s) dW_s`` with

    K_H(t, s) = C_H ((t - s)^(H - 1/2) + s^(H - 1/2) F(t / s)),   0 < s < t,
    F(u)      = (1/2 - H) int_1^u (r - 1)^(H - 3/2) (1 - r^(H - 1/2)) dr.

``F`` is evaluated by quadrature after substituting ``v = r - 1``: on
``[0, min(1, u - 1)]`` the integrand is ``v^(H - 1/2)`` times the smooth
``(1 - (1 + v)^(H - 1/2)) / v`` and goes through an algebraic-weight rule,
the remainder is smooth.  :class:`FTable` memoizes ``F`` on a log lattice for
simulation; the direct quadrature stays available for checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from .errors import OutOfRangeError, ParameterError

_QUAD_REL = 1e-12


def _check_h(H: float) -> float:
    H = float(H)
    if not 0.0 < H < 1.0:
        raise ParameterError(f"Hurst parameter must lie in (0, 1), got {H}")
    return H


def c_h(H: float) -> float:
    """``sqrt(2 H Gamma(3/2 - H) / (Gamma(H + 1/2) Gamma(2 - 2H)))``."""
    H = _check_h(H)
    g = special.gammaln
    return math.exp(0.5 * (math.log(2.0 * H) + g(1.5 - H) - g(H + 0.5) - g(2.0 - 2.0 * H)))


def f_of(u: float, H: float) -> float:
    """The singular integral ``F(u)`` by direct quadrature (relative accuracy ~1e-12)."""
    H = _check_h(H)
    u = float(u)
    if u < 1.0:
        raise OutOfRangeError(f"F is defined for u >= 1, got {u}")
    x = u - 1.0
    if x == 0.0 or H == 0.5:
        return 0.0
    c = H - 0.5

    def smooth(v):
        # (1 - (1+v)^c) / v, with its limit -c at v = 0
        return -math.expm1(c * math.log1p(v)) / v if v > 0 else -c

    head = min(1.0, x)
    total, _ = integrate.quad(smooth, 0.0, head, weight="alg", wvar=(c, 0.0),
                              epsabs=0.0, epsrel=_QUAD_REL, limit=200)
    if x > 1.0:
        def tail(v):
            return v ** (H - 1.5) * -math.expm1(c * math.log1p(v))

        # split by decades so the adaptive rule sees a well-scaled integrand
        edges = np.unique(np.concatenate([[1.0], 10.0 ** np.arange(1, math.ceil(math.log10(x))), [x]]))
        edges = edges[edges <= x]
        for a, b in zip(edges[:-1], edges[1:]):
            part, _ = integrate.quad(tail, a, b, epsabs=0.0, epsrel=_QUAD_REL, limit=500)
            total += part
    return (0.5 - H) * total


def _f_small(x, H):
    """Leading behavior of ``F(1 + x)`` as ``x -> 0``."""
    return (0.5 - H) ** 2 * x ** (H + 0.5) / (H + 0.5)


class FTable:
    """Cubic spline of ``log F(1 + x)`` against ``log x`` for ``x`` in ``[1e-8, 1e8]``.

    Below the lattice the leading power law is used; above it the direct
    quadrature.  Relative error is below 2e-10 for ``x >= 1e-6`` and grows to
    about 1e-8 at ``x = 1e-8``, where forming ``u = 1 + x`` already rounds ``x``
    by that much.
    """

    X_MIN = 1e-8
    X_MAX = 1e8

    def __init__(self, H: float, n_nodes: int = 1601):
        self.H = _check_h(H)
        if self.H == 0.5:
            self._spline = None
            return
        lx = np.linspace(math.log(self.X_MIN), math.log(self.X_MAX), n_nodes)
        vals = np.array([f_of(1.0 + math.exp(v), self.H) for v in lx])
        self._spline = CubicSpline(lx, np.log(vals))

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self._spline is None:
            return np.zeros_like(u)
        x = u - 1.0
        out = np.zeros_like(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            mid = (x >= self.X_MIN) & (x <= self.X_MAX)
            out[mid] = np.exp(self._spline(np.log(x[mid])))
            small = (x > 0) & (x < self.X_MIN)
            out[small] = _f_small(x[small], self.H)
        for i in np.flatnonzero(x > self.X_MAX):
            out.flat[i] = f_of(u.flat[i], self.H)
        if np.any(x < 0):
            raise OutOfRangeError("F is defined for u >= 1")
        return out


@lru_cache(maxsize=16)
def f_table(H: float) -> FTable:
    """Shared read-only table for ``H`` (built once per process)."""
    return FTable(H)


@dataclass(frozen=True)
class KernelEval:
    value: float
    method: str


def kernel_eval(t: float, s: float, H: float, method: str = "closed-form-F") -> KernelEval:
    """``K_H(t, s)`` with a tag for the evaluation route.

    ``method`` is ``closed-form-F`` or ``integral-representation`` (the
    latter needs ``H > 1/2``); ``H = 1/2`` always reports ``identity-half``.
    """
    H = _check_h(H)
    if H == 0.5:
        return KernelEval(kernel_k(t, s, H), "identity-half")
    if method == "closed-form-F":
        return KernelEval(kernel_k(t, s, H), method)
    if method == "integral-representation":
        if s >= t:
            return KernelEval(0.0, method)
        return KernelEval(kernel_k_integral(t, s, H), method)
    raise ValueError(f"unknown kernel method {method!r}")


def kernel_k(t: float, s: float, H: float, table: FTable | None = None) -> float:
    """``K_H(t, s)``; zero for ``s >= t`` and the indicator ``1{s < t}`` at ``H = 1/2``.

    Raises:
        OutOfRangeError: ``t <= 0``, ``s < 0``, or ``s = 0`` with ``H != 1/2``
            (the ``s^(H - 1/2)`` factor is singular or degenerate there).
    """
    H = _check_h(H)
    t = float(t)
    s = float(s)
    if t <= 0.0 or s < 0.0:
        raise OutOfRangeError(f"need t > 0 and s >= 0, got t={t}, s={s}")
    if s >= t:
        return 0.0
    if H == 0.5:
        return 1.0
    if s == 0.0:
        raise OutOfRangeError("K_H(t, 0) is singular for H != 1/2")
    f = f_of(t / s, H) if table is None else float(table(t / s))
    return c_h(H) * ((t - s) ** (H - 0.5) + s ** (H - 0.5) * f)


def kernel_k_array(t, s, H: float, table: FTable | None = None) -> np.ndarray:
    """Vectorized ``K_H`` through the memo table; entries with ``s >= t`` are 0 and ``s = 0`` gives inf."""
    H = _check_h(H)
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    out = np.zeros(t.shape)
    live = s < t
    if H == 0.5:
        out[live] = 1.0
        return out
    tab = f_table(H) if table is None else table
    tl, sl = t[live], s[live]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(sl > 0, tl / np.where(sl > 0, sl, 1.0), np.inf)
        f = np.where(np.isfinite(ratio), tab(np.where(np.isfinite(ratio), ratio, 1.0)), np.inf)
        out[live] = c_h(H) * ((tl - sl) ** (H - 0.5) + sl ** (H - 0.5) * f)
    return out


def kernel_k_integral(t: float, s: float, H: float) -> float:
    """``C_H (H - 1/2) s^(1/2 - H) int_s^t (r - s)^(H - 3/2) r^(H - 1/2) dr`` for ``H > 1/2``."""
    H = _check_h(H)
    if not H > 0.5:
        raise ParameterError("the integral representation needs H > 1/2")
    if not 0.0 < s < t:
        raise OutOfRangeError(f"need 0 < s < t, got s={s}, t={t}")
    val, _ = integrate.quad(lambda r: r ** (H - 0.5), s, t, weight="alg", wvar=(H - 1.5, 0.0),
                            epsabs=0.0, epsrel=_QUAD_REL, limit=200)
    return c_h(H) * (H - 0.5) * s ** (0.5 - H) * val


def covariance_r(s: float, t: float, H: float) -> float:
    """``1/2 (|s|^2H + |t|^2H - |t - s|^2H)``."""
    H = _check_h(H)
    return 0.5 * (abs(s) ** (2 * H) + abs(t) ** (2 * H) - abs(t - s) ** (2 * H))


# ------------------------------------------------------------ verification integrals


def _quad(f, a, b, **kw):
    val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-10, limit=400, **kw)
    return val


def kernel_product_integral(t: float, t2: float, H: float, table: FTable | None = None) -> float:
    """``int_0^min(t, t2) K_H(t, u) K_H(t2, u) du``, which should equal ``R_H(t, t2)``."""
    m = min(t, t2)

    def f(u):
        return kernel_k(t, u, H, table) * kernel_k(t2, u, H, table) if u > 0 else 0.0

    # split so each piece carries at most one endpoint singularity
    return _quad(f, 0.0, m / 2) + _quad(f, m / 2, m)


def increment_sq_integral(t: float, t2: float, H: float, upper: float | None = None,
                          table: FTable | None = None) -> float:
    """``int_0^upper (K_H(t, u) - K_H(t2, u))^2 du``.

    With the default ``upper = max(t, t2)`` this is the variance of
    ``B^H_t - B^H_t2`` and equals ``|t - t2|^(2H)``.
    """
    lo, hi = sorted((float(t), float(t2)))
    upper = hi if upper is None else float(upper)

    def f(u):
        return (kernel_k(t, u, H, table) - kernel_k(t2, u, H, table)) ** 2 if u > 0 else 0.0

    cuts = [0.0] + [c for c in (lo / 2, lo, (lo + hi) / 2) if 0.0 < c < upper] + [upper]
    return sum(_quad(f, a, b) for a, b in zip(cuts[:-1], cuts[1:]))


def holder_difference_integral(t: float, delta: float, H: float, table: FTable | None = None) -> float:
    """``int_delta^{t_delta} |K_H(t, s) - K_H(t, s_delta)|^2 ds``.

    ``s_delta = floor(s / delta) * delta`` and ``t_delta = floor(t / delta) * delta``;
    the integral is assembled cell by cell with a vectorized adaptive rule.
    """
    H = _check_h(H)
    tab = f_table(H) if table is None else table
    n_cells = int(math.floor(t / delta + 1e-12)) - 1
    if n_cells < 1:
        return 0.0
    left = delta * np.arange(1, n_cells + 1)
    k_left = kernel_k_array(t, left, H, tab)

    def f(y):
        # s = left + delta * x with x = 1 - (1 - y)^2 smoothing the t-endpoint
        x = 1.0 - (1.0 - y) ** 2
        s = left + delta * x
        s = np.minimum(s, np.nextafter(t, 0.0))
        return (kernel_k_array(t, s, H, tab) - k_left) ** 2 * 2.0 * (1.0 - y) * delta

    val, _ = integrate.quad_vec(f, 0.0, 1.0, epsabs=0.0, epsrel=1e-7, limit=400)
    return float(math.fsum(val))


def rate_exponent(H: float, beta: float = 1.0, eps_prime: float = 0.01) -> float:
    """Kernel exponent ``gamma = beta ^ (H ^ |1 - 2H| ^ (2 - 2H) - eps' 1{H in (0, 1/3] or H = 3/4})``."""
    H = _check_h(H)
    if H == 0.5:
        raise ParameterError("the fBm rate is stated for H != 1/2")
    core = min(H, abs(1.0 - 2.0 * H), 2.0 - 2.0 * H)
    if H <= 1.0 / 3.0 or H == 0.75:
        core -= eps_prime
    return min(beta, core)


def sve_rate(gamma: float) -> float:
    """Mean-square rate ``gamma / (2 (2 + gamma))`` of the Volterra scheme."""
    return gamma / (2.0 * (2.0 + gamma))


def kernel_table_rows(hs, ts, ss, method: str = "closed-form-F"):
    """Rows ``(H, t, s, K, method)`` over a product lattice (``s = 0`` rows are skipped for H != 1/2)."""
    rows = []
    for H in hs:
        for t in ts:
            for s in ss:
                if s == 0 and H != 0.5:
                    continue
                m = method if (method != "integral-representation" or H > 0.5) else "closed-form-F"
                ev = kernel_eval(t, s, H, m)
                rows.append((float(H), float(t), float(s), ev.value, ev.method))
    return rows
