"""Monte Carlo experiments: moment reproduction, rate studies, lemma checks, tables."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .. import fbm, grid, rng
from ..models import linear_singular_sde, linear_singular_sde_exact, linear_singular_sve
from ..oracles import (
    exact_linear_mean,
    exact_linear_second_moment,
    neumann_moment_curve,
)
from ..sde import cp_sde_batch, em_grid_times, em_sde_batch, states_at, strong_errors_batch
from ..sve import cp_sve_batch, em_sve_batch
from .config import ExperimentConfig, InitialValue
from .parallel import map_chunks
from .stats import RateFit, fit_rate, mean_se, within_band, z_score

# ------------------------------------------------------------------------ reports


@dataclass
class MomentRow:
    t: float
    cp_mean: float
    cp_mean_se: float
    cp_sq: float
    cp_sq_se: float
    em_mean: float
    em_mean_se: float
    em_sq: float
    em_sq_se: float
    em_valid: int
    ref_mean: float
    ref_sq: float

    @property
    def z_mean(self) -> float:
        return z_score(self.cp_mean, self.cp_mean_se, self.ref_mean)

    @property
    def z_sq(self) -> float:
        return z_score(self.cp_sq, self.cp_sq_se, self.ref_sq)

    @property
    def em_z_mean(self) -> float:
        return z_score(self.em_mean, self.em_mean_se, self.ref_mean)

    @property
    def em_z_sq(self) -> float:
        return z_score(self.em_sq, self.em_sq_se, self.ref_sq)


@dataclass
class MomentReport:
    kind: str
    rows: list
    n_paths: int
    epsilon: float
    em_step: float
    cp_failures: int
    em_failures: int
    em_first_failure_time: float
    checks: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(v for v in self.checks.values() if v is not None)


@dataclass
class RateRow:
    epsilon: float
    error: float
    se: float
    failures: int
    reference: float = math.nan
    estimate: float = math.nan


@dataclass
class ConvergenceReport:
    kind: str
    rows: list
    fit: RateFit
    theoretical_slope: float
    slope_band: tuple
    n_paths: int
    checks: dict = field(default_factory=dict)
    seconds: float = 0.0
    eval_time: float = math.nan

    @property
    def passed(self) -> bool:
        return all(v for v in self.checks.values() if v is not None)


@dataclass
class LemmaRow:
    lemma: str
    alpha: float
    beta: float
    p: float
    k: int
    t: float
    epsilon: float
    ratio: float
    se: float
    limit: float

    @property
    def passed(self) -> bool:
        return math.isfinite(self.ratio) and self.ratio <= self.limit


@dataclass
class LemmaReport:
    rows: list
    n_paths: int
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


@dataclass
class TableReport:
    kind: str
    header: tuple
    rows: list
    passed: bool = True
    seconds: float = 0.0


# ------------------------------------------------------------------------ helpers


def draw_initial(x0: InitialValue, master_seed: int, paths: np.ndarray) -> np.ndarray:
    """Per-path initial values, shape ``(P,)``; random kinds use the initial-value sub-stream."""
    if x0.kind == "constant":
        return np.full(paths.size, float(x0.value))
    if x0.kind == "normal":
        z = rng.normals(master_seed, paths, rng.TAG_INITIAL, 0, 1)[:, 0]
        return x0.mean + x0.std * z
    u = rng.uniforms(master_seed, paths, rng.TAG_INITIAL, 0, 1)[:, 0]
    return x0.low + (x0.high - x0.low) * u


def _moment_rows(cfg, cp, em, ref_mean, ref_sq) -> list:
    rows = []
    for q, t in enumerate(cfg.eval_times):
        c = cp[:, q]
        c = c[np.isfinite(c)]
        e = em[:, q]
        e = e[np.isfinite(e)]
        m, mse = mean_se(c)
        s, sse = mean_se(c**2)
        em_m, em_mse = mean_se(e)
        em_s, em_sse = mean_se(e**2)
        rows.append(MomentRow(float(t), m, mse, s, sse, em_m, em_mse, em_s, em_sse, int(e.size),
                              float(ref_mean[q]), float(ref_sq[q])))
    return rows


def _moment_checks(cfg, rows, band, cp_failures) -> dict:
    checks = {"cp-no-singular-hits": cp_failures == 0}
    for r in rows:
        if math.isfinite(r.ref_mean):
            checks[f"cp-mean t={r.t!r}"] = within_band(r.cp_mean, r.cp_mean_se, r.ref_mean, cfg.z_threshold, band)
        if math.isfinite(r.ref_sq):
            checks[f"cp-second-moment t={r.t!r}"] = within_band(r.cp_sq, r.cp_sq_se, r.ref_sq, cfg.z_threshold, band)
    return checks


def _concat(parts, idx):
    return np.concatenate([p[idx] for p in parts], axis=0)


# --------------------------------------------------------------------- SDE moments


def run_sde_moments(cfg: ExperimentConfig) -> MomentReport:
    """Compound Poisson and Euler-Maruyama moments of the singular-drift linear SDE."""
    start = time.perf_counter()
    params = cfg.sde_model
    model = linear_singular_sde(params)
    eps, h, T = cfg.epsilon, cfg.em_h, cfg.horizon
    times = np.asarray(cfg.eval_times, dtype=float)
    n_em = int(round(T / h))
    em_index = np.rint(times / h).astype(np.int64)

    def chunk(paths):
        x0 = draw_initial(cfg.x0, cfg.master_seed, paths)[:, None]
        grids = grid.sample_jump_grids(eps, T, cfg.master_seed, paths)
        inc = grid.sample_increments_batch(eps, 1, int(grids.counts.max()), cfg.master_seed, paths)
        res = cp_sde_batch(model, x0, grids, inc)
        cp = np.column_stack([states_at(res, x0, grids.counts_at(t))[:, 0] for t in times])
        cp[res.failed] = np.nan
        em_inc = grid.sample_increments_batch(h, 1, n_em, cfg.master_seed, paths, rng.TAG_EM_GAUSSIAN)
        em_res = em_sde_batch(model, x0, h, n_em, em_inc)
        em = np.column_stack([states_at(em_res, x0, np.full(paths.size, i))[:, 0] for i in em_index])
        # a value at step i is trustworthy only if the path failed later than step i
        bad = em_res.failed[:, None] & (em_res.fail_step[:, None] <= em_index[None, :])
        em[bad] = np.nan
        return cp, res.fail_step, em, em_res.fail_step, em_res.fail_time

    parts = map_chunks(chunk, cfg.n_paths, cfg.chunk_size)
    cp, cp_fail, em, em_fail, em_fail_time = (_concat(parts, i) for i in range(5))
    ref_mean = np.array([exact_linear_mean(params, t, cfg.x0.first_moment) for t in times])
    ref_sq = np.array([exact_linear_second_moment(params, t, cfg.x0.second_moment) for t in times])
    rows = _moment_rows(cfg, cp, em, ref_mean, ref_sq)
    band = 0.02 if cfg.relative_band is None else cfg.relative_band
    n_cp_fail = int(np.count_nonzero(cp_fail))
    hit = em_fail_time[em_fail > 0]
    return MomentReport(
        "sde-moments", rows, cfg.n_paths, eps, h, n_cp_fail, int(np.count_nonzero(em_fail)),
        float(hit.min()) if hit.size else math.nan, _moment_checks(cfg, rows, band, n_cp_fail),
        time.perf_counter() - start,
    )


# --------------------------------------------------------------------- SVE moments


def reference_curves(cfg: ExperimentConfig, times) -> tuple[np.ndarray, np.ndarray]:
    """Neumann-series mean and (when ``mu = 0``) second-moment curves at ``times``."""
    p = cfg.sve_model
    o = cfg.oracle
    mean, _ = neumann_moment_curve(p, "mean", times, o.tol, o.max_terms, o.step)
    if p.mu == 0:
        sq, _ = neumann_moment_curve(p, "second-moment", times, o.tol, o.max_terms, o.step)
        sq = sq.values
    else:
        sq = np.full(len(times), np.nan)
    return mean.values, sq


def _cp_sve_chunk(cfg, model, eps, times):
    def chunk(paths):
        x0 = draw_initial(cfg.x0, cfg.master_seed, paths)
        grids = grid.sample_jump_grids(eps, cfg.horizon, cfg.master_seed, paths)
        inc = grid.sample_increments_batch(eps, 1, int(grids.counts.max()), cfg.master_seed, paths)
        res = cp_sve_batch(model, x0, grids, inc, times)
        return res.values[:, :, 0], res.fail_step

    return chunk


def run_sve_moments(cfg: ExperimentConfig) -> MomentReport:
    """Compound Poisson and Euler-Maruyama moments of the singular linear Volterra equation."""
    start = time.perf_counter()
    model = linear_singular_sve(cfg.sve_model)
    eps, h = cfg.epsilon, cfg.em_h
    times = np.asarray(cfg.eval_times, dtype=float)
    ref_mean, ref_sq = reference_curves(cfg, times)
    cp_chunk = _cp_sve_chunk(cfg, model, eps, times)
    n_em = int(np.rint(times.max() / h))

    def chunk(paths):
        cp, cp_fail = cp_chunk(paths)
        x0 = draw_initial(cfg.x0, cfg.master_seed, paths)
        em_inc = grid.sample_increments_batch(h, 1, n_em, cfg.master_seed, paths, rng.TAG_EM_GAUSSIAN)
        em = em_sve_batch(model, x0, h, times, em_inc)
        return cp, cp_fail, em.values[:, :, 0], em.fail_step, em.fail_history

    parts = map_chunks(chunk, cfg.n_paths, cfg.chunk_size)
    cp, cp_fail, em, em_fail, em_hist = (_concat(parts, i) for i in range(5))
    rows = _moment_rows(cfg, cp, em, ref_mean, ref_sq)
    band = 0.05 if cfg.relative_band is None else cfg.relative_band
    n_cp_fail = int(np.count_nonzero(cp_fail))
    hit = em_hist[em_fail > 0]
    hit = hit[np.isfinite(hit)]
    return MomentReport(
        "sve-moments", rows, cfg.n_paths, eps, h, n_cp_fail, int(np.count_nonzero(em_fail)),
        float(hit.min()) if hit.size else math.nan, _moment_checks(cfg, rows, band, n_cp_fail),
        time.perf_counter() - start,
    )


# ------------------------------------------------------------------- rate studies


def sde_theoretical_slope(cfg: ExperimentConfig) -> float:
    """``gamma ^ beta/2`` with ``gamma = 1 - max(alpha, beta)`` from the drift and ``beta = 1``
    for the time-constant diffusion."""
    p = cfg.sde_model
    return min(1.0 - max(p.alpha, p.beta), 0.5)


def strong_eval_times(eps: float, horizon: float) -> np.ndarray:
    """Grid multiples ``j * eps <= horizon`` plus the horizon itself."""
    n = int(math.floor(horizon / eps + 1e-9))
    pts = eps * np.arange(n + 1)
    if horizon - pts[-1] > 1e-9 * max(1.0, horizon):
        pts = np.append(pts, horizon)
    else:
        pts[-1] = horizon
    return pts


def run_strong_rate(cfg: ExperimentConfig) -> ConvergenceReport:
    """Coupled strong error ``E sup_t |X^eps_t - X_t|^2`` across the epsilon ladder."""
    start = time.perf_counter()
    params = cfg.sde_model
    model = linear_singular_sde(params)
    exact = linear_singular_sde_exact(params)
    T = cfg.horizon
    rows = []
    for eps in cfg.epsilon_ladder:
        evals = strong_eval_times(eps, T)

        def chunk(paths, eps=eps, evals=evals):
            x0 = draw_initial(cfg.x0, cfg.master_seed, paths)[:, None]
            grids = grid.sample_jump_grids(eps, T, cfg.master_seed, paths)
            n_inc = max(int(grids.counts.max()), int(math.floor(T / eps + 1e-9)))
            inc = grid.sample_increments_batch(eps, 1, n_inc, cfg.master_seed, paths)
            bridge = rng.normals(cfg.master_seed, paths, rng.TAG_BRIDGE, 0, 1)
            sup_sq, _, res = strong_errors_batch(model, exact, x0, grids, inc, evals, bridge)
            return sup_sq, res.fail_step

        parts = map_chunks(chunk, cfg.n_paths, cfg.chunk_size)
        sup_sq, fails = _concat(parts, 0), _concat(parts, 1)
        m, se = mean_se(sup_sq[np.isfinite(sup_sq)])
        rows.append(RateRow(float(eps), m, se, int(np.count_nonzero(fails))))
    fit = fit_rate([r.epsilon for r in rows], [r.error for r in rows])
    lo, hi = cfg.slope_band
    checks = {"slope-in-band": None if fit.degenerate else bool(lo <= fit.slope <= hi),
              "cp-no-singular-hits": all(r.failures == 0 for r in rows)}
    return ConvergenceReport("sde-strong-rate", rows, fit, sde_theoretical_slope(cfg), (lo, hi),
                             cfg.n_paths, checks, time.perf_counter() - start)


def run_weak_rate(cfg: ExperimentConfig) -> ConvergenceReport:
    """``|E Y^eps_t - E Y_t|`` at the last evaluation time across the epsilon ladder."""
    start = time.perf_counter()
    model = linear_singular_sve(cfg.sve_model)
    t = float(cfg.eval_times[-1])
    ref_mean, _ = reference_curves(cfg, np.array([t]))
    ref = float(ref_mean[0])
    rows = []
    for eps in cfg.epsilon_ladder:
        parts = map_chunks(_cp_sve_chunk(cfg, model, eps, np.array([t])), cfg.n_paths, cfg.chunk_size)
        vals, fails = _concat(parts, 0)[:, 0], _concat(parts, 1)
        m, se = mean_se(vals[np.isfinite(vals)])
        rows.append(RateRow(float(eps), abs(m - ref), se, int(np.count_nonzero(fails)), ref, m))
    fit = fit_rate([r.epsilon for r in rows], [r.error for r in rows])
    errs = [r.error for r in rows]
    checks = {"monotone-decrease": all(b < a for a, b in zip(errs, errs[1:])),
              "cp-no-singular-hits": all(r.failures == 0 for r in rows)}
    report = ConvergenceReport("sve-weak-rate", rows, fit, math.nan, (math.nan, math.nan), cfg.n_paths,
                               checks, time.perf_counter() - start)
    report.eval_time = t
    return report


# ------------------------------------------------------------------- lemma checks


def run_lemma_checks(cfg: ExperimentConfig) -> LemmaReport:
    """Jump-time and counting-process moment ratios against their bounds.

    Jump times: ``E|r^a - (S_k)^a|^b / ((k eps)^(a b) k^(-b/2))`` with ``r = k eps``.
    Counts: ``E|N^eps_t - t|^p / (eps^(p/2) (t^(p/2) v t))``.
    """
    start = time.perf_counter()
    lat = cfg.lemma
    kmax = max(lat.ks)
    tmax = max(lat.ts)

    def chunk(paths):
        u = rng.uniforms(cfg.master_seed, paths, rng.TAG_EXPONENTIAL, 0, kmax)
        unit_times = np.cumsum(-np.log(u), axis=1)
        counts = {}
        for eps in lat.epsilons:
            g = grid.sample_jump_grids(eps, tmax, cfg.master_seed, paths)
            counts[eps] = {t: g.counts_at(t) for t in lat.ts}
        return unit_times, counts

    parts = map_chunks(chunk, cfg.n_paths, cfg.chunk_size)
    unit = np.concatenate([p[0] for p in parts], axis=0)
    rows = []
    for eps in lat.epsilons:
        for k in lat.ks:
            s_k = eps * unit[:, k - 1]
            r = k * eps
            for a in lat.alphas:
                for b in lat.betas:
                    bound = r ** (a * b) * k ** (-b / 2)
                    m, se = mean_se(np.abs(r**a - s_k**a) ** b / bound)
                    rows.append(LemmaRow("jump-times", a, b, math.nan, k, math.nan, eps, m, se, lat.ratio_limit))
    for eps in lat.epsilons:
        for t in lat.ts:
            n = np.concatenate([p[1][eps][t] for p in parts])
            dev = np.abs(eps * n - t)
            for pw in lat.ps:
                bound = eps ** (pw / 2) * max(t ** (pw / 2), t)
                m, se = mean_se(dev**pw / bound)
                rows.append(LemmaRow("counts", math.nan, math.nan, pw, 0, t, eps, m, se, lat.ratio_limit))
    return LemmaReport(rows, cfg.n_paths, time.perf_counter() - start)


# ------------------------------------------------------------------------- tables


def run_kernel_table(cfg: ExperimentConfig) -> TableReport:
    start = time.perf_counter()
    k = cfg.kernel
    rows = fbm.kernel_table_rows(k.hs, k.ts, k.ss, k.method)
    return TableReport("kernel-table", ("H", "t", "s", "K", "method"), rows, True, time.perf_counter() - start)


def run_oracle(cfg: ExperimentConfig) -> TableReport:
    """Neumann-series curves on the uniform grid of spacing ``oracle.step`` over ``[0, horizon]``.

    ``n_terms_used`` and ``term_tail_norm`` report the larger of the two series.
    """
    start = time.perf_counter()
    p = cfg.sve_model
    o = cfg.oracle
    n = int(round(cfg.horizon / o.step))
    ts = em_grid_times(o.step, n + 1)
    mean, rep_m = neumann_moment_curve(p, "mean", ts, o.tol, o.max_terms, o.step)
    if p.mu == 0:
        sq, rep_s = neumann_moment_curve(p, "second-moment", ts, o.tol, o.max_terms, o.step)
        sq_vals = sq.values
        n_terms = max(rep_m.n_terms, rep_s.n_terms)
        tail = max(rep_m.tail_norm, rep_s.tail_norm)
    else:
        sq_vals = np.full(ts.size, np.nan)
        n_terms, tail = rep_m.n_terms, rep_m.tail_norm
    rows = [(float(t), float(a), float(b), n_terms, tail) for t, a, b in zip(ts, mean.values, sq_vals)]
    return TableReport("oracle", ("t", "mean", "second_moment", "n_terms_used", "term_tail_norm"), rows, True,
                       time.perf_counter() - start)


RUNNERS = {
    "sde-moments": run_sde_moments,
    "sve-moments": run_sve_moments,
    "sde-strong-rate": run_strong_rate,
    "sve-weak-rate": run_weak_rate,
    "lemma-checks": run_lemma_checks,
    "kernel-table": run_kernel_table,
    "oracle": run_oracle,
}


def run_experiment(cfg: ExperimentConfig):
    return RUNNERS[cfg.kind](cfg)
