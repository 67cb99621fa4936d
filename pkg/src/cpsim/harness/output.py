"""CSV and plot-script emission.

Floats are written with ``repr`` (shortest round-trip form), so identical
reports give byte-identical files.  Wall-clock timings go to a separate
``*_timing.txt`` file that is not part of the reproducible output.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

from ..errors import CpsimError
from .experiments import ConvergenceReport, LemmaReport, MomentReport, TableReport


class OutputError(CpsimError, OSError):
    """Writing an output file failed."""


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(path: Path, header, rows) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def write_text(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


_MOMENT_PLOT = '''"""Plot scheme moments against the reference curve (reads the CSVs next to this script)."""
import csv
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).parent
fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for ax, name, label in zip(axes, ["{prefix}_mean.csv", "{prefix}_second_moment.csv"], ["E X_t", "E X_t^2"]):
    rows = list(csv.DictReader(open(here / name)))
    t = [float(r["t"]) for r in rows]
    for col, style in (("cp_mc", "o-"), ("em_mc", "s--"), ("exact", "k-")):
        ax.plot(t, [float(r[col]) for r in rows], style, label=col)
    ax.set_xlabel("t")
    ax.set_ylabel(label)
    ax.legend()
fig.tight_layout()
fig.savefig(here / "{prefix}_moments.png", dpi=150)
'''

_RATE_PLOT = '''"""Log-log plot of the error against epsilon."""
import csv
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).parent
rows = list(csv.DictReader(open(here / "{name}.csv")))
x = [float(r["log_eps"]) for r in rows]
y = [float(r["log_err"]) for r in rows]
plt.plot(x, y, "o-")
plt.xlabel("log epsilon")
plt.ylabel("log error")
plt.savefig(here / "{name}.png", dpi=150)
'''

MOMENT_HEADER = ("t", "cp_mc", "cp_se", "em_mc", "em_se", "exact")
STRONG_HEADER = ("epsilon", "mean_sup_sq_err", "se", "log_eps", "log_err")
WEAK_HEADER = ("epsilon", "mc_mean", "se", "reference", "abs_error", "log_eps", "log_err")
LEMMA_HEADER = ("lemma", "alpha", "beta", "p", "k", "t", "epsilon", "ratio", "se", "limit", "status")


def _log(v: float) -> float:
    return math.log(v) if v > 0 else math.nan


def _summary_lines(checks: dict) -> list:
    return [f"{name}: {'n/a' if ok is None else ('PASS' if ok else 'FAIL')}" for name, ok in checks.items()]


def emit_moments(report: MomentReport, out: Path) -> list:
    prefix = "sde" if report.kind == "sde-moments" else "sve"
    mean_rows = [(r.t, r.cp_mean, r.cp_mean_se, r.em_mean, r.em_mean_se, r.ref_mean) for r in report.rows]
    sq_rows = [(r.t, r.cp_sq, r.cp_sq_se, r.em_sq, r.em_sq_se, r.ref_sq) for r in report.rows]
    lines = [
        f"kind: {report.kind}",
        f"n_paths: {report.n_paths}",
        f"epsilon: {report.epsilon!r}",
        f"em_step: {report.em_step!r}",
        f"cp_singular_hits: {report.cp_failures}",
        f"em_singular_hits: {report.em_failures}",
        f"em_first_singular_time: {_fmt(report.em_first_failure_time)}",
    ]
    for r in report.rows:
        lines.append(f"t={r.t!r} z_mean={_fmt(r.z_mean)} z_second={_fmt(r.z_sq)} "
                     f"em_z_mean={_fmt(r.em_z_mean)} em_z_second={_fmt(r.em_z_sq)} em_valid_paths={r.em_valid}")
    lines += _summary_lines(report.checks)
    return [
        write_csv(out / f"{prefix}_mean.csv", MOMENT_HEADER, mean_rows),
        write_csv(out / f"{prefix}_second_moment.csv", MOMENT_HEADER, sq_rows),
        write_text(out / f"{prefix}_summary.txt", "\n".join(lines) + "\n"),
        write_text(out / f"plot_{prefix}_moments.py", _MOMENT_PLOT.replace("{prefix}", prefix)),
    ]


def emit_convergence(report: ConvergenceReport, out: Path) -> list:
    fit = report.fit
    if report.kind == "sde-strong-rate":
        name = "strong_rate"
        rows = [(r.epsilon, r.error, r.se, _log(r.epsilon), _log(r.error)) for r in report.rows]
        header = STRONG_HEADER
        slope_line = (f"slope={_fmt(fit.slope)} intercept={_fmt(fit.intercept)} stderr={_fmt(fit.stderr)} "
                      f"theoretical={report.theoretical_slope!r} band=[{report.slope_band[0]!r}, "
                      f"{report.slope_band[1]!r}] degenerate={_fmt(fit.degenerate)}")
    else:
        name = "weak_rate"
        rows = [(r.epsilon, r.estimate, r.se, r.reference, r.error, _log(r.epsilon), _log(r.error))
                for r in report.rows]
        header = WEAK_HEADER
        slope_line = (f"slope={_fmt(fit.slope)} t={report.eval_time!r} "
                      f"(no two-sided rate claim; the theory gives an upper bound only)")
    summary = [slope_line] + _summary_lines(report.checks)
    return [
        write_csv(out / f"{name}.csv", header, rows),
        write_text(out / f"{name}_slope.txt", "\n".join(summary) + "\n"),
        write_text(out / f"plot_{name}.py", _RATE_PLOT.replace("{name}", name)),
    ]


def emit_lemmas(report: LemmaReport, out: Path) -> list:
    rows = [(r.lemma, r.alpha, r.beta, r.p, r.k, r.t, r.epsilon, r.ratio, r.se, r.limit,
             "PASS" if r.passed else "FAIL") for r in report.rows]
    return [write_csv(out / "lemma_checks.csv", LEMMA_HEADER, rows)]


def emit_table(report: TableReport, out: Path) -> list:
    name = report.kind.replace("-", "_")
    return [write_csv(out / f"{name}.csv", report.header, report.rows)]


def emit_outputs(report, out_dir) -> list:
    """Write every artifact of ``report`` under ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    if isinstance(report, MomentReport):
        paths = emit_moments(report, out)
    elif isinstance(report, ConvergenceReport):
        paths = emit_convergence(report, out)
    elif isinstance(report, LemmaReport):
        paths = emit_lemmas(report, out)
    elif isinstance(report, TableReport):
        paths = emit_table(report, out)
    else:
        raise TypeError(f"unsupported report type {type(report).__name__}")
    stem = getattr(report, "kind", "lemma-checks").replace("-", "_")
    extra = ""
    if isinstance(report, (MomentReport, ConvergenceReport, LemmaReport)) and report.n_paths:
        extra = f" per_path_ms={1e3 * report.seconds / report.n_paths:.4f}"
    paths.append(write_text(out / f"{stem}_timing.txt", f"seconds={report.seconds:.3f}{extra}\n"))
    return paths
