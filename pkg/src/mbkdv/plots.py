"""Figure rendering for CLI reports.

Every report-producing command draws its figures next to the delimited
output.  Figures are derived purely from the (deterministic) report data
and are saved with pinned metadata so identical runs produce identical
bytes.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = dict(dpi=140, metadata={"Software": "mbkdv"})


def _new_fig(width=6.0, height=4.0):
    return plt.figure(figsize=(width, height))


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_conserved(times, rows, path):
    """Relative drift of Nval and H_N, absolute drift of the means."""
    t = np.asarray(times)
    rows = np.asarray(rows)  # columns: E1, E2, Nval, H_N
    fig = _new_fig(6.4, 4.2)
    ax = fig.add_subplot(111)
    labels = ["E1", "E2", "Nval", "H_N"]
    for j, lab in enumerate(labels):
        ref = rows[0, j]
        if abs(ref) > 1e-12:
            drift = np.abs(rows[:, j] - ref) / abs(ref)
            lab = f"{lab} (rel)"
        else:
            drift = np.abs(rows[:, j] - ref)
            lab = f"{lab} (abs)"
        ax.plot(t, np.maximum(drift, 1e-18), label=lab)
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("conserved-quantity drift")
    ax.legend(fontsize=8)
    _finish(fig, path)


def plot_resonance_gaps(report_dict, path):
    blocks = report_dict["lower_bound"]["blocks"]
    fig = _new_fig()
    ax = fig.add_subplot(111)
    xs = [abs(b["argmin_n"]) for b in blocks if b["min_gap"] > 0]
    ys = [b["min_gap"] for b in blocks if b["min_gap"] > 0]
    if xs:
        ax.loglog(xs, ys, "o-", label="block min gap")
        expo = report_dict["lower_bound"]["empirical_exponent"]
        if expo is not None and not (isinstance(expo, float) and math.isnan(expo)):
            x0 = np.array([min(xs), max(xs)], dtype=float)
            y0 = ys[0] * (x0 / xs[0]) ** expo
            ax.loglog(x0, y0, "--", label=f"fit slope {expo:.2f}")
        ax.legend(fontsize=8)
    else:
        ax.set_title("every block minimum is an exact resonance (gap 0)", fontsize=9)
    ax.set_xlabel("|n|")
    ax.set_ylabel("min dispersion gap")
    _finish(fig, path)


def plot_scans(scans: dict, path):
    fig = _new_fig(6.8, 4.2)
    ax = fig.add_subplot(111)
    for regime, rep in scans.items():
        xs = [b["lo"] for b in rep["blocks"]]
        ys = [b["max_weight"] for b in rep["blocks"]]
        ax.loglog(xs, ys, "o-", label=regime)
    ax.set_xlabel("dyadic block start |n|")
    ax.set_ylabel("block max weight")
    ax.legend(fontsize=8)
    _finish(fig, path)


def plot_ensemble(logw_hist, report, path):
    edges, counts = logw_hist
    fig = _new_fig()
    ax = fig.add_subplot(111)
    ax.stairs(counts, edges, fill=True, alpha=0.6)
    ax.set_xlabel("log importance weight (accepted samples)")
    ax.set_ylabel("count")
    ax.set_title(
        f"acceptance {report['acceptance_rate']:.3f}, ESS {report['ess']:.0f}",
        fontsize=9,
    )
    _finish(fig, path)


def plot_tail(reports: list, path):
    fig = _new_fig()
    ax = fig.add_subplot(111)
    for rep in reports:
        rows = [r for r in rep["rows"] if not r["censored"]]
        x = [r["K"] ** 2 for r in rows]
        y = [math.log(r["tail"]) for r in rows]
        line, = ax.plot(x, y, "o", label=f"N={rep['trunc_N']}")
        if not math.isnan(rep["slope"]):
            xf = np.array([min(x), max(x)])
            ax.plot(xf, rep["intercept"] + rep["slope"] * xf, "--", color=line.get_color())
    ax.set_xlabel("K^2")
    ax.set_ylabel("log tail")
    ax.legend(fontsize=8)
    _finish(fig, path)


def plot_invariance(report_dict, path):
    rows = report_dict["functionals"]
    fig = _new_fig(6.4, 3.8)
    ax = fig.add_subplot(111)
    names = [r["name"] for r in rows]
    zs = [r["z"] for r in rows]
    ax.bar(range(len(names)), zs)
    ax.axhline(3.0, color="r", ls="--", lw=1)
    ax.axhline(-3.0, color="r", ls="--", lw=1)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, fontsize=7)
    ax.set_ylabel("paired z-score")
    _finish(fig, path)


def plot_growth(report_dict, path):
    fig = _new_fig()
    ax = fig.add_subplot(111)
    t = np.asarray(report_dict["T_grid"])
    q = np.asarray(report_dict["quantiles"])
    ax.semilogx(t, q * q, "o-", label="quantile^2")
    slope = report_dict["slope_q2_vs_logT"]
    x = np.log(t)
    ax.semilogx(t, q[0] ** 2 + slope * (x - x[0]), "--", label=f"slope {slope:.2f} vs log T")
    ax.set_xlabel("T")
    ax.set_ylabel("(1-eps) quantile of sup mixed norm, squared")
    ax.legend(fontsize=8)
    _finish(fig, path)


def plot_convergence(report_dict, path):
    fig = _new_fig()
    ax = fig.add_subplot(111)
    ns = report_dict["N_list"][:-1]
    errs = report_dict["errors"][:-1]
    ax.loglog(ns, errs, "o-")
    ax.set_xlabel("truncation N")
    ax.set_ylabel(f"mixed-norm error vs N={report_dict['reference_N']}")
    _finish(fig, path)
