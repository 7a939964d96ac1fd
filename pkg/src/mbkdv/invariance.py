"""Monte Carlo tests of Gibbs-measure invariance under the truncated flow.

The estimator is paired: each sampled state is evaluated by every test
functional before and after being evolved to time t, so an invariant
measure makes the weighted mean of the differences zero up to Monte Carlo
noise, with the between-sample variance of the functionals removed from
the comparison.  At t = 0 the differences are bitwise zero.

Test functionals are bounded continuous maps depending on finitely many
modes, mirroring the class the invariance statement quantifies over.  Five
builtins are provided; reports carry one row per functional with the
weighted paired-difference mean, its standard error and the z-score.

Ensembles, chunking and determinism follow :mod:`mbkdv.measure`: chunk c of
the ensemble is drawn from SeedSequence(seed, spawn_key=(c,)) and reduced
in order, so reports are identical for any worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._chunks import chunk_spans, run_chunks
from .dynamics import IntegrationError, Stepper
from .fields import FieldPair, SobolevParams, l2_pair_arr, mixed_norm_arr
from .measure import (
    MeasureConfig,
    chunk_rng,
    gibbs_log_weight_arr,
    sample_gaussian_arrays,
)

MAX_FAILURE_FRACTION = 1e-3


@dataclass(frozen=True)
class TestFunctional:
    """Bounded continuous functional of finitely many modes.

    ``fn`` maps stacked coefficient arrays (u, v) of shape (..., N+1) to a
    real array over the leading axes.
    """

    name: str
    max_mode: int
    bound: float
    fn: object

    def __call__(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(u, v), dtype=float)

    def on_pair(self, p: FieldPair) -> float:
        return float(self(p.u.coef[None, :], p.v.coef[None, :])[0])


def builtin_functionals() -> list[TestFunctional]:
    return [
        TestFunctional("cos_re_u1", 1, 1.0, lambda u, v: np.cos(u[..., 1].real)),
        TestFunctional("exp_neg_abs2_v2", 2, 1.0, lambda u, v: np.exp(-np.abs(v[..., 2]) ** 2)),
        TestFunctional(
            "tanh_u2_x_v1", 2, 1.0, lambda u, v: np.tanh(u[..., 2].real * v[..., 1].imag)
        ),
        TestFunctional(
            "capped_abs2_u1", 1, 10.0, lambda u, v: np.minimum(np.abs(u[..., 1]) ** 2, 10.0)
        ),
        TestFunctional("sin_im_v3", 3, 1.0, lambda u, v: np.sin(v[..., 3].imag)),
    ]


@dataclass
class FunctionalRow:
    name: str
    mean_before: float
    mean_after: float
    diff_mean: float
    diff_se: float
    z: float


@dataclass
class InvarianceReport:
    t: float
    flow: str           # "full" or "linear"
    weighting: str      # "gibbs" or "uniform"
    M: int
    n_accepted: int
    n_failed: int
    ess: float
    rows: list
    invalid: bool
    config: dict = field(default_factory=dict)

    def max_abs_z(self) -> float:
        return max(abs(r.z) for r in self.rows)

    def to_json_dict(self) -> dict:
        return {
            "t": self.t,
            "flow": self.flow,
            "weighting": self.weighting,
            "M": self.M,
            "n_accepted": self.n_accepted,
            "n_failed": self.n_failed,
            "ess": self.ess,
            "invalid": self.invalid,
            "config": self.config,
            "interpretation": (
                f"{len(self.rows)} bounded mode-local functionals tested at "
                "|z| < 3 each; at 3 sigma the family-wise false-alarm rate "
                f"stays near {len(self.rows) * 0.27:.1f} percent (Bonferroni). "
                "Finitely many functionals can only support, never exhaust, "
                "the invariance claim over the full functional class."
            ),
            "functionals": [
                {
                    "name": r.name,
                    "mean_before": r.mean_before,
                    "mean_after": r.mean_after,
                    "diff_mean": r.diff_mean,
                    "diff_se": r.diff_se,
                    "z": r.z,
                }
                for r in self.rows
            ],
        }


@dataclass
class EvolveSpec:
    """Flow parameters shared by the invariance and growth runs."""

    dt: float
    method: str = "if-rk4"
    include_nonlinear: bool = True

    def steps_for(self, t: float) -> tuple[int, float]:
        if t == 0:
            return 0, self.dt
        n = max(1, round(abs(t) / self.dt))
        return n, t / n


def _evolve_batch(u, v, alpha, trunc_n, spec: EvolveSpec, t: float):
    """Advance a stacked batch to time t; returns (u, v, finite_mask)."""
    n_steps, dt_signed = spec.steps_for(t)
    if n_steps == 0:
        return u, v, np.ones(u.shape[0], dtype=bool)
    stepper = Stepper(
        trunc_n, alpha, dt_signed, method=spec.method,
        include_nonlinear=spec.include_nonlinear,
    )
    for _ in range(n_steps):
        u, v = stepper.step(u, v)
    finite = np.all(np.isfinite(u), axis=-1) & np.all(np.isfinite(v), axis=-1)
    return u, v, finite


_FUNCTIONAL_REGISTRY = {f.name: f for f in builtin_functionals()}


def _invariance_chunk(payload: dict):
    cfg = MeasureConfig(**payload["cfg"])
    rng = chunk_rng(cfg.seed, payload["index"])
    u, v = sample_gaussian_arrays(cfg.trunc_N, cfg.alpha, cfg.B, payload["count"], rng)
    accepted = l2_pair_arr(u, v) <= cfg.B
    if payload["weighting"] == "gibbs":
        w = np.exp(gibbs_log_weight_arr(u, v))
    else:
        w = np.ones(u.shape[0])
    u, v, w = u[accepted], v[accepted], w[accepted]
    fs = [_FUNCTIONAL_REGISTRY[name] for name in payload["functionals"]]
    before = [f(u, v) for f in fs]
    spec = EvolveSpec(
        dt=payload["dt"], method=payload["method"],
        include_nonlinear=payload["flow"] == "full",
    )
    ue, ve, finite = _evolve_batch(u, v, cfg.alpha, cfg.trunc_N, spec, payload["t"])
    n_failed = int(np.count_nonzero(~finite))
    w = w[finite]
    stats = []
    per_sample = [] if payload.get("keep_per_sample") else None
    for f, fb in zip(fs, before):
        fa = f(ue, ve)[finite]
        fb = fb[finite]
        d = fa - fb
        stats.append(
            {
                "sw": float(np.sum(w)),
                "sw2": float(np.sum(w * w)),
                "swd": float(np.sum(w * d)),
                "sw2d": float(np.sum(w * w * d)),
                "sw2d2": float(np.sum(w * w * d * d)),
                "swb": float(np.sum(w * fb)),
                "swa": float(np.sum(w * fa)),
            }
        )
        if per_sample is not None:
            per_sample.append(np.stack([w, fb, fa], axis=1))
    return {
        "n_accepted": int(u.shape[0]),
        "n_failed": n_failed,
        "stats": stats,
        "per_sample": per_sample,
    }


def _resolve_functionals(fs) -> list[str]:
    if fs is None:
        return [f.name for f in builtin_functionals()]
    names = []
    for f in fs:
        name = f.name if isinstance(f, TestFunctional) else str(f)
        if name not in _FUNCTIONAL_REGISTRY:
            if isinstance(f, TestFunctional):
                _FUNCTIONAL_REGISTRY[name] = f
            else:
                raise KeyError(f"unknown functional {name!r}")
        names.append(name)
    return names


def invariance_test(
    mcfg: MeasureConfig,
    scfg,
    t: float,
    functionals=None,
    flow: str = "full",
    weighting: str = "gibbs",
    workers: int = 1,
    keep_per_sample: bool = False,
):
    """Paired invariance test of the (weighted) ensemble under the flow.

    ``scfg`` needs attributes alpha, dt, method (a SimConfig works, or any
    object with those fields); its alpha must match the measure config.
    Returns an InvarianceReport; when ``keep_per_sample`` is set, a second
    value carries per-functional arrays of (weight, f_before, f_after).
    """
    if float(scfg.alpha) != float(mcfg.alpha):
        raise ValueError("flow and measure alpha must agree")
    names = _resolve_functionals(functionals)
    payload_extra = {
        "t": float(t),
        "dt": float(scfg.dt),
        "method": getattr(scfg, "method", "if-rk4"),
        "flow": flow,
        "weighting": weighting,
        "functionals": names,
        "keep_per_sample": keep_per_sample,
    }
    payloads = []
    for index, (start, count) in enumerate(chunk_spans(mcfg.M, mcfg.chunk_size)):
        payloads.append(
            {
                "cfg": _mcfg_dict(mcfg),
                "index": index,
                "start": start,
                "count": count,
                **payload_extra,
            }
        )
    chunks = run_chunks(_invariance_chunk, payloads, workers)
    n_accepted = sum(c["n_accepted"] for c in chunks)
    n_failed = sum(c["n_failed"] for c in chunks)
    rows = []
    ess = 0.0
    for i, name in enumerate(names):
        agg = {k: sum(c["stats"][i][k] for c in chunks) for k in chunks[0]["stats"][i]}
        sw, sw2 = agg["sw"], agg["sw2"]
        if sw <= 0:
            rows.append(FunctionalRow(name, math.nan, math.nan, math.nan, math.nan, math.nan))
            continue
        dbar = agg["swd"] / sw
        var = (agg["sw2d2"] - 2.0 * dbar * agg["sw2d"] + dbar * dbar * sw2) / (sw * sw)
        se = math.sqrt(max(var, 0.0))
        z = 0.0 if (se == 0.0 and dbar == 0.0) else (dbar / se if se > 0 else math.inf)
        rows.append(
            FunctionalRow(
                name=name,
                mean_before=agg["swb"] / sw,
                mean_after=agg["swa"] / sw,
                diff_mean=dbar,
                diff_se=se,
                z=z,
            )
        )
        ess = (sw * sw / sw2) if sw2 > 0 else 0.0
    invalid = n_accepted > 0 and n_failed > MAX_FAILURE_FRACTION * n_accepted
    report = InvarianceReport(
        t=float(t),
        flow=flow,
        weighting=weighting,
        M=mcfg.M,
        n_accepted=n_accepted,
        n_failed=n_failed,
        ess=ess,
        rows=rows,
        invalid=invalid,
        config={
            "trunc_N": mcfg.trunc_N,
            "alpha": float(mcfg.alpha),
            "B": float(mcfg.B),
            "seed": mcfg.seed,
            "dt": float(scfg.dt),
            "method": getattr(scfg, "method", "if-rk4"),
        },
    )
    if keep_per_sample:
        per = [
            np.concatenate([c["per_sample"][i] for c in chunks], axis=0)
            for i in range(len(names))
        ]
        return report, per
    return report


def non_invariance_control(mcfg, scfg, t, functionals=None, workers: int = 1):
    """Negative control: the Gibbs weight is deliberately dropped, so the
    evolved ensemble follows the plain Gaussian-plus-cutoff law, for which
    no invariance claim holds.  Schema-identical to invariance_test."""
    return invariance_test(
        mcfg, scfg, t, functionals, flow="full", weighting="uniform", workers=workers
    )


def _mcfg_dict(cfg: MeasureConfig) -> dict:
    return {
        "trunc_N": cfg.trunc_N,
        "alpha": float(cfg.alpha),
        "B": float(cfg.B),
        "seed": cfg.seed,
        "M": cfg.M,
        "chunk_size": cfg.chunk_size,
    }


# -- growth profiles ----------------------------------------------------------


@dataclass
class GrowthReport:
    T_grid: list
    quantiles: list
    eps: float
    slope_q2_vs_logT: float
    n_samples: int
    n_failed: int
    config: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "T_grid": list(self.T_grid),
            "quantiles": list(self.quantiles),
            "eps": self.eps,
            "slope_q2_vs_logT": self.slope_q2_vs_logT,
            "n_samples": self.n_samples,
            "n_failed": self.n_failed,
            "config": self.config,
        }


def _growth_chunk(payload: dict):
    cfg = MeasureConfig(**payload["cfg"])
    rng = chunk_rng(cfg.seed, payload["index"])
    u, v = sample_gaussian_arrays(cfg.trunc_N, cfg.alpha, cfg.B, payload["count"], rng)
    accepted = l2_pair_arr(u, v) <= cfg.B
    w = np.exp(gibbs_log_weight_arr(u, v))
    u, v, w = u[accepted], v[accepted], w[accepted]
    s1, s2 = payload["sobolev"]
    t_grid = payload["t_grid"]
    dt = payload["dt"]
    running = mixed_norm_arr(u, v, s1, s2)
    sups = np.empty((u.shape[0], len(t_grid)))
    stepper = Stepper(cfg.trunc_N, cfg.alpha, dt, method=payload["method"])
    t_now = 0.0
    for j, t_target in enumerate(t_grid):
        n_steps = max(0, round((t_target - t_now) / dt))
        for _ in range(n_steps):
            u, v = stepper.step(u, v)
            running = np.maximum(running, mixed_norm_arr(u, v, s1, s2))
        t_now += n_steps * dt
        sups[:, j] = running
    finite = np.all(np.isfinite(sups), axis=1)
    return {"w": w[finite], "sups": sups[finite], "n_failed": int(np.count_nonzero(~finite))}


def weighted_quantile(values: np.ndarray, weights: np.ndarray, q: float) -> float:
    order = np.argsort(values, kind="stable")
    cw = np.cumsum(weights[order])
    cw /= cw[-1]
    return float(values[order][int(np.searchsorted(cw, q, side="left"))])


def growth_profile(
    mcfg: MeasureConfig,
    scfg,
    sp: SobolevParams,
    t_grid,
    eps: float = 0.1,
    workers: int = 1,
) -> GrowthReport:
    """Ensemble profile of sup_{t' <= T} mixed_norm along the flow.

    For each T in the increasing grid, reports the weighted (1 - eps)
    quantile of the running supremum (evaluated at every step), plus the
    least-squares slope of quantile^2 against log T, the shape the
    logarithmic growth bound predicts.
    """
    t_grid = [float(t) for t in t_grid]
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])) or not t_grid:
        raise ValueError("T grid must be strictly increasing and nonempty")
    payloads = []
    for index, (start, count) in enumerate(chunk_spans(mcfg.M, mcfg.chunk_size)):
        payloads.append(
            {
                "cfg": _mcfg_dict(mcfg),
                "index": index,
                "start": start,
                "count": count,
                "sobolev": (sp.s1, sp.s2),
                "t_grid": t_grid,
                "dt": float(scfg.dt),
                "method": getattr(scfg, "method", "if-rk4"),
            }
        )
    chunks = run_chunks(_growth_chunk, payloads, workers)
    w = np.concatenate([c["w"] for c in chunks])
    sups = np.concatenate([c["sups"] for c in chunks], axis=0)
    n_failed = sum(c["n_failed"] for c in chunks)
    if w.size == 0:
        raise ValueError("no accepted samples; increase B or M")
    quantiles = [weighted_quantile(sups[:, j], w, 1.0 - eps) for j in range(len(t_grid))]
    x = np.log(np.asarray(t_grid))
    y = np.asarray(quantiles) ** 2
    xb, yb = float(np.mean(x)), float(np.mean(y))
    slope = float(np.sum((x - xb) * (y - yb)) / np.sum((x - xb) ** 2))
    return GrowthReport(
        T_grid=t_grid,
        quantiles=[float(q) for q in quantiles],
        eps=eps,
        slope_q2_vs_logT=slope,
        n_samples=int(w.size),
        n_failed=n_failed,
        config=_mcfg_dict(mcfg) | {"dt": float(scfg.dt)},
    )


# -- truncation convergence ----------------------------------------------------


@dataclass
class ConvergenceReport:
    N_list: list
    errors: list            # mixed-norm distance to the largest-N reference
    reference_N: int
    T: float
    nonincreasing_after_first: bool
    config: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "N_list": list(self.N_list),
            "errors": list(self.errors),
            "reference_N": self.reference_N,
            "T": self.T,
            "nonincreasing_after_first": self.nonincreasing_after_first,
            "config": self.config,
        }


def truncation_convergence(
    p0: FieldPair,
    alpha: float,
    n_list,
    t_final: float,
    sp: SobolevParams,
    dt: float = 1e-3,
    method: str = "if-rk4",
) -> ConvergenceReport:
    """Distance of S_N^T P_N p0 (prolonged by zero) to the largest-N run.

    The error table should settle into a decreasing pattern once N resolves
    the datum; the last entry (reference against itself) is exactly zero and
    excluded from the monotonicity verdict.
    """
    n_list = sorted(int(n) for n in n_list)
    if len(n_list) < 2:
        raise ValueError("need at least two truncation levels")
    if p0.trunc_N < n_list[-1]:
        # prolong the datum by zero so every projection is defined
        pad = n_list[-1] - p0.trunc_N
        u = np.concatenate([p0.u.coef, np.zeros(pad, complex)])
        v = np.concatenate([p0.v.coef, np.zeros(pad, complex)])
        p0 = FieldPair.from_arrays(u, v, mean_zero=p0.mean_zero)
    ref_n = n_list[-1]
    finals = {}
    for n in n_list:
        proj = p0.project(n)
        u, v = proj.u.coef[: n + 1].copy(), proj.v.coef[: n + 1].copy()
        spec = EvolveSpec(dt=dt, method=method)
        u, v, finite = _evolve_batch(u[None, :], v[None, :], alpha, n, spec, t_final)
        if not finite[0]:
            raise IntegrationError(t_final)
        finals[n] = (u[0], v[0])
    uref, vref = finals[ref_n]
    errors = []
    for n in n_list:
        u = np.zeros(ref_n + 1, complex)
        v = np.zeros(ref_n + 1, complex)
        u[: n + 1], v[: n + 1] = finals[n]
        errors.append(float(mixed_norm_arr(u - uref, v - vref, sp.s1, sp.s2)))
    interior = errors[:-1]
    noninc = all(b <= a for a, b in zip(interior, interior[1:]))
    return ConvergenceReport(
        N_list=n_list,
        errors=errors,
        reference_N=ref_n,
        T=float(t_final),
        nonincreasing_after_first=noninc,
        config={"alpha": float(alpha), "dt": dt, "method": method},
    )
