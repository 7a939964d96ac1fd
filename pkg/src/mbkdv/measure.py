"""Samplers and estimators for the Gaussian and Gibbs ensembles.

The Gaussian reference measure assigns each coefficient an independent
complex normal,

    uhat(n) = (x + i y) / n,   vhat(n) = (x' + i y') / (sqrt(alpha) n),

for 1 <= n <= N with x, y, x', y' standard normals (so E|uhat(n)|^2 = 2/n^2,
the unique convention consistent with the density exp(-n^2 |a_n|^2 / 2) over
the two real coordinates of a_n).  The mean of u is pinned to zero; the mean
of v, a flow-frozen coordinate with flat reference measure, is proposed
uniformly from [-B/(2 sqrt(pi)), B/(2 sqrt(pi))] and the constant is folded
into the partition estimate.

The Gibbs measure reweights the Gaussian by exp((1/2) integral(u v^2)) under
an L2 cutoff  ||(u, v)||_{l2} <= B.  The exponent is unbounded above, so the
module uses self-normalized importance sampling with the Gaussian proposal
and reports the effective sample size rather than attempting rejection.

Sampling is chunked: chunk c draws from a generator seeded with
SeedSequence(seed, spawn_key=(c,)), and chunk outputs are reduced in chunk
order, so results are identical regardless of how many workers are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import (
    FieldPair,
    SobolevParams,
    integral_uvv_arr,
    l2_pair_arr,
    mixed_norm_arr,
)
from ._chunks import chunk_spans, run_chunks

V0_RADIUS_FACTOR = 1.0 / (2.0 * math.sqrt(math.pi))
DEFAULT_CHUNK = 20_000


@dataclass
class MeasureConfig:
    trunc_N: int
    alpha: float
    B: float            # L2 cutoff radius; no default on purpose
    seed: int
    M: int              # number of proposal draws
    chunk_size: int = DEFAULT_CHUNK

    def __post_init__(self):
        if self.trunc_N < 1:
            raise ValueError("trunc_N must be a positive integer")
        alpha = float(self.alpha)
        if not (0 < alpha <= 4):
            raise ValueError("alpha must lie in (0, 4]")
        if not (self.B > 0):
            raise ValueError("the L2 cutoff B must be positive")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")

    @property
    def v0_radius(self) -> float:
        return V0_RADIUS_FACTOR * float(self.B)


@dataclass
class GibbsSample:
    pair: FieldPair
    log_weight: float
    accepted: bool


@dataclass
class EnsembleReport:
    M: int
    n_accepted: int
    acceptance_rate: float
    ess: float
    z_estimate: float
    z_stderr: float
    degenerate: bool
    functional_stats: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        d = {
            "M": self.M,
            "n_accepted": self.n_accepted,
            "acceptance_rate": self.acceptance_rate,
            "ess": self.ess,
            "z_estimate": self.z_estimate,
            "z_stderr": self.z_stderr,
            "degenerate": self.degenerate,
        }
        if self.functional_stats:
            d["functional_stats"] = [dict(row) for row in self.functional_stats]
        return d


def chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    """Per-chunk generator; a pure function of (seed, chunk index)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk_index,)))


def sample_gaussian_arrays(
    trunc_n: int, alpha: float, b: float, count: int, rng: np.random.Generator
):
    """Draw ``count`` proposal states; returns (u, v) of shape (count, N+1).

    Draw order is fixed (u normals, v normals, then the v-mean uniforms) so
    a given generator state always yields the same ensemble.
    """
    n = np.arange(1, trunc_n + 1, dtype=float)
    gu = rng.standard_normal((count, 2, trunc_n))
    gv = rng.standard_normal((count, 2, trunc_n))
    u = np.zeros((count, trunc_n + 1), dtype=np.complex128)
    v = np.zeros((count, trunc_n + 1), dtype=np.complex128)
    u[:, 1:] = (gu[:, 0, :] + 1j * gu[:, 1, :]) / n
    v[:, 1:] = (gv[:, 0, :] + 1j * gv[:, 1, :]) / (math.sqrt(float(alpha)) * n)
    r = V0_RADIUS_FACTOR * float(b)
    v[:, 0] = rng.uniform(-r, r, size=count)
    return u, v


def sample_gaussian(cfg: MeasureConfig, rng: np.random.Generator) -> FieldPair:
    """One draw from the Gaussian reference measure (uhat(0) = 0 always)."""
    u, v = sample_gaussian_arrays(cfg.trunc_N, cfg.alpha, cfg.B, 1, rng)
    return FieldPair.from_arrays(u[0], v[0], mean_zero=True, copy=False)


def gibbs_log_weight_arr(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return 0.5 * integral_uvv_arr(u, v)


def gibbs_log_weight(p: FieldPair) -> float:
    """Exponent of the Gibbs density relative to the Gaussian measure."""
    return 0.5 * p.integral_uvv()


def ess_of(weights: np.ndarray) -> float:
    s = float(np.sum(weights))
    s2 = float(np.sum(weights**2))
    return s * s / s2 if s2 > 0 else 0.0


def weighted_mean_se(weights: np.ndarray, values: np.ndarray):
    """Self-normalized IS mean and its delta-method standard error."""
    s = float(np.sum(weights))
    if s <= 0:
        return math.nan, math.nan
    wn = weights / s
    mean = float(np.sum(wn * values))
    se = math.sqrt(float(np.sum((wn * (values - mean)) ** 2)))
    return mean, se


def _sample_chunk(payload: dict):
    cfg = MeasureConfig(**payload["cfg"])
    rng = chunk_rng(cfg.seed, payload["index"])
    u, v = sample_gaussian_arrays(cfg.trunc_N, cfg.alpha, cfg.B, payload["count"], rng)
    l2 = l2_pair_arr(u, v)
    logw = gibbs_log_weight_arr(u, v)
    accepted = l2 <= cfg.B
    out = {"logw": logw, "accepted": accepted, "l2": l2}
    if payload.get("keep_states", False):
        out["u"], out["v"] = u, v
    if payload.get("sobolev") is not None:
        s1, s2 = payload["sobolev"]
        out["mixed"] = mixed_norm_arr(u, v, s1, s2)
    return out


def _cfg_dict(cfg: MeasureConfig) -> dict:
    return {
        "trunc_N": cfg.trunc_N,
        "alpha": float(cfg.alpha),
        "B": float(cfg.B),
        "seed": cfg.seed,
        "M": cfg.M,
        "chunk_size": cfg.chunk_size,
    }


def _chunk_payloads(cfg: MeasureConfig, **extra) -> list:
    payloads = []
    for index, (start, count) in enumerate(chunk_spans(cfg.M, cfg.chunk_size)):
        payloads.append(
            {"cfg": _cfg_dict(cfg), "index": index, "start": start, "count": count, **extra}
        )
    return payloads


def sample_gibbs_ensemble(
    cfg: MeasureConfig,
    rng: np.random.Generator | None = None,
    keep_samples: bool = True,
    workers: int = 1,
    functionals=None,
):
    """Draw the importance-sampling ensemble for the cutoff Gibbs measure.

    Returns (samples, report).  ``samples`` is a list of GibbsSample (empty
    when ``keep_samples`` is false, which is the streaming mode used for
    large M).  ``functionals`` may hold callables of the stacked coefficient
    arrays (anything shaped like a TestFunctional); their weighted means and
    standard errors land in the report.  ``rng`` overrides the seed-derived
    chunk streams and is meant for small interactive draws only;
    determinism across worker counts is guaranteed only for the default
    chunked path.
    """
    samples: list[GibbsSample] = []
    keep_states = keep_samples or bool(functionals)
    if rng is not None:
        u, v = sample_gaussian_arrays(cfg.trunc_N, cfg.alpha, cfg.B, cfg.M, rng)
        chunks = [
            {
                "logw": gibbs_log_weight_arr(u, v),
                "accepted": l2_pair_arr(u, v) <= cfg.B,
                "u": u,
                "v": v,
            }
        ]
    else:
        chunks = run_chunks(_sample_chunk, _chunk_payloads(cfg, keep_states=keep_states), workers)

    logw = np.concatenate([c["logw"] for c in chunks])
    accepted = np.concatenate([c["accepted"] for c in chunks])
    if keep_samples:
        u_all = np.concatenate([c["u"] for c in chunks])
        v_all = np.concatenate([c["v"] for c in chunks])
        for i in range(cfg.M):
            samples.append(
                GibbsSample(
                    pair=FieldPair.from_arrays(u_all[i], v_all[i], mean_zero=True),
                    log_weight=float(logw[i]),
                    accepted=bool(accepted[i]),
                )
            )
    report = build_ensemble_report(cfg.M, logw, accepted)
    if functionals:
        u_all = np.concatenate([c["u"] for c in chunks])
        v_all = np.concatenate([c["v"] for c in chunks])
        w_acc = np.exp(logw[accepted])
        ua, va = u_all[accepted], v_all[accepted]
        for f in functionals:
            mean, se = weighted_mean_se(w_acc, np.asarray(f(ua, va), dtype=float))
            report.functional_stats.append(
                {"name": getattr(f, "name", repr(f)), "mean": mean, "se": se}
            )
    return samples, report


def build_ensemble_report(m: int, logw: np.ndarray, accepted: np.ndarray) -> EnsembleReport:
    w_acc = np.exp(logw[accepted])
    n_acc = int(np.count_nonzero(accepted))
    ess = ess_of(w_acc) if n_acc else 0.0
    # Z_N relative to the proposal: mean over all draws of w * indicator
    w_all = np.where(accepted, np.exp(logw), 0.0)
    z_hat = float(np.mean(w_all))
    z_se = float(np.std(w_all, ddof=1) / math.sqrt(m)) if m > 1 else math.nan
    return EnsembleReport(
        M=m,
        n_accepted=n_acc,
        acceptance_rate=n_acc / m,
        ess=float(ess),
        z_estimate=z_hat,
        z_stderr=z_se,
        degenerate=bool(ess < 10.0),
    )


def gibbs_initial_pair(cfg: MeasureConfig, rng: np.random.Generator | None = None) -> FieldPair:
    """First accepted Gibbs proposal; a convenient reproducible datum."""
    if rng is None:
        rng = chunk_rng(cfg.seed, 0)
    for _ in range(10_000):
        u, v = sample_gaussian_arrays(cfg.trunc_N, cfg.alpha, cfg.B, 1, rng)
        if float(l2_pair_arr(u, v)[0]) <= cfg.B:
            return FieldPair.from_arrays(u[0], v[0], mean_zero=True, copy=False)
    raise RuntimeError("no accepted sample in 10000 draws; is B far too small?")


# -- tightness tail ---------------------------------------------------------


@dataclass
class TailRow:
    K: float
    tail: float
    se: float
    censored: bool


@dataclass
class TailReport:
    trunc_N: int
    s1: float
    s2: float
    M: int
    rows: list
    slope: float          # fitted d log(tail) / d K^2; Lemma-style bound predicts < 0
    slope_se: float
    intercept: float
    c_hat: float          # -slope
    n_censored: int
    ess: float
    acceptance_rate: float

    def to_json_dict(self) -> dict:
        return {
            "trunc_N": self.trunc_N,
            "s1": self.s1,
            "s2": self.s2,
            "M": self.M,
            "rows": [
                {"K": r.K, "tail": r.tail, "se": r.se, "censored": r.censored}
                for r in self.rows
            ],
            "slope": self.slope,
            "slope_se": self.slope_se,
            "intercept": self.intercept,
            "c_hat": self.c_hat,
            "n_censored": self.n_censored,
            "ess": self.ess,
            "acceptance_rate": self.acceptance_rate,
        }


def _weighted_quantiles(values: np.ndarray, weights: np.ndarray, qs) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    cw /= cw[-1]
    return np.array([v[int(np.searchsorted(cw, q, side="left"))] for q in qs])


def default_tail_grid(cfg: MeasureConfig, sp: SobolevParams, n_points: int = 8) -> np.ndarray:
    """K grid from pilot-chunk weighted quantiles of the mixed norm.

    Spans tail levels from 0.5 down to about 50/M (so the deepest point
    still carries a few dozen effective samples).  Uses chunk 0 of the
    deterministic stream; the main pass re-includes that chunk.
    """
    pilot = min(cfg.M, cfg.chunk_size)
    rng = chunk_rng(cfg.seed, 0)
    u, v = sample_gaussian_arrays(cfg.trunc_N, cfg.alpha, cfg.B, pilot, rng)
    accepted = l2_pair_arr(u, v) <= cfg.B
    if not np.any(accepted):
        raise ValueError("pilot chunk produced no accepted samples; increase B")
    w = np.exp(gibbs_log_weight_arr(u, v))[accepted]
    mixed = mixed_norm_arr(u, v, sp.s1, sp.s2)[accepted]
    deep = max(50.0 / cfg.M, 2e-4)
    levels = np.geomspace(0.5, deep, n_points)
    ks = _weighted_quantiles(mixed, w, 1.0 - levels)
    ks = np.unique(np.round(ks, 6))
    if ks.size < 4:
        ks = np.linspace(float(ks[0]), float(ks[-1]) + 1.0, 4)
    return ks


def _tail_chunk(payload: dict):
    cfg = MeasureConfig(**payload["cfg"])
    rng = chunk_rng(cfg.seed, payload["index"])
    u, v = sample_gaussian_arrays(cfg.trunc_N, cfg.alpha, cfg.B, payload["count"], rng)
    accepted = l2_pair_arr(u, v) <= cfg.B
    s1, s2 = payload["sobolev"]
    mixed = mixed_norm_arr(u, v, s1, s2)
    w = np.where(accepted, np.exp(gibbs_log_weight_arr(u, v)), 0.0)
    k_grid = np.asarray(payload["k_grid"])
    exceed = mixed[None, :] > k_grid[:, None]
    return {
        "sw": float(np.sum(w)),
        "sw2": float(np.sum(w**2)),
        "sw_exc": np.sum(np.where(exceed, w[None, :], 0.0), axis=1),
        "sw2_exc": np.sum(np.where(exceed, (w**2)[None, :], 0.0), axis=1),
        "n_acc": int(np.count_nonzero(accepted)),
    }


def _tail_slope_fit(k_grid, sw, sw2, sw_exc, sw2_exc):
    """Rows plus the error-weighted log-tail fit for one aggregate."""
    rows = []
    for i, k in enumerate(k_grid):
        t = sw_exc[i] / sw
        # delta-method variance of the self-normalized ratio estimator
        var = ((1.0 - 2.0 * t) * sw2_exc[i] + t * t * sw2) / (sw * sw)
        rows.append(
            TailRow(K=float(k), tail=float(t), se=float(math.sqrt(max(var, 0.0))),
                    censored=bool(t <= 0.0))
        )
    fit_rows = [r for r in rows if not r.censored]
    if len(fit_rows) < 2:
        return rows, math.nan, math.nan, math.nan
    x = np.array([r.K**2 for r in fit_rows])
    y = np.array([math.log(r.tail) for r in fit_rows])
    sigma = np.array([max(r.se / r.tail, 1e-12) for r in fit_rows])
    slope, intercept, slope_se = _wls_line(x, y, sigma)
    return rows, slope, intercept, slope_se


def tail_probability(
    cfg: MeasureConfig,
    sp: SobolevParams,
    k_grid=None,
    workers: int = 1,
) -> TailReport:
    """Estimate the Gibbs tail mu_N(mixed_norm > K) on a K grid and fit
    log(tail) against K^2 by error-weighted least squares.

    Censored grid points (zero estimated tail) are excluded from the fit and
    flagged in the rows.  The nested tail estimates share samples and are
    strongly correlated, so the reported slope error is a delete-one-chunk
    jackknife over the sampling chunks, not the naive per-point fit error.
    """
    if k_grid is None:
        k_grid = default_tail_grid(cfg, sp)
    k_grid = np.asarray(sorted(float(k) for k in k_grid))
    if k_grid.size < 4:
        raise ValueError("K grid must contain at least 4 points")
    payloads = _chunk_payloads(cfg, sobolev=(sp.s1, sp.s2), k_grid=list(map(float, k_grid)))
    chunks = run_chunks(_tail_chunk, payloads, workers)
    sw = sum(c["sw"] for c in chunks)
    sw2 = sum(c["sw2"] for c in chunks)
    sw_exc = np.sum([c["sw_exc"] for c in chunks], axis=0)
    sw2_exc = np.sum([c["sw2_exc"] for c in chunks], axis=0)
    n_acc = sum(c["n_acc"] for c in chunks)
    if sw <= 0:
        raise ValueError("no accepted samples at all; increase B or M")

    rows, slope, intercept, slope_se = _tail_slope_fit(k_grid, sw, sw2, sw_exc, sw2_exc)
    if len(chunks) >= 4 and not math.isnan(slope):
        loo = []
        for drop in chunks:
            sw_j = sw - drop["sw"]
            if sw_j <= 0:
                continue
            _, slope_j, _, _ = _tail_slope_fit(
                k_grid,
                sw_j,
                sw2 - drop["sw2"],
                sw_exc - drop["sw_exc"],
                sw2_exc - drop["sw2_exc"],
            )
            if not math.isnan(slope_j):
                loo.append(slope_j)
        if len(loo) >= 4:
            loo = np.asarray(loo)
            m = len(loo)
            slope_se = math.sqrt((m - 1) / m * float(np.sum((loo - np.mean(loo)) ** 2)))
    return TailReport(
        trunc_N=cfg.trunc_N,
        s1=sp.s1,
        s2=sp.s2,
        M=cfg.M,
        rows=rows,
        slope=float(slope),
        slope_se=float(slope_se),
        intercept=float(intercept),
        c_hat=float(-slope) if not math.isnan(slope) else math.nan,
        n_censored=sum(r.censored for r in rows),
        ess=(sw * sw / sw2) if sw2 > 0 else 0.0,
        acceptance_rate=n_acc / cfg.M,
    )


def _wls_line(x: np.ndarray, y: np.ndarray, sigma: np.ndarray):
    """Weighted least squares line fit; returns slope, intercept, slope SE."""
    w = 1.0 / sigma**2
    sw = np.sum(w)
    xb = np.sum(w * x) / sw
    yb = np.sum(w * y) / sw
    sxx = np.sum(w * (x - xb) ** 2)
    slope = np.sum(w * (x - xb) * (y - yb)) / sxx
    intercept = yb - slope * xb
    slope_se = math.sqrt(1.0 / sxx)
    return float(slope), float(intercept), float(slope_se)
