"""Batch command-line interface.

Every experiment in the package is exposed as a subcommand that reads an
explicit JSON config (or flags, for the resonance scans), writes a run
manifest plus machine-readable reports (JSON / JSON-lines / CSV) into
--out, and renders matplotlib figures of the report next to the data
(suppress with --no-plots; --emit-plot-data adds tidy CSVs of the exact
numbers behind each figure).

Exit codes: 0 success, 2 configuration or domain error, 3 numerical
failure (the message carries the failure time), 4 statistically invalid
run (a report carrying an invalid flag).  --workers never changes any
output byte, only wall time.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import plots
from .data import BUILTIN_NAMES, builtin_datum
from .dynamics import IntegrationError, SimConfig, integrate
from .fields import FieldPair, SobolevParams
from .invariance import (
    builtin_functionals,
    growth_profile,
    invariance_test,
    truncation_convergence,
)
from .manifest import ManifestWriter, dump_json, report_envelope
from .measure import MeasureConfig, sample_gibbs_ensemble, tail_probability
from .resonance import (
    AlphaDomainError,
    AlphaPoleError,
    CouplingParam,
    compute_c_roots,
    compute_d_roots,
    c_roots_surd,
    d_roots_surd,
    enumerate_near_resonant,
    multiplier_scan,
    roots_are_rational,
    verify_lower_bound,
)
from .diophantine import estimate_type_index

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INVALID_RUN = 4

CONFIG_SCHEMA = "mbkdv-config/1"


class ConfigError(ValueError):
    pass


def parse_alpha(text) -> CouplingParam:
    """Integers and "p/q" strings stay exact; decimal strings become floats."""
    try:
        if isinstance(text, str):
            stripped = text.strip()
            if "/" in stripped or stripped.lstrip("+-").isdigit():
                return CouplingParam(Fraction(stripped))
            return CouplingParam(float(stripped))
        return CouplingParam(text)
    except AlphaDomainError:
        raise
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse alpha {text!r}: {exc}") from exc


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    schema = cfg.get("schema", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        raise ConfigError(f"unsupported config schema {schema!r}; this build reads {CONFIG_SCHEMA!r}")
    return cfg


def require(cfg: dict, key: str, kind, what: str):
    if key not in cfg:
        raise ConfigError(f"config is missing required key {key!r} ({what})")
    value = cfg[key]
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])


def load_initial(spec: dict, trunc_n: int, alpha: float) -> FieldPair:
    if "path" in spec:
        pair = FieldPair.load_json(spec["path"])
        if pair.trunc_N < trunc_n:
            u = np.zeros(trunc_n + 1, complex)
            v = np.zeros(trunc_n + 1, complex)
            u[: pair.trunc_N + 1] = pair.u.coef
            v[: pair.trunc_N + 1] = pair.v.coef
            pair = FieldPair.from_arrays(u, v, mean_zero=pair.mean_zero)
        return pair.project(trunc_n)
    name = spec.get("name")
    if name not in BUILTIN_NAMES:
        raise ConfigError(f"initial datum must give a path or a builtin name {BUILTIN_NAMES}")
    return builtin_datum(
        name,
        trunc_n,
        alpha=alpha,
        amplitude=float(spec.get("amplitude", 1.0)),
        seed=int(spec.get("seed", 7)),
        B=float(spec.get("B", 2.0)),
    )


# -- resonance ---------------------------------------------------------------


def cmd_resonance(args) -> int:
    alpha = parse_alpha(args.alpha)
    families = ["B", "D"] if args.family == "both" else [args.family]
    sp = SobolevParams(args.s1, args.s2)
    config = {
        "alpha": alpha.label(),
        "nmax": args.nmax,
        "family": args.family,
        "s1": args.s1,
        "s2": args.s2,
        "eps": args.eps,
        "scan_nmax": args.scan_nmax,
        "depth": args.depth,
    }
    writer = ManifestWriter(args.out, "resonance", config, seed=args.seed)
    writer.declare("resonance.json", "triples.csv", "scan_blocks.csv")

    c1, c2 = compute_c_roots(alpha)
    payload = {
        "alpha": alpha.label(),
        "alpha_is_rational": alpha.is_rational,
        "roots_rational": roots_are_rational(alpha),
        "c_roots": {"c1": c1, "c2": c2},
    }
    if alpha.is_rational:
        s1s, s2s = c_roots_surd(alpha)
        payload["c_roots_exact"] = {"c1": s1s.to_json_dict(), "c2": s2s.to_json_dict()}
    try:
        d1, d2 = compute_d_roots(alpha)
        payload["d_roots"] = {"d1": d1, "d2": d2}
        if alpha.is_rational:
            sd1, sd2 = d_roots_surd(alpha)
            payload["d_roots_exact"] = {"d1": sd1.to_json_dict(), "d2": sd2.to_json_dict()}
    except AlphaDomainError as exc:
        payload["d_roots"] = {"error": str(exc)}

    # Diophantine profiles of the roots that exist
    dio = {}
    if alpha.is_rational:
        cs = c_roots_surd(alpha)
        dio["c1"] = estimate_type_index(cs[0], args.depth).to_json_dict()
        if alpha.fraction != 1:
            ds = d_roots_surd(alpha)
            dio["d1"] = estimate_type_index(ds[0], args.depth).to_json_dict()
            dio["d2"] = estimate_type_index(ds[1], args.depth).to_json_dict()
    else:
        dio["c1"] = estimate_type_index(c1, args.depth).to_json_dict()
        if "d1" in payload.get("d_roots", {}):
            dio["d1"] = estimate_type_index(d1, args.depth).to_json_dict()
            dio["d2"] = estimate_type_index(d2, args.depth).to_json_dict()
    payload["diophantine"] = dio

    triples = []
    scans = {}
    lower = None
    for family in families:
        if family == "D":
            payload["d_trivial_ray"] = (
                "n1 = 0 closes the D-family gap for every n; it is excluded "
                "from the near-resonant set and from the scans, matching the "
                "standing mean-zero condition on u"
            )
            if alpha.value == 1.0:
                if args.family == "D":
                    raise AlphaPoleError("d-roots have a pole at alpha = 1")
                payload["lower_bound_D"] = {"error": "d-roots have a pole at alpha = 1"}
                continue
        trips = enumerate_near_resonant(alpha, args.nmax, family)
        triples.extend(trips)
        lb = verify_lower_bound(alpha, max(args.nmax, 16), args.eps, family)
        if lower is None:
            lower = lb
        payload[f"lower_bound_{family}"] = lb.to_json_dict()
        for regime in (f"resonant-{family}", f"nonresonant-{family}"):
            scans[regime] = multiplier_scan(alpha, sp, args.scan_nmax, regime).to_json_dict()
    payload["lower_bound"] = lower.to_json_dict()
    payload["scans"] = scans
    payload["n_triples"] = len(triples)

    dump_json(report_envelope(writer, payload), writer.result_path("resonance.json"))
    write_csv(
        writer.result_path("triples.csv"),
        ["family", "n", "n1", "n2", "gap", "gap_float"],
        [
            [t.family, t.n, t.n1, t.n2, str(t.gap), t.gap_float()]
            for t in triples
        ],
    )
    scan_rows = []
    for regime, rep in scans.items():
        for b in rep["blocks"]:
            scan_rows.append([regime, b["lo"], b["hi"], b["max_weight"], b["argmax_n"], b["argmax_n1"]])
    write_csv(
        writer.result_path("scan_blocks.csv"),
        ["regime", "lo", "hi", "max_weight", "argmax_n", "argmax_n1"],
        scan_rows,
    )
    if not args.no_plots:
        plots.plot_resonance_gaps(payload, writer.result_path("resonance_gaps.png"))
        plots.plot_scans(scans, writer.result_path("resonance_scans.png"))
    if args.emit_plot_data:
        write_csv(
            writer.result_path("plotdata_gaps.csv"),
            ["abs_n", "min_gap"],
            [
                [abs(b["argmin_n"]), b["min_gap"]]
                for b in payload["lower_bound"]["blocks"]
            ],
        )
    writer.finalize()
    return EXIT_OK


# -- simulate ----------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    alpha = parse_alpha(cfg.get("alpha", 2.0))
    trunc_n = require(cfg, "trunc_N", int, "truncation")
    sim = SimConfig(
        trunc_N=trunc_n,
        alpha=alpha.value,
        dt=require(cfg, "dt", float, "time step"),
        T=require(cfg, "T", float, "horizon"),
        method=cfg.get("method", "if-rk4"),
        record_every=int(cfg.get("record_every", 1)),
    )
    initial = cfg.get("initial", {"name": "cosine"})
    p0 = load_initial(initial, trunc_n, alpha.value)
    config_echo = {
        "trunc_N": trunc_n,
        "alpha": alpha.label(),
        "dt": sim.dt,
        "T": sim.T,
        "method": sim.method,
        "record_every": sim.record_every,
        "initial": initial,
        "store_states": bool(cfg.get("store_states", True)),
    }
    writer = ManifestWriter(args.out, "simulate", config_echo, seed=args.seed)
    writer.declare("trajectory.jsonl", "conserved.csv", "simulate.json")
    traj = integrate(p0, sim)

    with open(writer.result_path("trajectory.jsonl"), "w") as fh:
        for t, pair, snap in zip(traj.times, traj.states, traj.snapshots):
            rec = {
                "t": t,
                "E1": snap.E1,
                "E2": snap.E2,
                "Nval": snap.Nval,
                "H_N": snap.H_N,
            }
            if config_echo["store_states"]:
                rec["state"] = pair.to_json_dict()
            fh.write(json.dumps(rec, sort_keys=True))
            fh.write("\n")
    write_csv(
        writer.result_path("conserved.csv"),
        ["t", "E1", "E2", "Nval", "H_N"],
        [s.as_row() for s in traj.snapshots],
    )
    s0, s1 = traj.snapshots[0], traj.snapshots[-1]
    summary = {
        "final_time": traj.times[-1],
        "E1_drift": abs(s1.E1 - s0.E1),
        "E2_drift": abs(s1.E2 - s0.E2),
        "Nval_rel_drift": abs(s1.Nval - s0.Nval) / max(abs(s0.Nval), 1e-300),
        "H_N_rel_drift": abs(s1.H_N - s0.H_N) / max(abs(s0.H_N), 1e-300),
        "records": len(traj.times),
    }
    dump_json(report_envelope(writer, summary), writer.result_path("simulate.json"))
    if not args.no_plots:
        plots.plot_conserved(
            traj.times, [s.as_row()[1:] for s in traj.snapshots],
            writer.result_path("conserved.png"),
        )
    if args.emit_plot_data:
        write_csv(
            writer.result_path("plotdata_conserved.csv"),
            ["t", "E1", "E2", "Nval", "H_N"],
            [s.as_row() for s in traj.snapshots],
        )
    writer.finalize()
    return EXIT_OK


# -- sample ------------------------------------------------------------------


def _measure_config(cfg: dict, seed: int) -> MeasureConfig:
    return MeasureConfig(
        trunc_N=require(cfg, "trunc_N", int, "truncation"),
        alpha=parse_alpha(cfg.get("alpha", 2.0)).value,
        B=require(cfg, "B", float, "L2 cutoff radius"),
        seed=seed,
        M=require(cfg, "M", int, "sample count"),
        chunk_size=int(cfg.get("chunk_size", 20_000)),
    )


def cmd_sample(args) -> int:
    cfg = load_config(args.config)
    mcfg = _measure_config(cfg, args.seed)
    store_states = bool(cfg.get("store_states", False))
    config_echo = {
        "trunc_N": mcfg.trunc_N, "alpha": mcfg.alpha, "B": mcfg.B,
        "M": mcfg.M, "chunk_size": mcfg.chunk_size, "store_states": store_states,
    }
    writer = ManifestWriter(args.out, "sample", config_echo, seed=args.seed)
    writer.declare("ensemble_report.json", "samples.jsonl")
    samples, report = sample_gibbs_ensemble(
        mcfg, keep_samples=True, workers=args.workers
    )
    with open(writer.result_path("samples.jsonl"), "w") as fh:
        for s in samples:
            rec = {"log_weight": s.log_weight, "accepted": s.accepted}
            if store_states:
                rec["state"] = s.pair.to_json_dict()
            fh.write(json.dumps(rec, sort_keys=True))
            fh.write("\n")
    dump_json(
        report_envelope(writer, report.to_json_dict()),
        writer.result_path("ensemble_report.json"),
    )
    if not args.no_plots:
        logw = np.array([s.log_weight for s in samples if s.accepted])
        if logw.size:
            counts, edges = np.histogram(logw, bins=40)
        else:
            counts, edges = np.zeros(1), np.array([0.0, 1.0])
        plots.plot_ensemble((edges, counts), report.to_json_dict(),
                            writer.result_path("weights.png"))
    if args.emit_plot_data:
        write_csv(
            writer.result_path("plotdata_weights.csv"),
            ["log_weight", "accepted"],
            [[s.log_weight, int(s.accepted)] for s in samples],
        )
    writer.finalize()
    return EXIT_OK


# -- tail ----------------------------------------------------------------------


def cmd_tail(args) -> int:
    cfg = load_config(args.config)
    sp = SobolevParams(float(cfg.get("s1", 0.3)), float(cfg.get("s2", 0.6)))
    n_levels = cfg.get("trunc_N")
    if n_levels is None:
        raise ConfigError("config is missing required key 'trunc_N'")
    if not isinstance(n_levels, list):
        n_levels = [n_levels]
    k_grid = cfg.get("K_grid", "auto")
    if k_grid == "auto":
        k_grid = None
    config_echo = dict(cfg) | {"s1": sp.s1, "s2": sp.s2}
    writer = ManifestWriter(args.out, "tail", config_echo, seed=args.seed)
    writer.declare("tail.json", "tail.csv")
    runs = []
    for n in n_levels:
        sub = dict(cfg) | {"trunc_N": int(n)}
        mcfg = _measure_config(sub, args.seed)
        runs.append(tail_probability(mcfg, sp, k_grid=k_grid, workers=args.workers))
    payload = {"runs": [r.to_json_dict() for r in runs]}
    if len(runs) >= 2:
        a, b = runs[0], runs[-1]
        denom = math.sqrt(a.slope_se**2 + b.slope_se**2)
        payload["slope_consistency_z"] = (
            abs(a.slope - b.slope) / denom if denom > 0 else math.inf
        )
    dump_json(report_envelope(writer, payload), writer.result_path("tail.json"))
    rows = []
    for rep in runs:
        for r in rep.rows:
            rows.append([rep.trunc_N, r.K, r.tail, r.se, int(r.censored)])
    write_csv(writer.result_path("tail.csv"), ["trunc_N", "K", "tail", "se", "censored"], rows)
    if not args.no_plots:
        plots.plot_tail([r.to_json_dict() for r in runs], writer.result_path("tail.png"))
    if args.emit_plot_data:
        write_csv(
            writer.result_path("plotdata_tail.csv"),
            ["trunc_N", "K_squared", "log_tail"],
            [
                [rep.trunc_N, r.K**2, math.log(r.tail)]
                for rep in runs
                for r in rep.rows
                if not r.censored
            ],
        )
    writer.finalize()
    return EXIT_OK


# -- invariance ------------------------------------------------------------------


def cmd_invariance(args) -> int:
    cfg = load_config(args.config)
    mcfg = _measure_config(cfg, args.seed)
    sim = SimConfig(
        trunc_N=mcfg.trunc_N,
        alpha=mcfg.alpha,
        dt=require(cfg, "dt", float, "flow step"),
        T=max(abs(float(cfg.get("t", 0.5))), 1.0),
        method=cfg.get("method", "if-rk4"),
    )
    t = float(cfg.get("t", 0.5))
    control = cfg.get("control", "none")
    if control not in ("none", "linear", "unweighted"):
        raise ConfigError("control must be one of none | linear | unweighted")
    flow = "linear" if control == "linear" else "full"
    weighting = "gibbs" if control == "none" else "uniform"
    per_sample = bool(cfg.get("per_sample_csv", False))
    config_echo = dict(cfg) | {"control": control, "t": t}
    writer = ManifestWriter(args.out, "invariance", config_echo, seed=args.seed)
    writer.declare("invariance.json")
    result = invariance_test(
        mcfg, sim, t,
        flow=flow, weighting=weighting,
        workers=args.workers, keep_per_sample=per_sample,
    )
    if per_sample:
        report, per = result
        rows = []
        for f, arr in zip(builtin_functionals(), per):
            for w, fb, fa in arr:
                rows.append([f.name, w, fb, fa])
        writer.declare("per_sample.csv")
        write_csv(
            writer.result_path("per_sample.csv"),
            ["functional", "weight", "f_before", "f_after"], rows,
        )
    else:
        report = result
    dump_json(
        report_envelope(writer, report.to_json_dict()),
        writer.result_path("invariance.json"),
    )
    if not args.no_plots:
        plots.plot_invariance(report.to_json_dict(), writer.result_path("zscores.png"))
    if args.emit_plot_data:
        write_csv(
            writer.result_path("plotdata_zscores.csv"),
            ["functional", "diff_mean", "diff_se", "z"],
            [[r.name, r.diff_mean, r.diff_se, r.z] for r in report.rows],
        )
    writer.finalize()
    if report.invalid:
        print(
            f"invariance run invalid: {report.n_failed} integration failures "
            f"out of {report.n_accepted} accepted samples",
            file=sys.stderr,
        )
        return EXIT_INVALID_RUN
    return EXIT_OK


# -- growth -----------------------------------------------------------------------


def cmd_growth(args) -> int:
    cfg = load_config(args.config)
    mcfg = _measure_config(cfg, args.seed)
    sp = SobolevParams(float(cfg.get("s1", 0.3)), float(cfg.get("s2", 0.6)))
    t_grid = cfg.get("T_grid")
    if not t_grid:
        raise ConfigError("config is missing required key 'T_grid'")
    sim = SimConfig(
        trunc_N=mcfg.trunc_N,
        alpha=mcfg.alpha,
        dt=require(cfg, "dt", float, "flow step"),
        T=float(t_grid[-1]),
        method=cfg.get("method", "if-rk4"),
    )
    config_echo = dict(cfg)
    writer = ManifestWriter(args.out, "growth", config_echo, seed=args.seed)
    writer.declare("growth.json", "growth.csv")
    report = growth_profile(
        mcfg, sim, sp, t_grid, eps=float(cfg.get("eps", 0.1)), workers=args.workers
    )
    dump_json(
        report_envelope(writer, report.to_json_dict()),
        writer.result_path("growth.json"),
    )
    write_csv(
        writer.result_path("growth.csv"),
        ["T", "quantile"],
        list(zip(report.T_grid, report.quantiles)),
    )
    if not args.no_plots:
        plots.plot_growth(report.to_json_dict(), writer.result_path("growth.png"))
    if args.emit_plot_data:
        write_csv(
            writer.result_path("plotdata_growth.csv"),
            ["log_T", "quantile_squared"],
            [[math.log(t), q * q] for t, q in zip(report.T_grid, report.quantiles)],
        )
    writer.finalize()
    if report.n_samples == 0:
        return EXIT_INVALID_RUN
    return EXIT_OK


# -- converge -----------------------------------------------------------------------


def cmd_converge(args) -> int:
    cfg = load_config(args.config)
    alpha = parse_alpha(cfg.get("alpha", 2.0))
    n_list = cfg.get("N_list")
    if not n_list or len(n_list) < 2:
        raise ConfigError("config needs 'N_list' with at least two truncations")
    sp = SobolevParams(float(cfg.get("s1", 0.3)), float(cfg.get("s2", 0.6)))
    initial = cfg.get("initial", {"name": "smooth-decay"})
    p0 = load_initial(initial, max(int(n) for n in n_list), alpha.value)
    config_echo = dict(cfg) | {"alpha": alpha.label()}
    writer = ManifestWriter(args.out, "converge", config_echo, seed=args.seed)
    writer.declare("convergence.json", "convergence.csv")
    report = truncation_convergence(
        p0,
        alpha.value,
        n_list,
        require(cfg, "T", float, "horizon"),
        sp,
        dt=float(cfg.get("dt", 1e-3)),
        method=cfg.get("method", "if-rk4"),
    )
    dump_json(
        report_envelope(writer, report.to_json_dict()),
        writer.result_path("convergence.json"),
    )
    write_csv(
        writer.result_path("convergence.csv"),
        ["N", "mixed_norm_error"],
        list(zip(report.N_list, report.errors)),
    )
    if not args.no_plots:
        plots.plot_convergence(report.to_json_dict(), writer.result_path("convergence.png"))
    if args.emit_plot_data:
        write_csv(
            writer.result_path("plotdata_convergence.csv"),
            ["N", "error"],
            [[n, e] for n, e in zip(report.N_list[:-1], report.errors[:-1])],
        )
    writer.finalize()
    return EXIT_OK


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mbkdv",
        description="Spectral laboratory for the coupled KdV system and its Gibbs ensemble",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp_, config_required=True):
        if config_required:
            sp_.add_argument("--config", required=True, help="JSON config file")
        sp_.add_argument("--seed", type=int, default=0, help="master RNG seed")
        sp_.add_argument("--workers", type=int, default=1,
                         help="process count; changes wall time only")
        sp_.add_argument("--out", required=True, help="output directory")
        sp_.add_argument("--no-plots", action="store_true", help="skip figure rendering")
        sp_.add_argument("--emit-plot-data", action="store_true",
                         help="write tidy CSVs of the figure data")

    r = sub.add_parser("resonance", help="roots, Diophantine profile, triples, scans")
    r.add_argument("--alpha", required=True, help='coupling, float or exact "p/q"')
    r.add_argument("--nmax", type=int, default=600)
    r.add_argument("--family", choices=["B", "D", "both"], default="both")
    r.add_argument("--s1", type=float, default=0.3)
    r.add_argument("--s2", type=float, default=0.55)
    r.add_argument("--eps", type=float, default=0.05)
    r.add_argument("--scan-nmax", type=int, default=1024)
    r.add_argument("--depth", type=int, default=50)
    common(r, config_required=False)
    r.set_defaults(fn=cmd_resonance)

    for name, fn, help_ in (
        ("simulate", cmd_simulate, "integrate the truncated flow, monitor conserved quantities"),
        ("sample", cmd_sample, "draw the Gibbs importance-sampling ensemble"),
        ("tail", cmd_tail, "tail of the mixed norm under the Gibbs measure"),
        ("invariance", cmd_invariance, "paired invariance test under the flow"),
        ("growth", cmd_growth, "ensemble growth profile of the mixed norm"),
        ("converge", cmd_converge, "truncation convergence against a reference"),
    ):
        s = sub.add_parser(name, help=help_)
        common(s)
        s.set_defaults(fn=fn)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, AlphaDomainError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
