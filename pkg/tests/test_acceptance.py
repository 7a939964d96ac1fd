"""Acceptance gate: one test per criterion, at the stated tolerances.

Each test prints a single [criterion NN] PASS/FAIL line.  Criterion 06 is
asserted exactly as stated; its H_N tolerance is not attainable at the
stated time step for rough ensemble data (the fastest retained phases turn
over ~33 radians per step), which the companion test right below it
demonstrates by meeting every tolerance once the step resolves the phases.
The analysis is written up in the README.
"""

import json
import math
import os
import time
from fractions import Fraction

import numpy as np

from mbkdv.cli import main as cli_main
from mbkdv.data import builtin_datum
from mbkdv.diophantine import QuadraticSurd, estimate_type_index
from mbkdv.dynamics import (
    SimConfig,
    Stepper,
    divergence_trace,
    divergence_trace_fd,
    integrate,
)
from mbkdv.fields import SobolevParams
from mbkdv.invariance import (
    builtin_functionals,
    invariance_test,
    truncation_convergence,
)
from mbkdv.measure import (
    MeasureConfig,
    gibbs_initial_pair,
    sample_gaussian_arrays,
    tail_probability,
)
from mbkdv.resonance import (
    CouplingParam,
    c_roots_surd,
    compute_c_roots,
    compute_d_roots,
    dispersion_gap_B,
    enumerate_near_resonant,
    multiplier_scan,
    verify_lower_bound,
)

Z_NOISE_FLOOR = 1e-10  # paired differences below this are exact invariance


def report(num, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {num:02d}] {status}: {detail}")
    return ok


def test_criterion_01_exact_resonance():
    t0 = time.perf_counter()
    gap = dispersion_gap_B(Fraction(12, 7), 6, 5)
    exact_zero = isinstance(gap, Fraction) and gap == 0
    triples = enumerate_near_resonant(Fraction(12, 7), 600, "B")
    zero_set = {(t.n, t.n1) for t in triples if t.gap == 0}
    family_present = all(
        (6 * k, 5 * k) in zero_set and (-6 * k, -5 * k) in zero_set
        for k in range(1, 101)
    )
    elapsed = time.perf_counter() - t0
    ok = exact_zero and family_present and elapsed < 1.0
    assert report(
        1, ok,
        f"gap(6,5)={gap} exactly, (6k,5k) family complete to n=600, {elapsed:.2f}s",
    )


def test_criterion_02_root_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    alphas = rng.uniform(1e-9, 4.0, 10_000)
    alphas = alphas[np.abs(alphas - 1.0) > 1e-12]
    worst_sum = worst_cubic = worst_d = 0.0
    for a in alphas:
        c1, c2 = compute_c_roots(float(a))
        d1, d2 = compute_d_roots(float(a))
        worst_sum = max(worst_sum, abs(c1 + c2 - 1.0))
        worst_cubic = max(worst_cubic, abs(a * (c1**3 + c2**3) - 1.0))
        # the d identity value diverges at the pole; measure relative to it
        worst_d = max(worst_d, abs(d1 + d2 - d1 * d2) / max(1.0, abs(d1 * d2)))
    elapsed = time.perf_counter() - t0
    ok = worst_sum < 1e-12 and worst_cubic < 1e-12 and worst_d < 1e-12 and elapsed < 1.0
    assert report(
        2, ok,
        f"residuals: c-sum {worst_sum:.1e}, cubic {worst_cubic:.1e}, "
        f"d (relative) {worst_d:.1e}, {elapsed:.2f}s",
    )


def test_criterion_03_diophantine_estimator():
    t0 = time.perf_counter()
    rational = estimate_type_index(Fraction(5, 6))
    golden = estimate_type_index(QuadraticSurd(1, 5, 2), 50)
    root2 = estimate_type_index(QuadraticSurd(0, 2, 1), 50)
    c1_surd, _ = c_roots_surd(CouplingParam(Fraction(2)))
    c1 = estimate_type_index(c1_surd, 50)
    elapsed = time.perf_counter() - t0
    ok = (
        rational.is_rational
        and math.isinf(rational.nu_hat)
        and golden.nu_hat <= 0.05
        and root2.nu_hat <= 0.05
        and (not c1.is_rational)
        and c1.period_length is not None
        and c1.nu_hat <= 0.05
        and elapsed < 1.0
    )
    assert report(
        3, ok,
        f"rational flagged, nu: golden {golden.nu_hat:.3f}, sqrt2 {root2.nu_hat:.3f}, "
        f"c1@2 {c1.nu_hat:.3f} (period {c1.period_length}), {elapsed:.2f}s",
    )


def test_criterion_04_lower_bound_fit():
    t0 = time.perf_counter()
    rep = verify_lower_bound(Fraction(2), 4096, 0.05, "B")
    elapsed = time.perf_counter() - t0
    ok = 0.8 <= rep.empirical_exponent <= 1.2 and elapsed < 30.0
    assert report(
        4, ok,
        f"empirical exponent {rep.empirical_exponent:.3f} +- {rep.exponent_stderr:.3f} "
        f"(predicted {rep.predicted_exponent:.3f}), {elapsed:.1f}s",
    )


def test_criterion_05_multiplier_scans():
    t0 = time.perf_counter()
    sp = SobolevParams(0.3, 0.55)
    res = multiplier_scan(Fraction(4), sp, 2048, "resonant-B")
    res_maxima = [b.max_weight for b in res.blocks]
    grows = all(b > a for a, b in zip(res_maxima, res_maxima[1:]))
    nonres = multiplier_scan(Fraction(2), sp, 2048, "nonresonant-B")
    tail = [b.max_weight for b in nonres.blocks if b.lo >= 16]
    noninc = all(b <= a * (1 + 1e-12) for a, b in zip(tail, tail[1:]))
    elapsed = time.perf_counter() - t0
    ok = grows and noninc and elapsed < 60.0
    assert report(
        5, ok,
        f"resonant-B@4 grows {res_maxima[0]:.2f} -> {res_maxima[-1]:.2f}; "
        f"nonresonant-B@2 nonincreasing past |n|=16, {elapsed:.1f}s",
    )


# the pinned conservation config, shared by criterion 06 and its companion
CONS_N, CONS_ALPHA, CONS_SEED, CONS_B = 32, 2.0, 12345, 2.0


def _conservation_drifts(dt, method):
    p0 = gibbs_initial_pair(
        MeasureConfig(trunc_N=CONS_N, alpha=CONS_ALPHA, B=CONS_B, seed=CONS_SEED, M=1)
    )
    traj = integrate(
        p0,
        SimConfig(CONS_N, CONS_ALPHA, dt, 1.0, method=method, record_every=10**9),
    )
    s0, s1 = traj.snapshots[0], traj.snapshots[-1]
    return (
        abs(s1.E1 - s0.E1),
        abs(s1.E2 - s0.E2),
        abs(s1.Nval - s0.Nval) / abs(s0.Nval),
        abs(s1.H_N - s0.H_N) / abs(s0.H_N),
    )


def test_criterion_06_conservation_at_stated_step():
    # stated config: Gibbs datum, N = 32, alpha = 2, T = 1, dt = 1e-3.
    # Run under the method that comes closest (implicit midpoint preserves
    # the quadratic invariant exactly); the H_N tolerance is out of reach
    # at this step for rough data, and this test reports that honestly.
    t0 = time.perf_counter()
    e1, e2, nval, h = _conservation_drifts(1e-3, "implicit-midpoint")
    elapsed = time.perf_counter() - t0
    ok = e1 < 1e-12 and e2 < 1e-12 and nval < 1e-8 and h < 1e-8 and elapsed < 60.0
    report(
        6, ok,
        f"dt=1e-3: E1 {e1:.1e}, E2 {e2:.1e}, Nval rel {nval:.1e}, "
        f"H_N rel {h:.1e} (stated tolerance 1e-8), {elapsed:.1f}s",
    )
    assert e1 < 1e-12
    assert e2 < 1e-12
    assert nval < 1e-8
    assert h < 1e-8, (
        "H_N drift at the stated dt=1e-3 is dominated by unresolved phase "
        "rotation (N^3 dt = 33 rad/step); see the README note and the "
        "companion criterion 06s test for the conservation law itself"
    )


def test_criterion_06s_conservation_supplement_resolved_step():
    # same datum and tolerances, with the step chosen so the integrator is
    # in its convergent regime; demonstrates the conservation laws hold
    t0 = time.perf_counter()
    e1, e2, nval, h = _conservation_drifts(5e-6, "if-rk4")
    elapsed = time.perf_counter() - t0
    ok = e1 < 1e-12 and e2 < 1e-12 and nval < 1e-8 and h < 1e-8
    assert report(
        6, ok,
        f"supplement dt=5e-6: E1 {e1:.1e}, E2 {e2:.1e}, Nval rel {nval:.1e}, "
        f"H_N rel {h:.1e}, {elapsed:.1f}s",
    )


def test_criterion_07_integrator_order():
    t0 = time.perf_counter()
    p0 = builtin_datum("order-check", 16)
    w = (1.0 + np.arange(17.0)) ** (-4.0)  # smoothing norm weights

    def run(dt):
        st = Stepper(16, 2.0, dt)
        u, v = p0.u.coef[None, :].copy(), p0.v.coef[None, :].copy()
        for _ in range(round(1.0 / dt)):
            u, v = st.step(u, v)
        return u[0], v[0]

    uref, vref = run(5e-3 / 16.0)
    errs = []
    for dt in (1e-2, 5e-3):
        u, v = run(dt)
        errs.append(math.sqrt(np.sum(w * (np.abs(u - uref) ** 2 + np.abs(v - vref) ** 2))))
    ratio = errs[0] / errs[1]
    elapsed = time.perf_counter() - t0
    ok = 12.0 <= ratio <= 20.0
    assert report(7, ok, f"global error ratio {ratio:.2f} (4th order ~ 16), {elapsed:.1f}s")


def test_criterion_08_liouville():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    n_max = 16
    worst = 0.0
    for _ in range(100):
        u, v = sample_gaussian_arrays(n_max, 2.0, 2.0, 1, rng)
        worst = max(worst, abs(divergence_trace(u[0], v[0], 2.0)))
    u, v = sample_gaussian_arrays(n_max, 2.0, 2.0, 1, rng)
    fd_zero = abs(divergence_trace_fd(u[0], v[0], 2.0))
    # release the mean-zero constraint: trace proportional to the mean
    c = 0.2 + 0.15j
    ur = u[0].copy()
    ur[0] = c
    fd_one = divergence_trace_fd(ur, v[0], 2.0, include_u_mean=True)
    ur[0] = 2.0 * c
    fd_two = divergence_trace_fd(ur, v[0], 2.0, include_u_mean=True)
    expected = n_max * (n_max + 1) * c.imag
    proportional = (
        abs(fd_one - expected) < 1e-6 * max(1.0, abs(expected))
        and abs(fd_two - 2.0 * expected) < 1e-6 * max(1.0, abs(expected))
    )
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-12 and fd_zero < 1e-5 and proportional
    assert report(
        8, ok,
        f"analytic {worst:.1e}, fd {fd_zero:.1e}, released trace "
        f"{fd_one:.3f} ~ N(N+1) Im(u0) = {expected:.3f}, {elapsed:.1f}s",
    )


def test_criterion_09_sampler_moments():
    t0 = time.perf_counter()
    m = 10**5
    rng = np.random.default_rng(905)
    alpha = 2.0
    u, v = sample_gaussian_arrays(20, alpha, 2.0, m, rng)
    worst_z = 0.0
    for n in (1, 5, 20):
        for arr, target in ((u, 2.0 / n**2), (v, 2.0 / (alpha * n**2))):
            x = np.abs(arr[:, n]) ** 2
            z = (np.mean(x) - target) / (np.std(x) / math.sqrt(m))
            worst_z = max(worst_z, abs(z))
    elapsed = time.perf_counter() - t0
    ok = worst_z < 3.0
    assert report(9, ok, f"worst moment z = {worst_z:.2f} over n in {{1,5,20}}, {elapsed:.1f}s")


def test_criterion_10_tightness_tail():
    t0 = time.perf_counter()
    sp = SobolevParams(0.3, 0.6)
    reps = []
    for n in (16, 32):
        cfg = MeasureConfig(trunc_N=n, alpha=2.0, B=2.0, seed=4242, M=10**6, chunk_size=50_000)
        reps.append(tail_probability(cfg, sp))
    a, b = reps
    z = abs(a.slope - b.slope) / math.hypot(a.slope_se, b.slope_se)
    elapsed = time.perf_counter() - t0
    ok = a.slope < 0 and b.slope < 0 and z < 3.0 and elapsed < 300.0
    assert report(
        10, ok,
        f"slopes {a.slope:.3f} (N=16), {b.slope:.3f} (N=32), "
        f"consistency z = {z:.2f}, {elapsed:.0f}s",
    )


def test_criterion_11_invariance():
    t0 = time.perf_counter()
    mcfg = MeasureConfig(trunc_N=16, alpha=2.0, B=2.0, seed=20107, M=10**4, chunk_size=2500)
    scfg = SimConfig(trunc_N=16, alpha=2.0, dt=1e-3, T=1.0)
    bounds = {f.name: f.bound for f in builtin_functionals()}

    zero = invariance_test(mcfg, scfg, 0.0)
    bitwise = all(r.diff_mean == 0.0 and r.z == 0.0 for r in zero.rows)

    main_rep = invariance_test(mcfg, scfg, 0.5)
    main_ok = all(abs(r.z) < 3.0 for r in main_rep.rows) and len(main_rep.rows) >= 5

    control = invariance_test(mcfg, scfg, 0.5, flow="linear", weighting="uniform")
    control_ok = all(
        abs(r.z) < 3.0 or abs(r.diff_mean) < Z_NOISE_FLOOR * bounds[r.name]
        for r in control.rows
    )
    elapsed = time.perf_counter() - t0
    ok = bitwise and main_ok and control_ok and not main_rep.invalid and elapsed < 600.0
    zs = ", ".join(f"{r.z:+.2f}" for r in main_rep.rows)
    assert report(
        11, ok,
        f"paired z = [{zs}] (all < 3), linear control passes, "
        f"t=0 bitwise zero, ESS {main_rep.ess:.0f}, {elapsed:.0f}s",
    )


def test_criterion_12_truncation_convergence():
    t0 = time.perf_counter()
    p0 = builtin_datum("smooth-decay", 64, seed=7)
    rep = truncation_convergence(
        p0, 2.0, [8, 16, 32, 64], 1.0, SobolevParams(0.3, 0.6), dt=1e-3
    )
    interior = rep.errors[:-1]
    strictly_decreasing = all(b < a for a, b in zip(interior, interior[1:]))
    elapsed = time.perf_counter() - t0
    ok = strictly_decreasing and rep.errors[-1] == 0.0 and elapsed < 120.0
    errs = ", ".join(f"{e:.2e}" for e in rep.errors)
    assert report(12, ok, f"errors [{errs}] strictly decreasing, {elapsed:.0f}s")


CLI_CONFIGS = {
    "simulate": {
        "trunc_N": 8, "alpha": 2.0, "dt": 1e-3, "T": 0.1, "record_every": 25,
        "initial": {"name": "cosine"}, "store_states": False,
    },
    "sample": {"trunc_N": 8, "alpha": 2.0, "B": 2.5, "M": 1200, "chunk_size": 300},
    "tail": {
        "trunc_N": [8, 10], "alpha": 2.0, "B": 2.5, "M": 4000, "chunk_size": 1000,
        "s1": 0.3, "s2": 0.6,
    },
    "invariance": {
        "trunc_N": 8, "alpha": 2.0, "B": 2.5, "M": 1200, "chunk_size": 400,
        "t": 0.2, "dt": 1e-3,
    },
    "growth": {
        "trunc_N": 8, "alpha": 2.0, "B": 2.5, "M": 600, "chunk_size": 200,
        "T_grid": [0.2, 0.4], "dt": 1e-3, "s1": 0.3, "s2": 0.6,
    },
    "converge": {
        "alpha": 2.0, "N_list": [8, 16], "T": 0.25, "dt": 1e-3,
        "initial": {"name": "smooth-decay", "seed": 7}, "s1": 0.3, "s2": 0.6,
    },
}


def test_criterion_13_cli_determinism(tmp_path):
    t0 = time.perf_counter()
    mismatches = []
    for command, config in CLI_CONFIGS.items():
        cfg_path = tmp_path / f"{command}.json"
        cfg_path.write_text(json.dumps(config))
        outs = []
        for tag, workers in (("w1", "1"), ("w8", "8")):
            out = tmp_path / f"{command}_{tag}"
            code = cli_main(
                [command, "--config", str(cfg_path), "--seed", "37",
                 "--workers", workers, "--out", str(out)]
            )
            assert code == 0, f"{command} exited {code}"
            outs.append(out)
        mismatches.extend(_diff_outputs(command, *outs))
    # resonance takes flags instead of a config file
    outs = []
    for tag, workers in (("w1", "1"), ("w8", "8")):
        out = tmp_path / f"resonance_{tag}"
        code = cli_main(
            ["resonance", "--alpha", "2", "--nmax", "64", "--scan-nmax", "128",
             "--seed", "37", "--workers", workers, "--out", str(out)]
        )
        assert code == 0
        outs.append(out)
    mismatches.extend(_diff_outputs("resonance", *outs))
    elapsed = time.perf_counter() - t0
    ok = not mismatches
    assert report(
        13, ok,
        f"all commands byte-identical at workers 1 vs 8"
        f"{'' if ok else ': ' + ', '.join(mismatches)}, {elapsed:.0f}s",
    )


def _diff_outputs(command, dir_a, dir_b):
    bad = []
    names = sorted(os.listdir(dir_a))
    assert names == sorted(os.listdir(dir_b))
    for name in names:
        if name == "manifest.json":
            continue  # carries wall-clock timestamps by design
        with open(dir_a / name, "rb") as fa, open(dir_b / name, "rb") as fb:
            if fa.read() != fb.read():
                bad.append(f"{command}/{name}")
    return bad
