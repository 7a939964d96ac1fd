"""CLI: exit codes, manifests, determinism across worker counts."""

import json
import os

import pytest

from mbkdv.cli import main

SMALL_SIM = {
    "trunc_N": 8, "alpha": 2.0, "dt": 1e-3, "T": 0.1, "record_every": 20,
    "initial": {"name": "cosine"}, "store_states": False,
}
SMALL_SAMPLE = {"trunc_N": 8, "alpha": 2.0, "B": 2.5, "M": 1000, "chunk_size": 250}
SMALL_TAIL = {
    "trunc_N": [8, 10], "alpha": 2.0, "B": 2.5, "M": 4000, "chunk_size": 1000,
    "s1": 0.3, "s2": 0.6,
}
SMALL_INV = {
    "trunc_N": 8, "alpha": 2.0, "B": 2.5, "M": 1500, "chunk_size": 500,
    "t": 0.2, "dt": 1e-3, "control": "none",
}
SMALL_GROWTH = {
    "trunc_N": 8, "alpha": 2.0, "B": 2.5, "M": 600, "chunk_size": 300,
    "T_grid": [0.2, 0.4], "dt": 1e-3, "eps": 0.1, "s1": 0.3, "s2": 0.6,
}
SMALL_CONV = {
    "alpha": 2.0, "N_list": [8, 16], "T": 0.25, "dt": 1e-3,
    "initial": {"name": "smooth-decay", "seed": 7}, "s1": 0.3, "s2": 0.6,
}


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def run(argv):
    return main(argv)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


class TestCommandsSucceed:
    def test_resonance(self, tmp_path):
        out = str(tmp_path / "r")
        assert run(["resonance", "--alpha", "12/7", "--nmax", "40",
                    "--scan-nmax", "64", "--out", out]) == 0
        rep = read_json(os.path.join(out, "resonance.json"))
        assert rep["roots_rational"] is True
        assert rep["manifest"] == "manifest.json"
        man = read_json(os.path.join(out, "manifest.json"))
        assert "resonance.json" in man["outputs"]
        assert man["finished"] is not None

    def test_resonance_physical_alpha(self, tmp_path):
        out = str(tmp_path / "rp")
        assert run(["resonance", "--alpha", "0.899", "--nmax", "32",
                    "--scan-nmax", "64", "--out", out]) == 0

    def test_simulate(self, tmp_path):
        cfgp = write_config(tmp_path, "sim.json", SMALL_SIM)
        out = str(tmp_path / "s")
        assert run(["simulate", "--config", cfgp, "--out", out]) == 0
        summary = read_json(os.path.join(out, "simulate.json"))
        assert summary["E1_drift"] < 1e-12
        lines = open(os.path.join(out, "trajectory.jsonl")).read().splitlines()
        assert len(lines) == summary["records"]

    def test_simulate_t_zero(self, tmp_path):
        cfg = dict(SMALL_SIM) | {"T": 0.0}
        cfgp = write_config(tmp_path, "sim0.json", cfg)
        out = str(tmp_path / "s0")
        assert run(["simulate", "--config", cfgp, "--out", out]) == 0
        lines = open(os.path.join(out, "trajectory.jsonl")).read().splitlines()
        assert len(lines) == 1

    def test_sample(self, tmp_path):
        cfgp = write_config(tmp_path, "m.json", SMALL_SAMPLE)
        out = str(tmp_path / "m")
        assert run(["sample", "--config", cfgp, "--seed", "3", "--out", out]) == 0
        rep = read_json(os.path.join(out, "ensemble_report.json"))
        assert rep["M"] == 1000
        lines = open(os.path.join(out, "samples.jsonl")).read().splitlines()
        assert len(lines) == 1000

    def test_tail(self, tmp_path):
        cfgp = write_config(tmp_path, "t.json", SMALL_TAIL)
        out = str(tmp_path / "t")
        assert run(["tail", "--config", cfgp, "--seed", "5", "--out", out]) == 0
        rep = read_json(os.path.join(out, "tail.json"))
        assert len(rep["runs"]) == 2
        assert "slope_consistency_z" in rep

    def test_invariance_t0_all_zero(self, tmp_path):
        cfg = dict(SMALL_INV) | {"t": 0.0}
        cfgp = write_config(tmp_path, "i0.json", cfg)
        out = str(tmp_path / "i0")
        assert run(["invariance", "--config", cfgp, "--seed", "1", "--out", out]) == 0
        rep = read_json(os.path.join(out, "invariance.json"))
        assert all(r["diff_mean"] == 0.0 for r in rep["functionals"])

    def test_growth(self, tmp_path):
        cfgp = write_config(tmp_path, "g.json", SMALL_GROWTH)
        out = str(tmp_path / "g")
        assert run(["growth", "--config", cfgp, "--seed", "2", "--out", out]) == 0
        rep = read_json(os.path.join(out, "growth.json"))
        assert rep["quantiles"] == sorted(rep["quantiles"])

    def test_converge(self, tmp_path):
        cfgp = write_config(tmp_path, "c.json", SMALL_CONV)
        out = str(tmp_path / "c")
        assert run(["converge", "--config", cfgp, "--out", out]) == 0
        rep = read_json(os.path.join(out, "convergence.json"))
        assert rep["errors"][-1] == 0.0

    def test_tail_slope_negative_and_explicit_grid(self, tmp_path):
        cfg = {
            "trunc_N": 8, "alpha": 2.0, "B": 2.5, "M": 20000, "chunk_size": 5000,
            "s1": 0.3, "s2": 0.6, "K_grid": [4.0, 4.5, 5.0, 5.5, 6.0],
        }
        cfgp = write_config(tmp_path, "tk.json", cfg)
        out = str(tmp_path / "tk")
        assert run(["tail", "--config", cfgp, "--seed", "5", "--out", out]) == 0
        rep = read_json(os.path.join(out, "tail.json"))
        assert rep["runs"][0]["slope"] < 0
        assert [r["K"] for r in rep["runs"][0]["rows"]] == cfg["K_grid"]

    def test_invariance_controls(self, tmp_path):
        for control in ("linear", "unweighted"):
            cfg = dict(SMALL_INV) | {"control": control, "M": 800}
            cfgp = write_config(tmp_path, f"{control}.json", cfg)
            out = str(tmp_path / control)
            assert run(["invariance", "--config", cfgp, "--seed", "4", "--out", out]) == 0
            rep = read_json(os.path.join(out, "invariance.json"))
            assert rep["weighting"] == "uniform"
            assert rep["flow"] == ("linear" if control == "linear" else "full")

    def test_invariance_per_sample_csv(self, tmp_path):
        cfg = dict(SMALL_INV) | {"per_sample_csv": True, "M": 400}
        cfgp = write_config(tmp_path, "ps.json", cfg)
        out = str(tmp_path / "ps")
        assert run(["invariance", "--config", cfgp, "--seed", "4", "--out", out]) == 0
        lines = open(os.path.join(out, "per_sample.csv")).read().splitlines()
        assert lines[0] == "functional,weight,f_before,f_after"
        assert len(lines) > 1

    def test_simulate_from_state_file(self, tmp_path):
        from mbkdv.data import builtin_datum

        p0 = builtin_datum("cosine", 8)
        state = tmp_path / "pair.json"
        p0.dump_json(state)
        cfg = dict(SMALL_SIM) | {"initial": {"path": str(state)}}
        cfgp = write_config(tmp_path, "sf.json", cfg)
        out = str(tmp_path / "sf")
        assert run(["simulate", "--config", cfgp, "--out", out]) == 0

    def test_schema_version_rejected_when_unknown(self, tmp_path):
        cfg = dict(SMALL_SIM) | {"schema": "mbkdv-config/99"}
        cfgp = write_config(tmp_path, "sv.json", cfg)
        assert run(["simulate", "--config", cfgp, "--out", str(tmp_path / "x")]) == 2

    def test_console_entry_point(self, tmp_path):
        import subprocess
        import sys

        out = str(tmp_path / "ep")
        proc = subprocess.run(
            [sys.executable, "-m", "mbkdv.cli", "resonance", "--alpha", "4",
             "--nmax", "16", "--scan-nmax", "32", "--out", out],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        rep = read_json(os.path.join(out, "resonance.json"))
        assert rep["c_roots"]["c1"] == 0.5 and rep["roots_rational"]

    def test_emit_plot_data(self, tmp_path):
        cfgp = write_config(tmp_path, "g.json", SMALL_GROWTH)
        out = str(tmp_path / "gp")
        assert run(["growth", "--config", cfgp, "--seed", "2", "--out", out,
                    "--emit-plot-data"]) == 0
        assert os.path.exists(os.path.join(out, "plotdata_growth.csv"))

    def test_no_plots(self, tmp_path):
        cfgp = write_config(tmp_path, "m.json", SMALL_SAMPLE)
        out = str(tmp_path / "np")
        assert run(["sample", "--config", cfgp, "--seed", "3", "--out", out,
                    "--no-plots"]) == 0
        assert not any(f.endswith(".png") for f in os.listdir(out))


class TestExitCodes:
    def test_corrupt_config(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"trunc_N": ')
        assert run(["simulate", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2

    def test_missing_key(self, tmp_path):
        cfgp = write_config(tmp_path, "m.json", {"alpha": 2.0})
        assert run(["simulate", "--config", cfgp, "--out", str(tmp_path / "x")]) == 2

    def test_alpha_domain(self, tmp_path):
        assert run(["resonance", "--alpha", "9.0", "--out", str(tmp_path / "x")]) == 2

    def test_alpha_one_pole_handling(self, tmp_path):
        # family D alone has nothing to report at the pole; "both" degrades
        # gracefully to the B analysis with the D part flagged
        assert run(["resonance", "--alpha", "1", "--family", "D",
                    "--out", str(tmp_path / "p1")]) == 2
        out = str(tmp_path / "p2")
        assert run(["resonance", "--alpha", "1", "--family", "both", "--nmax", "32",
                    "--scan-nmax", "64", "--out", out]) == 0
        rep = read_json(os.path.join(out, "resonance.json"))
        assert "error" in rep["lower_bound_D"]
        assert "lower_bound_B" in rep

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numerical_failure_exit_3(self, tmp_path, capsys):
        cfg = dict(SMALL_SIM) | {"initial": {"name": "cosine", "amplitude": 1e160}}
        cfgp = write_config(tmp_path, "blow.json", cfg)
        assert run(["simulate", "--config", cfgp, "--out", str(tmp_path / "x")]) == 3
        err = capsys.readouterr().err
        assert "t=" in err  # the failure time is reported


class TestDeterminism:
    @pytest.mark.parametrize(
        "command,config,files",
        [
            ("sample", SMALL_SAMPLE, ["ensemble_report.json", "samples.jsonl"]),
            ("tail", SMALL_TAIL, ["tail.json", "tail.csv", "tail.png"]),
            ("invariance", SMALL_INV, ["invariance.json", "zscores.png"]),
            ("growth", SMALL_GROWTH, ["growth.json", "growth.csv"]),
        ],
    )
    def test_workers_do_not_change_bytes(self, tmp_path, command, config, files):
        cfgp = write_config(tmp_path, "cfg.json", config)
        outs = []
        for tag, workers in (("w1", "1"), ("w2", "2")):
            out = str(tmp_path / tag)
            assert run([command, "--config", cfgp, "--seed", "17",
                        "--workers", workers, "--out", out]) == 0
            outs.append(out)
        for name in files:
            a = open(os.path.join(outs[0], name), "rb").read()
            b = open(os.path.join(outs[1], name), "rb").read()
            assert a == b, f"{command}/{name} differs between worker counts"

    def test_rerun_identical(self, tmp_path):
        cfgp = write_config(tmp_path, "cfg.json", SMALL_SAMPLE)
        outs = []
        for tag in ("a", "b"):
            out = str(tmp_path / tag)
            assert run(["sample", "--config", cfgp, "--seed", "23", "--out", out]) == 0
            outs.append(out)
        a = open(os.path.join(outs[0], "ensemble_report.json"), "rb").read()
        b = open(os.path.join(outs[1], "ensemble_report.json"), "rb").read()
        assert a == b
