import json

import pytest

from crmfk import cli
from crmfk.families import CrmSpec
from crmfk.moments import required_truncation
from crmfk.numerics import NumericError
from crmfk.reporting import RunManifest
from crmfk.sampler import CSV_HEADER
from crmfk.tail_bounds import sharp_tail_bound


def _run(*args):
    return cli.main([str(a) for a in args])


# ------------------------------------------------------------ exit status

def test_no_command_is_a_usage_error(capsys):
    assert _run() == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_command_is_a_usage_error():
    assert _run("transmogrify") == 1


def test_version_exits_clean():
    assert _run("--version") == 0


def test_bad_flag_value_is_a_usage_error():
    assert _run("sample", "--jumps", "many") == 1


def test_numeric_failure_maps_to_exit_2(tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise NumericError("bracket expansion failed on the right")

    monkeypatch.setattr(cli, "sample_ensemble", boom)
    assert _run("sample", "--out", tmp_path) == 2
    assert "numeric failure" in capsys.readouterr().err


def test_runner_value_error_maps_to_exit_1(tmp_path, capsys):
    assert _run("sample", "--family", "triangular", "--out", tmp_path) == 1
    assert "error" in capsys.readouterr().err


# ----------------------------------------------------------------- sample

def test_sample_writes_table_plot_and_manifest(tmp_path):
    assert _run("sample", "--jumps", 20, "--trajectories", 2,
                "--out", tmp_path) == 0
    header, *rows = (tmp_path / "trajectories.csv").read_text().splitlines()
    assert header == CSV_HEADER
    assert len(rows) == 40
    assert (tmp_path / "trajectories.png").exists()

    m = RunManifest.read(tmp_path / "sample-manifest.json")
    assert m.command == "sample"
    assert m.master_seed == 0
    assert set(m.outputs) == {"trajectories.csv", "trajectories.png"}
    assert m.options["jumps"] == 20


def test_sample_no_plot_skips_the_figure(tmp_path):
    assert _run("sample", "--jumps", 5, "--no-plot", "--out", tmp_path) == 0
    assert not (tmp_path / "trajectories.png").exists()
    m = RunManifest.read(tmp_path / "sample-manifest.json")
    assert m.outputs == ("trajectories.csv",)


def test_sample_json_mirror(tmp_path):
    assert _run("sample", "--jumps", 4, "--format", "json", "--no-plot",
                "--out", tmp_path) == 0
    records = json.loads((tmp_path / "trajectories.json").read_text())
    assert len(records) == 4
    assert set(records[0]) == set(CSV_HEADER.split(","))
    assert records[0]["i"] == 1


def test_sample_seed_honored(tmp_path):
    for name, seed in [("a", 1), ("b", 1), ("c", 2)]:
        assert _run("sample", "--jumps", 10, "--seed", seed, "--no-plot",
                    "--out", tmp_path / name) == 0
    a = (tmp_path / "a" / "trajectories.csv").read_bytes()
    b = (tmp_path / "b" / "trajectories.csv").read_bytes()
    c = (tmp_path / "c" / "trajectories.csv").read_bytes()
    assert a == b
    assert a != c


# ------------------------------------------------------------- config file

def test_config_supplies_defaults_and_flags_override(tmp_path):
    ini = tmp_path / "runs.ini"
    ini.write_text("[sample]\njumps = 7\nseed = 9\nplot = off\n")
    assert _run("sample", "--config", ini, "--seed", 11,
                "--out", tmp_path) == 0
    m = RunManifest.read(tmp_path / "sample-manifest.json")
    assert m.options["jumps"] == 7      # from the file
    assert m.options["seed"] == 11      # flag wins
    assert m.options["plot"] is False
    rows = (tmp_path / "trajectories.csv").read_text().splitlines()
    assert len(rows) == 1 + 7


def test_config_stray_key_rejected(tmp_path, capsys):
    ini = tmp_path / "runs.ini"
    ini.write_text("[sample]\njmups = 7\n")
    assert _run("sample", "--config", ini, "--out", tmp_path) == 1
    assert "jmups" in capsys.readouterr().err


def test_config_missing_file_rejected(tmp_path):
    assert _run("sample", "--config", tmp_path / "absent.ini",
                "--out", tmp_path) == 1


def test_config_other_sections_ignored(tmp_path):
    ini = tmp_path / "runs.ini"
    ini.write_text("[mixture]\ngamma = 0.75\n")
    assert _run("sample", "--jumps", 3, "--config", ini, "--no-plot",
                "--out", tmp_path) == 0


# ------------------------------------------------------- truncation reports

def test_truncation_curve_reports_the_resolved_cutoff(tmp_path, capsys):
    assert _run("truncation-curve", "--family", "gamma", "--a", 1,
                "--ltarget", 0.3, "--mmax", 80, "--n-fk", 500,
                "--no-plot", "--out", tmp_path) == 0
    rep = required_truncation(CrmSpec.gamma_process(1.0), ell_target=0.3,
                              M_max=80, n_fk=500, master_seed=0)
    assert f"first met at M = {rep.resolved_M}" in capsys.readouterr().out
    header = (tmp_path / "truncation_curve.csv").read_text().splitlines()[0]
    assert header.split(",")[0] == "M"


def test_single_cell_grid_degenerates_to_the_curve(tmp_path):
    assert _run("truncation-grid", "--param1", "a:1.2:1.2:1",
                "--param2", "gamma:0.3:0.3:1", "--ltarget", 0.35,
                "--mmax", 120, "--n-fk", 600, "--seed", 3,
                "--no-plot", "--out", tmp_path) == 0
    _, row = (tmp_path / "truncation_grid.csv").read_text().splitlines()
    a, g, m = row.split(",")
    rep = required_truncation(CrmSpec.generalized_gamma(1.2, 0.3),
                              ell_target=0.35, M_max=120, n_fk=600,
                              master_seed=3)
    assert rep.resolved_M is not None
    assert (float(a), float(g), int(m)) == (1.2, 0.3, rep.resolved_M)


def test_grid_axes_must_differ(tmp_path, capsys):
    assert _run("truncation-grid", "--param1", "a:0.5:1.5:2",
                "--param2", "a:0.5:1.5:2", "--out", tmp_path) == 1
    assert "differ" in capsys.readouterr().err


def test_grid_axis_spec_validated(tmp_path):
    assert _run("truncation-grid", "--param1", "a:0.5:1.5",
                "--out", tmp_path) == 1
    assert _run("truncation-grid", "--param1", "base:0:1:2",
                "--out", tmp_path) == 1


# ------------------------------------------------------- posterior commands

def test_posterior_nrmi_tables(tmp_path):
    assert _run("posterior-nrmi", "--freqs", "10;1,3,6", "--ns", "10",
                "--n-draws", 400, "--ms", "5,10", "--n-fk", 200,
                "--no-plot", "--out", tmp_path) == 0
    means = (tmp_path / "latent_u_means.csv").read_text().splitlines()
    assert means[0] == "n,k,u_mean"
    assert [r.split(",")[:2] for r in means[1:]] == [["10", "1"], ["10", "3"]]
    ratios = (tmp_path / "mass_ratio.csv").read_text().splitlines()
    assert ratios[0] == "n,k,conditional,mixed"
    assert len(ratios) == 1 + 3
    curves = (tmp_path / "prior_vs_posterior.csv").read_text().splitlines()
    assert curves[0] == "curve,M,ell"
    labels = {r.split(",")[0] for r in curves[1:]}
    assert labels == {"prior", "posterior_n10_k1", "posterior_n10_k3"}


def test_posterior_ibp_tables(tmp_path):
    assert _run("posterior-ibp", "--table-ns", "10,30", "--ns", "5",
                "--ms", "5,10", "--n-fk", 200, "--no-plot",
                "--out", tmp_path) == 0
    ratios = (tmp_path / "mass_ratio.csv").read_text().splitlines()
    assert ratios[0] == "n,k,ratio"
    assert len(ratios) == 1 + 6
    curves = (tmp_path / "prior_vs_posterior.csv").read_text().splitlines()
    labels = {r.split(",")[0] for r in curves[1:]}
    assert labels == {"prior", "posterior_n5"}


def test_tail_bounds_one_table_per_sigma(tmp_path):
    assert _run("tail-bounds", "--sigmas", "0,0.5", "--ms", "25,100",
                "--no-plot", "--out", tmp_path) == 0
    for sigma, spec in [(0.0, CrmSpec.beta_process(1.0, 1.0)),
                        (0.5, CrmSpec.stable_beta(1.0, 1.0, 0.5))]:
        tag = repr(sigma).replace(".", "p")
        lines = (tmp_path / f"tail_bounds_sigma_{tag}.csv").read_text().splitlines()
        assert lines[0] == "M,t,t_tilde"
        for line, m in zip(lines[1:], (25, 100)):
            bound = sharp_tail_bound(spec, m, 0.01)
            assert line == f"{m},{float(bound.t)!r},{float(bound.t_tilde)!r}"


def test_mixture_smoke(tmp_path):
    assert _run("mixture", "--preset", "desk", "--iterations", 40,
                "--burn-in", 10, "--thinning", 3, "--rule", "relative-error",
                "--e", 0.2, "--no-plot", "--out", tmp_path) == 0
    density = (tmp_path / "mixture_density.csv").read_text().splitlines()
    assert density[0] == "x,pdf,cdf"
    assert len(density) == 1 + 512
    traces = (tmp_path / "mixture_traces.csv").read_text().splitlines()
    assert traces[0] == "iteration,k,u,M"
    assert len(traces) == 1 + 40


def test_mixture_rejects_unknown_rule(tmp_path):
    assert _run("mixture", "--rule", "quantile", "--out", tmp_path) == 1


# ------------------------------------------------------------------- rerun

def test_rerun_replays_byte_identical(tmp_path):
    first = tmp_path / "first"
    assert _run("sample", "--jumps", 15, "--seed", 5, "--out", first) == 0
    replay = tmp_path / "replay"
    assert _run("rerun", first / "sample-manifest.json", "--out", replay) == 0
    for name in ("trajectories.csv", "trajectories.png"):
        assert (replay / name).read_bytes() == (first / name).read_bytes()
    m = RunManifest.read(replay / "sample-manifest.json")
    assert m.options["seed"] == 5


def test_rerun_rejects_foreign_manifest(tmp_path, capsys):
    p = tmp_path / "bad-manifest.json"
    m = RunManifest(command="launch", options={}, master_seed=None,
                    version="0.1.0", outputs=(), wall_clock_seconds=0.0,
                    created_utc=RunManifest.now())
    m.write(p)
    assert _run("rerun", p) == 1
    assert "unknown command" in capsys.readouterr().err


def test_rerun_thread_count_does_not_change_bytes(tmp_path, monkeypatch):
    monkeypatch.setenv("CRM_FK_THREADS", "1")
    base = tmp_path / "t1"
    assert _run("truncation-curve", "--family", "generalized_gamma",
                "--gamma", 0.4, "--ltarget", 0.2, "--mmax", 60,
                "--n-fk", 600, "--out", base) == 0
    want_csv = (base / "truncation_curve.csv").read_bytes()
    want_png = (base / "truncation_curve.png").read_bytes()
    for threads in ("4", "8"):
        monkeypatch.setenv("CRM_FK_THREADS", threads)
        out = tmp_path / f"t{threads}"
        assert _run("rerun", base / "truncation-curve-manifest.json",
                    "--out", out) == 0
        assert (out / "truncation_curve.csv").read_bytes() == want_csv
        assert (out / "truncation_curve.png").read_bytes() == want_png
