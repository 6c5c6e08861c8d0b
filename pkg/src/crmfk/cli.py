"""Command-line entry point.

One subcommand per report: trajectory export, truncation diagnostics
over a single spec or a parameter grid, the two posterior studies, the
series tail bounds, and the galaxy mixture demo.  Options resolve in
three layers (flag, config-file section, builtin default); every run
drops a manifest beside its outputs, and ``rerun`` replays a manifest
byte for byte.

Exit status: 0 on success, 1 for unusable input, 2 when numerics fail.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .families import CrmSpec, spec_from_config
from .sampler import Ensemble, sample_ensemble, ensemble_to_csv, CSV_HEADER
from .moments import required_truncation
from . import posterior_nrmi
from . import posterior_ibp
from .posterior_nrmi import DataSummary
from .tail_bounds import sharp_tail_bound
from . import mixture as mx
from .numerics import NumericError
from .reporting import (RunManifest, rows_to_csv, rows_to_json,
                        load_config_section, manifest_filename)
from . import plots

__all__ = ["main"]


@dataclass(frozen=True)
class _Opt:
    name: str      # dest attribute and config-file key
    kind: str      # int | float | str | bool
    default: object
    help: str


def _coerce(kind: str, raw: str):
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return raw


_COMMON = [
    _Opt("out", "str", ".", "directory for outputs (created if missing)"),
    _Opt("format", "str", "csv", "table format: csv or json"),
    _Opt("plot", "bool", True, "render figures next to the tables"),
]

_SPEC_OPTS = [
    _Opt("family", "str", "gamma",
         "jump family: gamma, inverse_gaussian, generalized_gamma, "
         "beta, stable_beta"),
    _Opt("a", "float", 1.0, "total mass"),
    _Opt("gamma", "float", 0.5, "stability index (generalized-gamma group)"),
    _Opt("theta", "float", 1.0, "exponential tilt (generalized-gamma group)"),
    _Opt("c", "float", 1.0, "concentration (stable-beta group)"),
    _Opt("sigma", "float", 0.5, "stability index (stable-beta group)"),
    _Opt("base", "str", "uniform",
         "atom base measure: uniform, normal, normal_inverse_gamma, empirical"),
    _Opt("base_params", "str", "", "comma-separated base-measure parameters"),
    _Opt("base_path", "str", "", "atom file for the empirical base"),
]


def _spec_opts(default_family: str) -> list[_Opt]:
    head = _Opt("family", "str", default_family,
                "jump family: gamma, inverse_gaussian, generalized_gamma, "
                "beta, stable_beta")
    return [head] + _SPEC_OPTS[1:]


def _spec_from_opts(o) -> CrmSpec:
    cfg = {"family": o["family"], "a": repr(o["a"]), "gamma": repr(o["gamma"]),
           "theta": repr(o["theta"]), "c": repr(o["c"]),
           "sigma": repr(o["sigma"]), "base": o["base"]}
    if o["base_params"]:
        cfg["base_params"] = o["base_params"]
    if o["base_path"]:
        cfg["base_path"] = o["base_path"]
    return spec_from_config(cfg)


def _floats(raw: str) -> list[float]:
    return [float(t) for t in raw.split(",") if t.strip() != ""]


def _ints(raw: str) -> list[int]:
    return [int(t) for t in raw.split(",") if t.strip() != ""]


def _tag(x: float) -> str:
    return repr(float(x)).replace(".", "p").replace("-", "m")


def _ensure_out(o) -> str:
    out = o["out"]
    os.makedirs(out, exist_ok=True)
    return out


def _write_table(out: str, stem: str, header: str, rows, fmt: str) -> str:
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    name = f"{stem}.{fmt}"
    text = rows_to_csv(header, rows) if fmt == "csv" else rows_to_json(header, rows)
    with open(os.path.join(out, name), "w", encoding="utf-8") as fh:
        fh.write(text)
    return name


# ------------------------------------------------------------------ sample

def _run_sample(o) -> list[str]:
    out = _ensure_out(o)
    spec = _spec_from_opts(o)
    ens = sample_ensemble(spec, M=o["jumps"], n_fk=o["trajectories"],
                          master_seed=o["seed"])
    outputs = []
    if o["format"] == "csv":
        ensemble_to_csv(ens, os.path.join(out, "trajectories.csv"))
        outputs.append("trajectories.csv")
    else:
        outputs.append(_write_table(out, "trajectories", CSV_HEADER,
                                    _ensemble_rows(ens), "json"))
    if o["plot"]:
        plots.trajectory_plot(ens, os.path.join(out, "trajectories.png"))
        outputs.append("trajectories.png")
    print(f"{len(ens.trajectories)} trajectories, {ens.M} jumps each -> {out}")
    return outputs


def _ensemble_rows(ens: Ensemble):
    for tid, traj in enumerate(ens.trajectories):
        if traj.locations.ndim != 1:
            raise ValueError("composite atom locations do not fit the flat "
                             "table; use the binary cache")
        for i in range(len(traj)):
            yield (tid, i + 1, float(traj.xi[i]), float(traj.jumps[i]),
                   float(traj.locations[i]))


# -------------------------------------------------------- truncation curve

def _run_truncation_curve(o) -> list[str]:
    out = _ensure_out(o)
    spec = _spec_from_opts(o)
    report = required_truncation(spec, ell_target=o["ltarget"],
                                 M_max=o["mmax"], n_fk=o["n_fk"], K=o["K"],
                                 master_seed=o["seed"])
    name = f"truncation_curve.{o['format']}"
    path = os.path.join(out, name)
    if o["format"] == "csv":
        report.to_csv(path)
    else:
        report.to_json(path)
    outputs = [name]
    if o["plot"]:
        plots.truncation_curve_plot(report, os.path.join(out, "truncation_curve.png"))
        outputs.append("truncation_curve.png")
    if report.resolved_M is None:
        print(f"target {o['ltarget']} not reached by M = {o['mmax']}")
    else:
        print(f"moment criterion {o['ltarget']} first met at M = {report.resolved_M}")
    return outputs


# --------------------------------------------------------- truncation grid

_GRIDDABLE = ("a", "gamma", "theta", "c", "sigma")


def _parse_axis(raw: str):
    try:
        name, lo, hi, count = raw.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise ValueError(f"axis must be name:lo:hi:count, got {raw!r}") from None
    if name not in _GRIDDABLE:
        raise ValueError(f"axis parameter must be one of {_GRIDDABLE}")
    if count < 1:
        raise ValueError("axis count must be positive")
    return name, np.linspace(lo, hi, count)


def _run_truncation_grid(o) -> list[str]:
    out = _ensure_out(o)
    p1, v1 = _parse_axis(o["param1"])
    p2, v2 = _parse_axis(o["param2"])
    if p1 == p2:
        raise ValueError("the two grid axes must differ")
    rows = []
    M = np.empty((len(v1), len(v2)))
    for i, a1 in enumerate(v1):
        for j, a2 in enumerate(v2):
            cell = dict(o)
            cell[p1], cell[p2] = float(a1), float(a2)
            spec = _spec_from_opts(cell)
            rep = required_truncation(spec, ell_target=o["ltarget"],
                                      M_max=o["mmax"], n_fk=o["n_fk"],
                                      master_seed=o["seed"])
            # unresolved cells are marked -1 rather than silently capped
            m = -1 if rep.resolved_M is None else rep.resolved_M
            M[i, j] = m
            rows.append((float(a1), float(a2), m))
    outputs = [_write_table(out, "truncation_grid", f"{p1},{p2},M", rows,
                            o["format"])]
    if o["plot"]:
        shown = np.where(M < 0, np.nan, M)
        plots.truncation_grid_plot(p1, p2, v1, v2, shown,
                                   os.path.join(out, "truncation_grid.png"))
        outputs.append("truncation_grid.png")
    print(f"{len(v1)}x{len(v2)} cells, {int((M < 0).sum())} unresolved")
    return outputs


# ----------------------------------------------------- posterior summaries

def _parse_freq_scenarios(raw: str) -> list[list[int]]:
    out = []
    for part in raw.split(";"):
        if part.strip():
            out.append(_ints(part))
    if not out:
        raise ValueError("no cluster-size scenarios given")
    return out


def _run_posterior_nrmi(o) -> list[str]:
    out = _ensure_out(o)
    prior = CrmSpec.generalized_gamma(a=o["a"], gamma=o["gamma"], theta=1.0)
    scenarios = _parse_freq_scenarios(o["freqs"])
    rng = np.random.default_rng(o["seed"])

    mean_rows = []
    for freqs in scenarios:
        data = DataSummary.from_freqs(freqs)
        mean_rows.append((data.n, data.k,
                          posterior_nrmi.u_posterior_mean(data, o["a"], o["gamma"])))
    outputs = [_write_table(out, "latent_u_means", "n,k,u_mean", mean_rows,
                            o["format"])]

    ratio_rows = []
    for n in _ints(o["ns"]):
        for k in (1.0, float(np.sqrt(n)), float(n)):
            data = DataSummary(n=n, k=k)
            cond = posterior_nrmi.relative_importance(
                prior, data, u=posterior_nrmi.u_posterior_mean(data, o["a"], o["gamma"]))
            mixed = posterior_nrmi.relative_importance(
                prior, data, n_draws=o["n_draws"], rng=rng)
            ratio_rows.append((n, k, cond, mixed))
    outputs.append(_write_table(out, "mass_ratio", "n,k,conditional,mixed",
                                ratio_rows, o["format"]))

    posteriors = []
    for freqs in scenarios:
        data = DataSummary.from_freqs(freqs)
        u = posterior_nrmi.u_posterior_mean(data, o["a"], o["gamma"])
        posteriors.append((f"posterior_n{data.n}_k{data.k}",
                           posterior_nrmi.posterior_spec(prior, u)))
    ms = _ints(o["ms"])
    curve_rows, curves = _curve_block(prior, posteriors, ms, o["n_fk"], o["seed"])
    outputs.append(_write_table(out, "prior_vs_posterior", "curve,M,ell",
                                curve_rows, o["format"]))
    if o["plot"]:
        plots.posterior_curves_plot(ms, curves,
                                    os.path.join(out, "prior_vs_posterior.png"))
        outputs.append("prior_vs_posterior.png")
    print(f"{len(scenarios)} scenarios, {len(ratio_rows)} ratio rows -> {out}")
    return outputs


def _curve_block(prior, posteriors, ms, n_fk, seed):
    """Moment-distance rows for the prior and each posterior, matched seeds."""
    rows, curves = [], {}
    for label, spec in [("prior", prior)] + posteriors:
        rep = required_truncation(spec, ell_target=1e-300, M_max=max(ms),
                                  n_fk=n_fk, master_seed=seed)
        ells = [float(rep.ell[m - 1]) for m in ms]
        curves[label] = ells
        rows.extend((label, m, e) for m, e in zip(ms, ells))
    return rows, curves


def _run_posterior_ibp(o) -> list[str]:
    out = _ensure_out(o)
    if o["sigma"] == 0.0:
        prior = CrmSpec.beta_process(a=o["a"], c=o["c"])
    else:
        prior = CrmSpec.stable_beta(a=o["a"], c=o["c"], sigma=o["sigma"])

    ratio_rows = []
    for n in _ints(o["table_ns"]):
        for k in (1.0, float(np.sqrt(n)), float(n)):
            ratio_rows.append((n, k,
                               posterior_ibp.relative_importance(prior, n, k)))
    outputs = [_write_table(out, "mass_ratio", "n,k,ratio", ratio_rows,
                            o["format"])]

    ms = _ints(o["ms"])
    curve_rows, curves = _curve_block(
        prior,
        [(f"posterior_n{n}", posterior_ibp.posterior_spec(prior, n))
         for n in _ints(o["ns"])],
        ms, o["n_fk"], o["seed"])
    outputs.append(_write_table(out, "prior_vs_posterior", "curve,M,ell",
                                curve_rows, o["format"]))
    if o["plot"]:
        plots.posterior_curves_plot(ms, curves,
                                    os.path.join(out, "prior_vs_posterior.png"))
        outputs.append("prior_vs_posterior.png")
    print(f"{len(ratio_rows)} ratio rows -> {out}")
    return outputs


# ------------------------------------------------------------- tail bounds

def _run_tail_bounds(o) -> list[str]:
    out = _ensure_out(o)
    ms = _ints(o["ms"])
    outputs = []
    n_rows = 0
    for sigma in _floats(o["sigmas"]):
        if sigma == 0.0:
            spec = CrmSpec.beta_process(a=o["a"], c=o["c"])
        else:
            spec = CrmSpec.stable_beta(a=o["a"], c=o["c"], sigma=sigma)
        rows, t_list, tt_list = [], [], []
        for m in ms:
            bound = sharp_tail_bound(spec, m, o["epsilon"])
            rows.append((m, bound.t, bound.t_tilde))
            t_list.append(bound.t)
            tt_list.append(bound.t_tilde)
        n_rows += len(rows)
        stem = f"tail_bounds_sigma_{_tag(sigma)}"
        outputs.append(_write_table(out, stem, "M,t,t_tilde", rows,
                                    o["format"]))
        if o["plot"]:
            plots.tail_bounds_plot(ms, t_list, tt_list,
                                   os.path.join(out, stem + ".png"),
                                   title=f"sigma = {sigma}")
            outputs.append(stem + ".png")
    print(f"{n_rows} bound rows -> {out}")
    return outputs


# ----------------------------------------------------------------- mixture

def _mixture_config(o, gamma, rule, e, seed) -> mx.MixtureConfig:
    preset = o["preset"]
    if preset not in ("full", "desk"):
        raise ValueError("preset must be 'full' or 'desk'")
    kw = dict(gamma=gamma, a=o["a"], rule=rule, ell=o["ell"], e=e,
              master_seed=seed)
    for name in ("iterations", "burn_in", "thinning"):
        if o[name] is not None:
            kw[name] = o[name]
    return mx.MixtureConfig(**kw) if preset == "full" else mx.MixtureConfig.desk(**kw)


def _mixture_data(o):
    return mx.load_galaxy(o["data"] if o["data"] else None)


def _run_mixture(o) -> list[str]:
    rule = o["rule"].strip().lower().replace("-", "_")
    if o["trend_table"]:
        return _run_mixture_trends(o, rule)
    out = _ensure_out(o)
    y = _mixture_data(o)
    cfg = _mixture_config(o, o["gamma"], rule, o["e"], o["seed"])
    res = mx.run_gibbs(cfg, y)
    est = mx.predictive_density(res.states, mx.density_grid(cfg))

    outputs = [_write_table(out, "mixture_density", mx.DENSITY_CSV_HEADER,
                            zip(est.grid, est.pdf, est.cdf), o["format"])]
    trace_rows = zip(range(cfg.iterations), res.k_trace, res.u_trace, res.M_trace)
    outputs.append(_write_table(out, "mixture_traces", "iteration,k,u,M",
                                trace_rows, o["format"]))
    if o["plot"]:
        plots.mixture_plot(est, y, os.path.join(out, "mixture.png"),
                           title=f"gamma={cfg.gamma}, rule={cfg.rule}")
        outputs.append("mixture.png")
    post = res.k_trace[cfg.burn_in:]
    print(f"retained {len(res.states)} sweeps; mean clusters {post.mean():.2f}; "
          f"series length {res.M_trace.mean():.1f}")
    return outputs


def _run_mixture_trends(o, rule) -> list[str]:
    out = _ensure_out(o)
    y = _mixture_data(o)
    gammas = _floats(o["gammas"])
    es = _floats(o["es"])
    grid = np.linspace(5.0, 40.0, 512)
    rows, by_gamma = [], {}
    outputs = []
    for i, g in enumerate(gammas):
        ref_cfg = _mixture_config(o, g, "moment_match", es[0],
                                  o["seed"] + 1000 * i)
        ref = mx.predictive_density(mx.run_gibbs(ref_cfg, y).states, grid)
        outputs.append(_write_density(out, f"mixture_density_g{_tag(g)}_moment_match",
                                      ref, o["format"]))
        dks = []
        for j, e in enumerate(es):
            cfg = _mixture_config(o, g, "relative_error", e,
                                  o["seed"] + 1000 * i + 100 + j)
            est = mx.predictive_density(mx.run_gibbs(cfg, y).states, grid)
            outputs.append(_write_density(
                out, f"mixture_density_g{_tag(g)}_e{_tag(e)}", est, o["format"]))
            d = mx.ks_distance(ref, est)
            rows.append((g, e, d))
            dks.append(d)
            print(f"gamma={g} e={e}: distance {d:.5f}", flush=True)
        by_gamma[g] = dks
    outputs.insert(0, _write_table(out, "mixture_trends", mx.TREND_CSV_HEADER,
                                   rows, o["format"]))
    if o["plot"]:
        plots.trend_plot(es, by_gamma, os.path.join(out, "mixture_trends.png"))
        outputs.append("mixture_trends.png")
    return outputs


def _write_density(out, stem, est, fmt) -> str:
    return _write_table(out, stem, mx.DENSITY_CSV_HEADER,
                        zip(est.grid, est.pdf, est.cdf), fmt)


# ------------------------------------------------------------ command table

_COMMANDS = {
    "sample": (
        "draw decreasing-jump trajectories and export them",
        _SPEC_OPTS + [
            _Opt("jumps", "int", 100, "series length per trajectory"),
            _Opt("trajectories", "int", 1, "number of trajectories"),
            _Opt("seed", "int", 0, "master seed"),
        ] + _COMMON,
        _run_sample),
    "truncation-curve": (
        "moment distance and last-jump share as the cutoff grows",
        _SPEC_OPTS + [
            _Opt("mmax", "int", 500, "largest cutoff scanned"),
            _Opt("ltarget", "float", 0.1, "moment-distance target"),
            _Opt("n_fk", "int", 10000, "trajectories behind the estimate"),
            _Opt("K", "int", 4, "moments matched"),
            _Opt("seed", "int", 0, "master seed"),
        ] + _COMMON,
        _run_truncation_curve),
    "truncation-grid": (
        "required cutoff over a two-parameter grid",
        _spec_opts("generalized_gamma") + [
            _Opt("param1", "str", "a:0.05:1.95:20", "first axis, name:lo:hi:count"),
            _Opt("param2", "str", "gamma:0.02:0.78:20", "second axis"),
            _Opt("ltarget", "float", 0.1, "moment-distance target"),
            _Opt("mmax", "int", 1000, "largest cutoff tried per cell"),
            _Opt("n_fk", "int", 2000, "trajectories per cell"),
            _Opt("seed", "int", 0, "master seed (shared across cells)"),
        ] + _COMMON,
        _run_truncation_grid),
    "posterior-nrmi": (
        "latent-scale means, mass ratios, and truncation gain after conditioning",
        [
            _Opt("a", "float", 1.0, "total mass"),
            _Opt("gamma", "float", 0.5, "stability index"),
            _Opt("freqs", "str", "10;1,3,6;1,1,1,1,1,1,1,1,1,1",
                 "cluster-size scenarios, ';' between scenarios"),
            _Opt("ns", "str", "10,30,100", "sample sizes for the ratio table"),
            _Opt("n_draws", "int", 20000, "latent draws behind the mixed ratio"),
            _Opt("ms", "str", "10,50,100", "cutoffs for the distance curves"),
            _Opt("n_fk", "int", 10000, "trajectories behind the curves"),
            _Opt("seed", "int", 0, "master seed"),
        ] + _COMMON,
        _run_posterior_nrmi),
    "posterior-ibp": (
        "feature-allocation posterior: mass ratios and truncation gain",
        [
            _Opt("a", "float", 1.0, "total mass"),
            _Opt("c", "float", 1.0, "concentration"),
            _Opt("sigma", "float", 0.5, "stability index"),
            _Opt("table_ns", "str", "10,30,100", "sample sizes for the ratio table"),
            _Opt("ns", "str", "5,10,20", "conditioning depths for the curves"),
            _Opt("ms", "str", "10,50,100", "cutoffs for the distance curves"),
            _Opt("n_fk", "int", 10000, "trajectories behind the curves"),
            _Opt("seed", "int", 0, "master seed"),
        ] + _COMMON,
        _run_posterior_ibp),
    "tail-bounds": (
        "deterministic bounds on the discarded series tail",
        [
            _Opt("a", "float", 1.0, "total mass"),
            _Opt("c", "float", 1.0, "concentration"),
            _Opt("sigmas", "str", "0,0.5", "stability indices, comma-separated"),
            _Opt("ms", "str", "25,100,500", "cutoffs"),
            _Opt("epsilon", "float", 0.01, "tail probability"),
        ] + _COMMON,
        _run_tail_bounds),
    "mixture": (
        "galaxy mixture demo: predictive density under a truncation rule",
        [
            _Opt("gamma", "float", 0.5, "stability index"),
            _Opt("a", "float", 1.0, "total mass"),
            _Opt("rule", "str", "moment_match",
                 "truncation rule: moment_match or relative_error"),
            _Opt("ell", "float", 0.01, "moment-rule target"),
            _Opt("e", "float", 0.1, "relative-error level"),
            _Opt("preset", "str", "full", "chain length preset: full or desk"),
            _Opt("iterations", "int", None, "override the preset sweep count"),
            _Opt("burn_in", "int", None, "override the preset burn-in"),
            _Opt("thinning", "int", None, "override the preset thinning"),
            _Opt("data", "str", "", "velocity file (default: bundled data)"),
            _Opt("seed", "int", 0, "master seed"),
            _Opt("trend_table", "bool", False,
                 "compare rules over a gamma/e grid instead of one run"),
            _Opt("gammas", "str", "0,0.25,0.5,0.75", "grid stability indices"),
            _Opt("es", "str", "0.1,0.05,0.01", "grid relative-error levels"),
        ] + _COMMON,
        _run_mixture),
}


# -------------------------------------------------------------- dispatching

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crm-fk",
        description="Series-representation toolkit for completely random "
                    "measures: sampling, truncation diagnostics, posterior "
                    "studies, tail bounds, and a mixture demo.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")
    for name, (help_text, opts, _) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None,
                       help="INI file; section [%s] supplies defaults" % name)
        for opt in opts:
            flag = "--" + opt.name.replace("_", "-")
            if opt.kind == "bool":
                p.add_argument(flag, dest=opt.name, default=None,
                               action=argparse.BooleanOptionalAction,
                               help=opt.help)
            else:
                p.add_argument(flag, dest=opt.name, default=None,
                               type={"int": int, "float": float}.get(opt.kind, str),
                               help=opt.help)
    rerun = sub.add_parser("rerun", help="replay a manifest byte for byte")
    rerun.add_argument("manifest", help="path to a previous run's manifest")
    rerun.add_argument("--out", default=None,
                       help="redirect outputs (default: the recorded directory)")
    return parser


def _resolve(name: str, ns: argparse.Namespace) -> dict:
    _, opts, _ = _COMMANDS[name]
    section = {}
    if ns.config is not None:
        section = load_config_section(ns.config, name)
        known = {o.name for o in opts}
        stray = set(section) - known
        if stray:
            raise ValueError(f"config section [{name}] has unknown keys: "
                             f"{sorted(stray)}")
    resolved = {}
    for opt in opts:
        value = getattr(ns, opt.name)
        if value is None and opt.name in section:
            value = _coerce(opt.kind, section[opt.name])
        if value is None:
            value = opt.default
        resolved[opt.name] = value
    return resolved


def _execute(name: str, resolved: dict) -> None:
    runner = _COMMANDS[name][2]
    started = time.perf_counter()
    outputs = runner(resolved)
    manifest = RunManifest(
        command=name,
        options=resolved,
        master_seed=resolved.get("seed"),
        version=__version__,
        outputs=tuple(outputs),
        wall_clock_seconds=round(time.perf_counter() - started, 3),
        created_utc=RunManifest.now())
    manifest.write(os.path.join(resolved["out"], manifest_filename(name)))


def _execute_rerun(ns: argparse.Namespace) -> None:
    manifest = RunManifest.read(ns.manifest)
    if manifest.command not in _COMMANDS:
        raise ValueError(f"manifest names unknown command {manifest.command!r}")
    resolved = dict(manifest.options)
    if ns.out is not None:
        resolved["out"] = ns.out
    _execute(manifest.command, resolved)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse reserves 2 for usage errors; numeric failures own that code
        return 0 if exc.code == 0 else 1
    if ns.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if ns.command == "rerun":
            _execute_rerun(ns)
        else:
            _execute(ns.command, _resolve(ns.command, ns))
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
