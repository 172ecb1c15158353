"""Command-line front end: configuration, orchestration, file output.

Exit codes: 0 success (or no verdict applicable), 1 failed verdict,
2 configuration/parse error, 3 domain error from a module.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import (
    config as cfgmod,
    experiments,
    families,
    figures,
    partitions,
    reporting,
    sampling,
    ulam,
)
from .errors import ConfigError, ExpmapError

SUBCOMMANDS = (
    "density", "correlations", "variance", "transversality", "partition",
    "clt", "lil", "blocks", "erdos-fortet", "typicality", "all", "validate",
)

_FLAG_KEYS = {
    "family": "family.kind",
    "slope": "family.s0",
    "beta0": "family.beta0",
    "amplitude": "family.amplitude",
    "window": "family.window",
    "obs": "observable.preset",
    "grid": "solver.grid_count",
    "n": "experiment.n",
    "samples": "experiment.samples",
    "seed": "experiment.seed",
    "threads": "experiment.threads",
    "depth": "experiment.depth",
    "variant": "experiment.variant",
    "a": "experiment.a",
    "out_dir": "output.directory",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="expmap",
        description="Numerical experiments on piecewise expanding "
                    "one-parameter interval map families.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="config file path")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="override a dotted config key")
        p.add_argument("--family", default=None)
        p.add_argument("--slope", type=float, default=None)
        p.add_argument("--beta0", type=float, default=None)
        p.add_argument("--amplitude", type=float, default=None)
        p.add_argument("--window", type=float, default=None)
        p.add_argument("--obs", default=None)
        p.add_argument("--grid", type=int, default=None)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--depth", type=int, default=None)
        p.add_argument("--variant", default=None)
        p.add_argument("--a", type=float, default=None)
        p.add_argument("--out-dir", dest="out_dir", default=None)
        fig = p.add_mutually_exclusive_group()
        fig.add_argument("--figures", dest="figures", action="store_true",
                         default=None)
        fig.add_argument("--no-figures", dest="figures", action="store_false")
    return parser


def resolve_config(args):
    cfg = {}
    if args.config is not None:
        cfg = cfgmod.load_config(args.config)
    cfg = cfgmod.apply_overrides(cfg, args.set)
    for attr, key in _FLAG_KEYS.items():
        val = getattr(args, attr, None)
        if val is not None:
            cfg[key] = val
    return cfgmod.normalize(cfg)


class Runner:
    """Holds the normalized config plus shared builders and writers."""

    def __init__(self, cfg, render_figures):
        self.cfg = cfg
        self.render = render_figures and "png" in cfg["output.formats"]
        self.outdir = reporting.ensure_dir(cfg["output.directory"])
        self.hash = cfgmod.config_hash(cfg)
        self.seed = int(cfg["experiment.seed"])
        self.threads = int(cfg["experiment.threads"]) or (os.cpu_count() or 1)

    def family(self):
        return cfgmod.build_family(self.cfg)

    def observable(self):
        return cfgmod.build_observable(self.cfg)

    def stem(self, name):
        return os.path.join(self.outdir, f"{name}-{self.hash}-{self.seed}")

    def emit(self, name, report, extra_csv=(), figure_paths=()):
        stem = self.stem(name)
        written = []
        if "json" in self.cfg["output.formats"]:
            written.append(reporting.write_report_json(
                report, stem + ".json",
                cfg=cfgmod.report_snapshot(self.cfg)))
        if "csv" in self.cfg["output.formats"]:
            for suffix, header, rows in list(reporting.csv_extracts(report)) + list(extra_csv):
                written.append(reporting.write_csv(
                    f"{stem}-{suffix}.csv", header, rows))
        written.extend(figure_paths)
        verdict = report.verdict
        tag = "pass" if verdict else ("fail" if verdict is not None else "done")
        stats = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in list(report.statistics.items())[:4])
        print(f"{name}: {tag} [{stats}] -> {stem}.json")
        return verdict


def _moment_kwargs(cfg):
    return {
        "scan_points": int(cfg["solver.scan_points"]),
        "grid_count": int(cfg["solver.scan_grid_count"]),
    }


def cmd_density(run):
    cfg = run.cfg
    family = run.family()
    a = float(cfg["experiment.a"])
    system = ulam.solve(family, a, int(cfg["solver.grid_count"]),
                        float(cfg["solver.tolerance"]),
                        int(cfg["solver.max_iterations"]))
    h = system.require_density()
    report = experiments.ExperimentReport(
        experiment_kind="density",
        parameters={"family": family.kind, "a": a,
                    "grid_count": system.grid_count},
        statistics={
            "density_min": float(np.min(h)),
            "density_max": float(np.max(h)),
            "support_fraction": float(np.mean(system.support_mask)),
            "l1_from_uniform": float(np.mean(np.abs(h - 1.0))),
        },
        verdict=None,
    )
    figs = []
    if run.render:
        figs.append(figures.density_figure(system, run.stem("density") + ".png"))
    return run.emit("density", report,
                    extra_csv=[("cells", ["cell_midpoint", "density"],
                                reporting.density_rows(system))],
                    figure_paths=figs)


def cmd_correlations(run):
    cfg = run.cfg
    family = run.family()
    phi = run.observable()
    a = float(cfg["experiment.a"])
    system = ulam.solve(family, a, int(cfg["solver.grid_count"]))
    covs = ulam.autocovariances(system, phi, int(cfg["solver.max_lag"]))
    try:
        rho, r2 = ulam.decay_rate(covs)
    except ExpmapError:
        rho, r2 = None, None
    report = experiments.ExperimentReport(
        experiment_kind="correlations",
        parameters={"family": family.kind, "a": a,
                    "max_lag": int(cfg["solver.max_lag"])},
        statistics={"c0": float(covs[0]), "rho_fit": rho, "fit_r2": r2},
        verdict=None,
    )
    figs = []
    if run.render:
        figs.append(figures.autocovariance_figure(
            covs, run.stem("correlations") + ".png"))
    return run.emit("correlations", report,
                    extra_csv=[("lags", ["lag", "autocovariance"],
                                reporting.autocovariance_rows(covs))],
                    figure_paths=figs)


def cmd_variance(run):
    cfg = run.cfg
    family = run.family()
    phi = run.observable()
    a = float(cfg["experiment.a"])
    system = ulam.solve(family, a, int(cfg["solver.grid_count"]))
    var = ulam.green_kubo_sigma(family, a, phi,
                                float(cfg["solver.gk_tolerance"]),
                                int(cfg["solver.max_lag"]), system=system)
    scan_pts = int(cfg["solver.scan_points"])
    figs = []
    extra = [("lags", ["lag", "autocovariance"],
              reporting.autocovariance_rows(var.autocovariances))]
    stats = {
        "sigma_squared": var.sigma_squared,
        "sigma": var.sigma,
        "truncation_K": var.truncation_K,
        "rho_fit": var.rho_fit,
        "trusted": var.trusted,
        "mean": ulam.measure_mean(system, phi),
    }
    if scan_pts > 1 and family.window > 0.0:
        grid = np.linspace(0.0, family.window, scan_pts)
        ag, means, sigmas, quotient = ulam.sigma_scan(
            family, phi, grid, float(cfg["solver.gk_tolerance"]),
            int(cfg["solver.max_lag"]), int(cfg["solver.scan_grid_count"]),
            float(cfg["solver.holder_kappa"]),
            pmap=lambda f, xs: sampling.parallel_map(f, xs, run.threads))
        stats["holder_quotient"] = quotient
        extra.append(("scan", ["a", "mean", "sigma"],
                      zip(ag, means, sigmas)))
        if run.render:
            figs.append(figures.scan_figure(ag, sigmas,
                                            run.stem("variance") + ".png"))
    elif run.render:
        figs.append(figures.autocovariance_figure(
            var.autocovariances, run.stem("variance") + ".png"))
    report = experiments.ExperimentReport(
        experiment_kind="variance",
        parameters={"family": family.kind, "a": a,
                    "observable": cfg["observable.preset"]},
        statistics=stats,
        verdict=None,
    )
    return run.emit("variance", report, extra_csv=extra, figure_paths=figs)


def cmd_transversality(run):
    cfg = run.cfg
    family = run.family()
    j_max = int(cfg["experiment.j_max"])
    points = int(cfg["experiment.a_grid_points"])
    bound = float(cfg["experiment.ratio_bound"])
    grid = np.linspace(0.0, family.window, points) if family.window > 0 \
        else np.array([0.0])
    rows = []
    plot_a, plot_b = [], []
    worst = 0.0
    excluded = 0
    for a in grid:
        rep = partitions.transversality_ratios(family, float(a), j_max)
        if rep.bound_C is None:
            excluded += 1  # exceptional parameter: orbit hit a branch point
        else:
            plot_a.append(float(a))
            plot_b.append(rep.bound_C)
            worst = max(worst, rep.bound_C)
        for j, r in enumerate(rep.ratios, start=1):
            rows.append((a, j, r))
    report = experiments.ExperimentReport(
        experiment_kind="transversality",
        parameters={"family": family.kind, "j_max": j_max,
                    "grid_points": points, "ratio_bound": bound},
        statistics={"worst_bound_C": worst,
                    "median_bound_C": float(np.median(plot_b)),
                    "excluded_parameters": excluded},
        verdict=worst <= bound,
    )
    figs = []
    if run.render and plot_a:
        figs.append(figures.transversality_figure(
            plot_a, plot_b, run.stem("transversality") + ".png"))
    return run.emit("transversality", report,
                    extra_csv=[("ratios", ["a", "j", "ratio"], rows)],
                    figure_paths=figs)


def cmd_partition(run):
    cfg = run.cfg
    family = run.family()
    depth = int(cfg["experiment.depth"])
    part = partitions.build_partition(
        family, (0.0, family.window), depth,
        int(cfg["experiment.grid_density"]),
        float(cfg["experiment.bisection_tolerance"]))
    sum_iii, lower = partitions.condition_iii_sum(part)
    report = experiments.ExperimentReport(
        experiment_kind="partition",
        parameters={"family": family.kind, "depth": depth},
        statistics={
            "cells": part.cell_count,
            "condition_iii_sum": sum_iii,
            "sum_is_lower_bound": lower,
            "unresolved_cells": part.unresolved_count,
            "small_image_fraction": partitions.small_image_fraction(
                part, float(cfg["experiment.small_image_d"])),
        },
        verdict=None,
    )
    figs = []
    if run.render:
        figs.append(figures.partition_figure(part, run.stem("partition") + ".png"))
    return run.emit(
        "partition", report,
        extra_csv=[("cells",
                    ["a_lo", "a_hi", "itinerary", "min_deriv", "max_deriv",
                     "image_length"],
                    partitions.partition_rows(part))],
        figure_paths=figs)


def cmd_clt(run):
    cfg = run.cfg
    report = experiments.clt_experiment(
        run.family(), run.observable(), int(cfg["experiment.n"]),
        int(cfg["experiment.samples"]), run.seed, threads=run.threads,
        ks_threshold=float(cfg["experiment.ks_threshold"]),
        **_moment_kwargs(cfg))
    figs = []
    if run.render:
        figs.append(figures.cdf_figure(
            report.arrays["normalized_sums"], run.stem("clt") + ".png",
            title="CLT normalized sums vs standard normal"))
    return run.emit("clt", report, figure_paths=figs)


def cmd_lil(run):
    cfg = run.cfg
    report = experiments.lil_experiment(
        run.family(), run.observable(), int(cfg["experiment.n_max"]),
        int(cfg["experiment.samples"]), run.seed, threads=run.threads,
        checkpoint_base=float(cfg["experiment.checkpoint_base"]),
        band=(float(cfg["experiment.lil_band_lo"]),
              float(cfg["experiment.lil_band_hi"])),
        pass_fraction=float(cfg["experiment.lil_pass_fraction"]),
        **_moment_kwargs(cfg))
    figs = []
    if run.render and "running_max" in report.arrays:
        figs.append(figures.lil_figure(
            report.arrays["checkpoints"], report.arrays["running_max"],
            (float(cfg["experiment.lil_band_lo"]),
             float(cfg["experiment.lil_band_hi"])),
            run.stem("lil") + ".png"))
    return run.emit("lil", report, figure_paths=figs)


def cmd_blocks(run):
    cfg = run.cfg
    report = experiments.block_lln_experiment(
        run.family(), run.observable(), int(cfg["experiment.n"]),
        float(cfg["experiment.gamma"]), int(cfg["experiment.samples"]),
        run.seed, threads=run.threads,
        threshold=float(cfg["experiment.block_threshold"]),
        pass_fraction=float(cfg["experiment.block_pass_fraction"]),
        **_moment_kwargs(cfg))
    figs = []
    if run.render:
        figs.append(figures.histogram_figure(
            report.arrays["discrepancies"], run.stem("blocks") + ".png",
            title="block LLN normalized discrepancies"))
    return run.emit("blocks", report, figure_paths=figs)


def cmd_erdos_fortet(run):
    cfg = run.cfg
    report = experiments.erdos_fortet(
        int(cfg["experiment.n"]), int(cfg["experiment.samples"]),
        cfg["experiment.variant"], run.seed, threads=run.threads,
        ks_pass=float(cfg["experiment.ef_ks_pass"]),
        kurt_pass=float(cfg["experiment.ef_kurt_pass"]),
        ks_fail=float(cfg["experiment.ef_ks_fail"]),
        kurt_fail=float(cfg["experiment.ef_kurt_fail"]))
    figs = []
    if run.render:
        figs.append(figures.histogram_figure(
            report.arrays["normalized_sums"],
            run.stem("erdos-fortet") + ".png", scale=np.sqrt(2.0),
            title=f"Erdos-Fortet {cfg['experiment.variant']} variant"))
    return run.emit("erdos-fortet", report, figure_paths=figs)


def cmd_typicality(run):
    cfg = run.cfg
    inds = experiments.dyadic_indicators(
        int(cfg["experiment.indicator_count"]), run.seed)
    report = experiments.typicality_experiment(
        run.family(), inds, int(cfg["experiment.samples"]),
        int(cfg["experiment.n"]), run.seed, threads=run.threads,
        grid_count=int(cfg["solver.grid_count"]),
        threshold=float(cfg["experiment.typicality_threshold"]),
        pass_fraction=float(cfg["experiment.typicality_pass_fraction"]))
    figs = []
    if run.render and "discrepancy_curve" in report.arrays:
        figs.append(figures.typicality_figure(
            report.arrays["checkpoints"], report.arrays["discrepancy_curve"],
            float(cfg["experiment.typicality_threshold"]),
            run.stem("typicality") + ".png"))
    return run.emit("typicality", report, figure_paths=figs)


_HANDLERS = {
    "density": cmd_density,
    "correlations": cmd_correlations,
    "variance": cmd_variance,
    "transversality": cmd_transversality,
    "partition": cmd_partition,
    "clt": cmd_clt,
    "lil": cmd_lil,
    "blocks": cmd_blocks,
    "erdos-fortet": cmd_erdos_fortet,
    "typicality": cmd_typicality,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.subcommand == "validate":
        sys.stdout.write(cfgmod.serialize(cfg))
        return 0

    render = args.figures if args.figures is not None else True
    run = Runner(cfg, render)
    names = list(_HANDLERS) if args.subcommand == "all" else [args.subcommand]
    worst = 0
    for name in names:
        try:
            verdict = _HANDLERS[name](run)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        except ExpmapError as exc:
            print(f"{name}: error: {exc}", file=sys.stderr)
            return 3
        if verdict is False:
            worst = max(worst, 1)
    return worst


if __name__ == "__main__":
    sys.exit(main())
