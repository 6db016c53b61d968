"""Command-line interface.

Subcommands mirror the library experiments: ``simulate-open-loop``,
``simulate-closed-loop``, ``trigger-estimate``, ``refine`` and ``sweep``.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from .config import RunConfig, load_config
from .errors import ConfigError, NumericalFailure, RefinementFailure
from .experiments import (build_model, build_noise, build_ocp,
                          build_refinement_config, build_tightening_params,
                          build_trigger_config, run_closed_loop,
                          run_open_loop_experiment, sweep_thresholds)
from .mesh import uniform_mesh
from .refinement import refine_with_tightening
from .triggering import ct_time, min_iut, qet_time
from . import output

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _load(config_path, seed, out):
    cfg = load_config(config_path)
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if out is not None:
        overrides["out_dir"] = str(out)
    return cfg.with_overrides(**overrides) if overrides else cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir) if cfg.out_dir else Path("etmpc-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


common_options = [
    click.option("--config", "config_path", required=True,
                 type=click.Path(), help="JSON run configuration."),
    click.option("--seed", type=int, default=None, help="Override RNG seed."),
    click.option("--out", type=click.Path(), default=None, help="Output directory."),
    click.option("--format", "fmt", type=click.Choice(["csv"]), default="csv",
                 show_default=True, help="Output format."),
]


def add_options(options):
    def wrap(fn):
        for opt in reversed(options):
            fn = opt(fn)
        return fn
    return wrap


@click.group()
def main():
    """Certified direct collocation with event/self-triggered MPC loops."""


@main.command("simulate-open-loop")
@add_options(common_options)
def simulate_open_loop(config_path, seed, out, fmt):
    """Collocate, certify and monitor the autonomous benchmark."""
    try:
        cfg = _load(config_path, seed, out)
        results = run_open_loop_experiment(cfg)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (NumericalFailure, RefinementFailure) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    out_dir = _out_dir(cfg)
    output.write_open_loop_summary(out_dir / "summary.csv", results)
    for r in results:
        output.write_open_loop_trace(out_dir / f"trace_{r.scheme.value}.csv", r)
        output.write_certificate(out_dir / f"certificate_{r.scheme.value}.csv",
                                 r.certificate)
    click.echo(f"{'scheme':>6} {'delta':>8} {'max_eta':>10} {'first_fire':>11} "
               f"{'tau_min':>9} {'tau_qet':>9} {'tau_ct':>9}")
    for r in results:
        row = r.summary_row()
        click.echo(f"{row['scheme']:>6} {row['delta']:>8.3g} {row['max_eta']:>10.4g} "
                   f"{str(row['first_fire']):>11} "
                   f"{_s(row['tau_min'])} {_s(row['tau_qet_eta'])} {_s(row['tau_ct'])}")
    click.echo(f"wrote {out_dir}/summary.csv")


def _s(v):
    return f"{v:>9.4g}" if v is not None else f"{'-':>9}"


@main.command("simulate-closed-loop")
@add_options(common_options)
def simulate_closed_loop(config_path, seed, out, fmt):
    """Run one seeded ETC or self-triggered closed loop."""
    try:
        cfg = _load(config_path, seed, out)
        log = run_closed_loop(cfg)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (NumericalFailure, RefinementFailure) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    out_dir = _out_dir(cfg)
    output.write_closed_loop(out_dir, log)
    click.echo(f"{len(log.updates)} updates, mean inter-update time "
               f"{log.mean_iut:.4g} s, closed-loop cost {log.final_cost:.6g}")
    if log.aborted:
        click.echo(f"run aborted early: {log.aborted}", err=True)
        sys.exit(EXIT_NUMERICAL)
    click.echo(f"wrote {out_dir}/trace.csv, updates.csv, certificate.csv")


@main.command("trigger-estimate")
@add_options(common_options)
def trigger_estimate(config_path, seed, out, fmt):
    """Solve one window and print the inter-update-time bounds."""
    try:
        cfg = _load(config_path, seed, out)
        model = build_model(cfg)
        noise = build_noise(cfg, model)
        ref_cfg = build_refinement_config(cfg, model)
        trig = build_trigger_config(cfg, model)
        mesh = uniform_mesh(0.0, cfg.horizon, cfg.mesh_segments)
        ocp = build_ocp(cfg, model)
        if ocp.initial_state is None:
            raise ConfigError("trigger-estimate needs an initial_state")
        if model.autonomous:
            report = None
            from .refinement import refine
            report = refine(ocp, mesh, cfg.scheme, ref_cfg, cfg.solver)
        else:
            params = build_tightening_params(cfg, model, noise)
            report = refine_with_tightening(ocp, mesh, cfg.scheme, ref_cfg, params,
                                            cfg.solver)
        cert = report.certificate
        final_mesh = report.final_mesh
        tau_min = min_iut(ref_cfg.tolerance, cfg.tolerance_mode, final_mesh.sigma,
                          final_mesh.h, model.lipschitz_x, noise, trig,
                          w_hat=np.ones(model.state_dim))
        tau_qet = qet_time(cert, model.lipschitz_x, noise, trig)
        tau_ct = ct_time(report.trajectory, model, noise, trig)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (NumericalFailure, RefinementFailure, ValueError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    rows = [("tau_min", tau_min), ("tau_ct", tau_ct), ("tau_qet", tau_qet),
            ("L_x", model.lipschitz_x), ("v_hat", noise.v_hat),
            ("theta_hat", noise.theta_hat), ("sigma", final_mesh.sigma),
            ("h", final_mesh.h), ("K", final_mesh.n_segments),
            ("max_eta", float(cert.eta.max())), ("delta", trig.delta)]
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        click.echo(f"{name:<{width}}  {value:.6g}")
    if cfg.out_dir:
        out_dir = _out_dir(cfg)
        output._write(out_dir / "trigger_report.csv", ["quantity", "value"], rows)
        click.echo(f"wrote {out_dir}/trigger_report.csv")


@main.command("refine")
@add_options(common_options)
def refine_cmd(config_path, seed, out, fmt):
    """Run the refinement + tightening procedure for one window."""
    try:
        cfg = _load(config_path, seed, out)
        model = build_model(cfg)
        noise = build_noise(cfg, model)
        ref_cfg = build_refinement_config(cfg, model)
        mesh = uniform_mesh(0.0, cfg.horizon, cfg.mesh_segments)
        ocp = build_ocp(cfg, model)
        if model.autonomous:
            from .refinement import refine
            report = refine(ocp, mesh, cfg.scheme, ref_cfg, cfg.solver)
        else:
            params = build_tightening_params(cfg, model, noise)
            report = refine_with_tightening(ocp, mesh, cfg.scheme, ref_cfg, params,
                                            cfg.solver)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (NumericalFailure, RefinementFailure) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    out_dir = _out_dir(cfg)
    output.write_refinement_trace(out_dir / "refinement.csv", report)
    output.write_certificate(out_dir / "certificate.csv", report.certificate)
    output.write_solution(out_dir / "solution.csv", report)
    click.echo(f"{len(report.iterations)} iterations "
               f"({report.tightening_iterations} tightening), "
               f"final K={report.final_mesh.n_segments}, "
               f"max eta={report.certificate.eta.max():.4g}")
    click.echo(f"wrote {out_dir}/refinement.csv, certificate.csv, solution.csv")


@main.command("sweep")
@add_options(common_options)
@click.option("--deltas", required=True, help="Comma-separated trigger thresholds.")
@click.option("--tolerances", required=True, help="Comma-separated refinement tolerances.")
def sweep_cmd(config_path, seed, out, fmt, deltas, tolerances):
    """Full-factorial closed-loop sweep over thresholds and tolerances."""
    try:
        cfg = _load(config_path, seed, out)
        dlist = [float(v) for v in deltas.split(",") if v.strip()]
        tlist = [float(v) for v in tolerances.split(",") if v.strip()]
        if not dlist or not tlist:
            raise ConfigError("sweep lists must be non-empty")
        cells = sweep_thresholds(cfg, dlist, tlist)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (NumericalFailure, RefinementFailure) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    out_dir = _out_dir(cfg)
    output.write_sweep(out_dir / "sweep.csv", cells)
    for c in cells:
        click.echo(f"delta={c.delta:g} tol={c.tolerance:g}: {c.updates} updates, "
                   f"{c.total_nlp_iterations} NLP iters, {c.wall_time:.1f}s [{c.status}]")
    click.echo(f"wrote {out_dir}/sweep.csv")


if __name__ == "__main__":
    main()
