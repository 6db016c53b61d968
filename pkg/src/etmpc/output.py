"""CSV emission for traces, updates, certificates, refinement and sweeps.

Floats are written with repr-level precision so that repeated runs of the
same seeded configuration produce bitwise-identical files.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .collocation import ErrorCertificate
from .experiments import ClosedLoopLog, OpenLoopResult, SweepCell
from .refinement import RefinementReport


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_trace(path, log: ClosedLoopLog):
    """trace.csv: t, plant states, predicted states, inputs, |delta|."""
    n = log.xs.shape[1] if log.xs.size else 0
    m = log.us.shape[1] if log.us.size else 0
    header = (["t"] + [f"x{i}" for i in range(n)] + [f"xt{i}" for i in range(n)]
              + [f"u{j}" for j in range(m)] + ["delta_norm"])
    rows = (list(row) for row in np.column_stack(
        [log.ts, log.xs, log.preds] + ([log.us] if m else []) + [log.delta_norms]))
    _write(Path(path), header, rows)


def write_updates(path, log: ClosedLoopLog):
    """updates.csv: per-update trigger bounds and solve statistics."""
    header = ["k", "t_u", "tau_min", "tau_ct", "tau_qet", "nlp_iters",
              "K_final", "cost_so_far"]
    rows = [[u.index, u.t_u, u.tau_min, u.tau_ct, u.tau_qet,
             u.nlp_iterations, u.n_segments, u.cost_so_far] for u in log.updates]
    _write(Path(path), header, rows)


def write_certificate(path, cert: ErrorCertificate):
    """certificate.csv: per (segment, state) quadratures and weights."""
    header = ["segment", "state", "eta", "epsilon_rel", "w"]
    rows = []
    for k in range(cert.eta.shape[0]):
        for i in range(cert.eta.shape[1]):
            rows.append([k, i, cert.eta[k, i], cert.eps_rel[k, i], cert.weights[i]])
    _write(Path(path), header, rows)


def write_refinement_trace(path, report: RefinementReport):
    """refinement.csv: one row per refinement/tightening iteration."""
    header = ["iteration", "K", "max_eta", "max_eps_rel", "nlp_iters", "phase"]
    rows = []
    for i, it in enumerate(report.iterations):
        rows.append([i, it.mesh.n_segments, it.certificate.eta.max(),
                     it.certificate.eps_rel.max(), it.nlp_iterations, it.phase])
    _write(Path(path), header, rows)


def write_solution(path, report: RefinementReport):
    """solution.csv: mesh points, node states and tightened bounds per point."""
    traj = report.trajectory
    mesh = traj.mesh
    nodes = traj.node_states()
    n = nodes.shape[1]
    header = (["k", "t"] + [f"x{i}" for i in range(n)]
              + [f"lb{i}" for i in range(n)] + [f"ub{i}" for i in range(n)])
    rows = []
    for k in range(mesh.points.size):
        if report.tightened is not None and k < len(report.tightened):
            box = report.tightened[k]
            lo, hi = box.lower, box.upper
        else:
            lo = np.full(n, -np.inf)
            hi = np.full(n, np.inf)
        rows.append([k, mesh.points[k], *nodes[k], *lo, *hi])
    _write(Path(path), header, rows)


def write_open_loop_summary(path, results):
    """Comparison-table summary of the open-loop experiment."""
    header = ["scheme", "delta", "max_eta", "max_eta_row_norm", "first_fire",
              "tau_min", "tau_qet_eta", "tau_qet_eps", "tau_ct"]
    rows = [[r.summary_row()[h] for h in header] for r in results]
    _write(Path(path), header, rows)


def write_open_loop_trace(path, result: OpenLoopResult):
    """Dense open-loop trace for one scheme."""
    plant = result.plant
    preds = result.trajectory.eval_state(plant.ts)
    n = plant.xs.shape[1]
    header = ["t"] + [f"x{i}" for i in range(n)] + [f"xt{i}" for i in range(n)] \
        + ["delta_norm"]
    rows = (list(r) for r in np.column_stack(
        [plant.ts, plant.xs, preds, result.delta_norms]))
    _write(Path(path), header, rows)


def write_sweep(path, cells):
    """sweep.csv: one row per (delta, tolerance) cell."""
    header = ["delta", "tolerance", "updates", "total_nlp_iters", "wall_time_s",
              "cost", "mean_iut", "status"]
    rows = [[c.delta, c.tolerance, c.updates, c.total_nlp_iterations,
             c.wall_time, c.cost, c.mean_iut, c.status] for c in cells]
    _write(Path(path), header, rows)


def write_closed_loop(out_dir, log: ClosedLoopLog):
    """Emit the full closed-loop file set into a directory."""
    out = Path(out_dir)
    write_trace(out / "trace.csv", log)
    write_updates(out / "updates.csv", log)
    if log.certificates:
        write_certificate(out / "certificate.csv", log.certificates[-1])
    return out
