"""Baseline NLP solver: augmented Lagrangian with box-projected inner solves.

The outer loop handles the collocation equalities through multiplier
estimates and a growing quadratic penalty; inner iterates minimize the
augmented Lagrangian subject to the variable bounds with a damped projected
Newton method (active set from the projected gradient, backtracking on the
smooth merit). Once the iterate is nearly feasible, a minimum-norm
feasibility restoration plus an active-set Newton-KKT polish drive the
residuals to the reported tolerance. The solver is deterministic: identical
inputs reproduce the iterate sequence bit for bit.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .collocation import PiecewiseTrajectory
from .ocp import TranscribedNLP

log = logging.getLogger("etmpc.solver")


class SolverStatus(enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = 1e-8
    max_iter: int = 500           # outer (major) iteration cap
    inner_max_iter: int = 80
    penalty_init: float = 1e3
    penalty_growth: float = 10.0
    penalty_cap: float = 1e10


@dataclass
class NLPSolution:
    trajectory: PiecewiseTrajectory
    z: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    status: SolverStatus
    multipliers: np.ndarray


# Activity tolerance for KKT measurement: after feasibility restoration,
# bound-riding variables can sit a restoration-step away from their bound;
# counting them free would charge their bound multiplier to the
# stationarity residual.
ACTIVITY_TOL = 1e-7


def _projected_gradient(g, z, lb, ub, tol=ACTIVITY_TOL):
    pg = g.copy()
    pg[(z <= lb + tol) & (pg > 0)] = 0.0
    pg[(z >= ub - tol) & (pg < 0)] = 0.0
    return pg


def _free_mask(z, lb, ub, tol=ACTIVITY_TOL):
    return ~((z <= lb + tol) | (z >= ub - tol))


def _snap_to_bounds(z, lb, ub, tol=ACTIVITY_TOL):
    z = np.clip(z, lb, ub)
    z = np.where(z - lb <= tol, lb, z)
    z = np.where(ub - z <= tol, ub, z)
    return z


def _regularized_solve(a, b):
    a = a.copy()
    a[np.diag_indices_from(a)] += 1e-12 * max(1.0, abs(np.trace(a)) / max(a.shape[0], 1))
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(a, b, rcond=None)[0]


def _ls_multipliers(J, g, free):
    Jf = J[:, free]
    return _regularized_solve(Jf @ Jf.T, Jf @ g[free])


def _kkt_residual(nlp, z, lb, ub):
    """(scaled KKT residual, LS multipliers).

    Stationarity is scaled by the multiplier magnitude (as production NLP
    codes do) so that ill-conditioned duals do not block convergence
    declarations; feasibility is reported unscaled.
    """
    c = nlp.constraints(z)
    g = nlp.gradient(z)
    J = nlp.jacobian(z)
    free = _free_mask(z, lb, ub)
    lam = _ls_multipliers(J, g, free) if c.size else np.zeros(0)
    pg = _projected_gradient(g - (J.T @ lam if lam.size else 0.0), z, lb, ub)
    feas = np.abs(c).max() if c.size else 0.0
    stat = np.abs(pg).max() if pg.size else 0.0
    scale = 1.0 + (np.abs(lam).max() if lam.size else 0.0)
    return max(feas, stat / scale), lam


def _restore_feasibility(nlp, z, lb, ub, tol, max_steps=4):
    """Minimum-norm Newton correction of the equality residual on free variables."""
    z = _snap_to_bounds(z, lb, ub)
    for _ in range(max_steps):
        c = nlp.constraints(z)
        if not c.size or np.abs(c).max() <= 0.01 * tol:
            break
        J = nlp.jacobian(z)
        free = _free_mask(z, lb, ub)
        Jf = J[:, free]
        step = np.zeros_like(z)
        step[free] = Jf.T @ _regularized_solve(Jf @ Jf.T, c)
        z = np.clip(z - step, lb, ub)
    return z


def _kkt_polish(nlp, z, lb, ub, tol, max_steps=40):
    """Finish an almost-solved iterate; thin wrapper over the SQP engine."""
    z, kkt, lam, _, _ = _sqp(nlp, z, lb, ub, tol, max_iter=max_steps)
    return z, kkt, lam


def _al_inner(nlp, z, lam, mu, lb, ub, max_newton, gtol=1e-10):
    """Projected-Newton minimization of the augmented Lagrangian over the box.

    Variables whose gradient pushes into their bound are frozen per
    iteration; the Newton direction uses the Gauss-Newton AL Hessian
    (objective curvature plus mu J'J, always positive semidefinite, so
    every direction is a descent direction) with a backtracking line search
    on the smooth merit value. The gradient target scales with the penalty:
    at large mu only feasibility is resolvable and the stationarity finish
    is left to the KKT polish.
    """

    def value(zz):
        c = nlp.constraints(zz)
        return nlp.objective(zz) - lam @ c + 0.5 * mu * (c @ c)

    val = value(z)
    gtol_eff = max(gtol, 1e-13 * mu)
    for _ in range(max_newton):
        c = nlp.constraints(z)
        J = nlp.jacobian(z)
        g = nlp.gradient(z) + J.T @ (mu * c - lam)
        pg = _projected_gradient(g, z, lb, ub, tol=1e-9)
        if np.abs(pg).max() <= gtol_eff:
            break
        at_lower = z <= lb + 1e-9
        at_upper = z >= ub - 1e-9
        free = ~((at_lower & (g > 0)) | (at_upper & (g < 0)))
        if not free.any():
            break
        Jf = J[:, free]
        Hf = nlp.objective_hessian(z)[np.ix_(free, free)] + mu * (Jf.T @ Jf)
        Hf[np.diag_indices_from(Hf)] += 1e-10 * max(mu, 1.0)
        d = np.zeros_like(z)
        try:
            d[free] = np.linalg.solve(Hf, -g[free])
        except np.linalg.LinAlgError:
            d[free] = -pg[free]
        deriv = g @ d
        if deriv >= 0:
            d = np.zeros_like(z)
            d[free] = -pg[free]
            deriv = g @ d
        step = 1.0
        improved = False
        for _ in range(30):
            z_try = np.clip(z + step * d, lb, ub)
            val_try = value(z_try)
            if val_try <= val + 1e-4 * step * deriv:
                z, val = z_try, val_try
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return z


def _sqp(nlp, z, lb, ub, tol, max_iter=150):
    """SQP with exact Lagrangian Hessians and an l1-merit line search.

    Active bounds enter the step computation as fixed variables, released on
    a wrong multiplier sign; the Levenberg parameter adapts to line-search
    quality. Returns (z, kkt, lam, iterations, converged).
    """
    kkt, lam = _kkt_residual(nlp, z, lb, ub)
    reg = 1e-9
    rho = 10.0
    best_kkt = kkt
    stall = 0

    def merit(zz, rho):
        c = nlp.constraints(zz)
        return nlp.objective(zz) + rho * (np.abs(c).sum() if c.size else 0.0)

    for it in range(1, max_iter + 1):
        if kkt <= tol:
            return z, kkt, lam, it - 1, True
        if stall >= 15:
            break
        c = nlp.constraints(z)
        g = nlp.gradient(z)
        J = nlp.jacobian(z)
        free = _free_mask(z, lb, ub)
        if c.size:
            pg_all = g - J.T @ lam
            at_lower = (z <= lb + ACTIVITY_TOL) & ~free
            at_upper = (z >= ub - ACTIVITY_TOL) & ~free
            wrong = np.where(at_lower & (ub > lb + 1e-15), np.minimum(pg_all + tol, 0.0), 0.0)
            wrong += np.where(at_upper & (ub > lb + 1e-15), np.maximum(pg_all - tol, 0.0), 0.0)
            if np.any(wrong != 0.0):
                free[int(np.argmax(np.abs(wrong)))] = True
        if not free.any():
            break
        m = c.size
        c1 = np.abs(c).sum() if m else 0.0
        accepted = False
        # First model: exact Lagrangian Hessian (fast local convergence).
        # Fallback models: the positive-semidefinite objective Hessian with
        # growing regularization, which always yields merit descent when the
        # exact model is indefinite along the step.
        H_psd = None
        for attempt in range(8):
            if attempt == 0:
                H_full = nlp.lagrangian_hessian(z, lam)
            elif attempt == 1:
                H_psd = nlp.objective_hessian(z)
                H_full = H_psd
                reg = max(reg, 1e-8)
            else:
                H_full = H_psd
            # Box-QP subproblem by a primal active-set loop: when the ratio
            # test blocks the step before alpha = 1, pin the blocker at its
            # bound and re-solve the QP instead of bending the direction by
            # clipping.
            work = free.copy()
            d = np.zeros_like(z)
            lam_new = lam
            failed = False
            for _ in range(12):
                nf = int(work.sum())
                if nf == 0:
                    failed = True
                    break
                Jw = J[:, work]
                kkt_mat = np.zeros((nf + m, nf + m))
                kkt_mat[:nf, :nf] = H_full[np.ix_(work, work)]
                kkt_mat[np.diag_indices(nf)] += reg
                if m:
                    kkt_mat[:nf, nf:] = Jw.T
                    kkt_mat[nf:, :nf] = Jw
                # Pinned blockers sit at their bound already, so the step
                # for them is zero and the reduced rhs stays -g, -c.
                rhs = np.concatenate([-g[work], -c])
                try:
                    sol = np.linalg.solve(kkt_mat, rhs)
                except np.linalg.LinAlgError:
                    failed = True
                    break
                d = np.zeros_like(z)
                d[work] = sol[:nf]
                # QP multiplier sign flipped into the g - J'lam convention.
                lam_new = -sol[nf:]
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratios = np.where(d > 1e-16, (ub - z) / d,
                                      np.where(d < -1e-16, (lb - z) / d, np.inf))
                ratios[~work] = np.inf
                blocker = int(np.argmin(ratios))
                if ratios[blocker] >= 1.0 - 1e-12:
                    break
                work[blocker] = False
            if failed:
                reg = max(reg * 100.0, 1e-6)
                continue
            if attempt == 0 and np.abs(d).max() <= 1e-9 * (1.0 + np.abs(z).max()) \
                    and kkt > 10 * tol:
                # Converged working-set iteration at a non-KKT point: the
                # indefinite model pins releases straight back (saddle
                # cycling); move to the positive-semidefinite model.
                continue
            # Keep the final (possibly partial) direction feasible.
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(d > 1e-16, (ub - z) / d,
                                  np.where(d < -1e-16, (lb - z) / d, np.inf))
            scale_d = float(min(np.min(ratios), 1.0))
            if scale_d < 1.0:
                d *= max(scale_d, 0.0)
            rho = max(rho, 2.0 * (np.abs(lam_new).max() if m else 0.0) + 1.0)
            phi0 = merit(z, rho)
            dphi = g @ d - rho * c1
            # Full step, then a second-order correction (the l1 merit
            # otherwise rejects full Newton steps near the constraint
            # manifold), then plain backtracking.
            z_try = _snap_to_bounds(z + d, lb, ub)
            if merit(z_try, rho) <= phi0 + 1e-4 * min(dphi, 0.0):
                step = 1.0
                accepted = True
            if not accepted and m:
                Jf = J[:, free]
                c_full = nlp.constraints(z_try)
                corr = np.zeros_like(z)
                corr[free] = Jf.T @ _regularized_solve(Jf @ Jf.T, c_full)
                z_soc = _snap_to_bounds(z_try - corr, lb, ub)
                if merit(z_soc, rho) <= phi0 + 1e-4 * min(dphi, 0.0):
                    z_try = z_soc
                    step = 1.0
                    accepted = True
            if not accepted:
                step = 0.5
                for _ in range(19):
                    z_try = _snap_to_bounds(z + step * d, lb, ub)
                    if merit(z_try, rho) <= phi0 + 1e-4 * step * min(dphi, 0.0):
                        accepted = True
                        break
                    step *= 0.5
            if accepted:
                break
            reg = max(reg * 100.0, 1e-6)
        if not accepted:
            kkt_now, lam_ls = _kkt_residual(nlp, z, lb, ub)
            return z, kkt_now, lam_ls, it, kkt_now <= tol
        z = _snap_to_bounds(z_try, lb, ub)
        lam = lam_new
        reg = max(reg / 10.0, 1e-9) if step >= 0.5 else min(reg * 10.0, 1e2)
        kkt, lam_ls = _kkt_residual(nlp, z, lb, ub)
        if kkt < 0.9 * best_kkt:
            best_kkt = kkt
            stall = 0
        else:
            stall += 1
        if log.isEnabledFor(logging.DEBUG) and it % 10 == 0:
            log.debug("  sqp it=%d step=%.3g kkt=%.3e reg=%.1e", it, step, kkt, reg)
        if kkt <= tol:
            return z, kkt, lam_ls, it, True
    kkt, lam = _kkt_residual(nlp, z, lb, ub)
    return z, kkt, lam, max_iter, kkt <= tol


def solve_nlp(nlp: TranscribedNLP, warm_start: Optional[PiecewiseTrajectory] = None,
              settings: SolverSettings = SolverSettings()) -> NLPSolution:
    """Solve a transcribed NLP; see the module docstring for the algorithm."""
    lb, ub = nlp.lower, nlp.upper
    z = nlp.initial_guess(warm_start)

    kkt, lam = _kkt_residual(nlp, z, lb, ub)
    if kkt <= settings.tolerance:
        return NLPSolution(nlp.trajectory(z), z, nlp.objective(z), kkt, 0,
                           SolverStatus.OPTIMAL, lam)

    # Feasibility restoration puts warm starts on the constraint manifold,
    # from which the SQP phase typically finishes in a few steps.
    c0 = nlp.constraints(z)
    if warm_start is not None or not c0.size or np.abs(c0).max() <= 1e-2:
        z_try = _restore_feasibility(nlp, z, lb, ub, settings.tolerance, max_steps=10)
        c_try = nlp.constraints(z_try)
        if not c_try.size or np.abs(c_try).max() <= min(1e-6, np.abs(c0).max()):
            z = z_try

    # Main phase: SQP with l1-merit globalization. A short budget suffices
    # for warm and mildly perturbed problems; stubborn instances move on to
    # the dense-SQP rescue rather than burning the full budget here.
    log.debug("sqp phase: n_vars=%d n_eq=%d", nlp.n_vars, nlp.n_eq)
    z, kkt, lam, sqp_iters, converged = _sqp(nlp, z, lb, ub, settings.tolerance,
                                             max_iter=min(settings.max_iter, 40))
    log.debug("sqp done: iters=%d kkt=%.3e converged=%s", sqp_iters, kkt, converged)
    if converged or kkt <= settings.tolerance:
        z = _restore_feasibility(nlp, z, lb, ub, settings.tolerance)
        kkt, lam = _kkt_residual(nlp, z, lb, ub)
        if kkt <= settings.tolerance:
            return NLPSolution(nlp.trajectory(z), z, nlp.objective(z), kkt,
                               max(sqp_iters, 1), SolverStatus.OPTIMAL, lam)

    # Dense BFGS-SQP rescue, finished by the Newton polish.
    log.debug("slsqp rescue from kkt=%.3e", kkt)
    res = minimize(lambda zz: (nlp.objective(zz), nlp.gradient(zz)), z, jac=True,
                   method="SLSQP", bounds=list(zip(lb, ub)),
                   constraints=[{"type": "eq", "fun": nlp.constraints,
                                 "jac": nlp.jacobian}] if nlp.n_eq else [],
                   options={"maxiter": 300, "ftol": 1e-12})
    z_r = np.clip(res.x, lb, ub)
    z_r = _restore_feasibility(nlp, z_r, lb, ub, settings.tolerance)
    z_r, kkt_r, lam_r, extra_it, conv_r = _sqp(nlp, z_r, lb, ub, settings.tolerance,
                                               max_iter=40)
    z_r = _restore_feasibility(nlp, z_r, lb, ub, settings.tolerance)
    kkt_r, lam_r = _kkt_residual(nlp, z_r, lb, ub)
    if kkt_r < kkt:
        z, kkt, lam = z_r, kkt_r, lam_r
    if kkt <= settings.tolerance:
        return NLPSolution(nlp.trajectory(z), z, nlp.objective(z), kkt,
                           sqp_iters + max(extra_it, 1), SolverStatus.OPTIMAL, lam)

    # Fallback: augmented-Lagrangian outer loop with projected-Newton inners.
    mu = settings.penalty_init
    lam = np.zeros(nlp.n_eq)
    prev_infeas = np.inf
    stagnant = 0
    status = SolverStatus.MAX_ITER
    iterations = settings.max_iter
    al_cap = min(settings.max_iter, 40)

    for outer in range(1, al_cap + 1):
        z = _al_inner(nlp, z, lam, mu, lb, ub, settings.inner_max_iter,
                      gtol=0.01 * settings.tolerance)
        c = nlp.constraints(z)
        infeas = np.abs(c).max() if c.size else 0.0

        lam = lam - mu * c
        if infeas > 0.25 * prev_infeas and infeas > 10 * settings.tolerance:
            mu = min(mu * settings.penalty_growth, settings.penalty_cap)
            stagnant += 1
        else:
            stagnant = 0
        prev_infeas = min(prev_infeas, infeas)

        if infeas <= 1e-5:
            z = _restore_feasibility(nlp, z, lb, ub, settings.tolerance)
            z, kkt, lam_ls = _kkt_polish(nlp, z, lb, ub, settings.tolerance)
            z = _restore_feasibility(nlp, z, lb, ub, settings.tolerance)
            kkt, lam_ls = _kkt_residual(nlp, z, lb, ub)
            if kkt <= settings.tolerance:
                status = SolverStatus.OPTIMAL
                lam = lam_ls
                iterations = sqp_iters + outer
                break
            # Retry the SQP phase from the feasible point reached here.
            z2, kkt2, lam2, extra, conv2 = _sqp(nlp, z, lb, ub, settings.tolerance,
                                                max_iter=50)
            if kkt2 < kkt:
                z, kkt, lam_ls = z2, kkt2, lam2
            if kkt <= settings.tolerance:
                status = SolverStatus.OPTIMAL
                lam = lam_ls
                iterations = sqp_iters + outer + extra
                break
        else:
            kkt, _ = _kkt_residual(nlp, z, lb, ub)

        if mu >= settings.penalty_cap and stagnant >= 8:
            # Only a genuinely unreachable constraint set counts as
            # infeasible; a stalled-but-feasible iterate is MAX_ITER.
            if infeas > 1e-6:
                status = SolverStatus.INFEASIBLE
            iterations = sqp_iters + outer
            break

    return NLPSolution(nlp.trajectory(z), z, nlp.objective(z), kkt, iterations,
                       status, lam if isinstance(lam, np.ndarray) and lam.size else np.zeros(0))
