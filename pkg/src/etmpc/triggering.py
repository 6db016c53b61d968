"""Event-trigger evaluation and inter-update-time bounds.

Three bounds are computed from certified collocation solutions:

* ``min_iut``  - offline worst-case lower bound from the refinement
  tolerances and mesh parameters alone;
* ``ct_time``  - online bound from the collocation structure (polynomial
  Lipschitz constants), usable even without error certificates;
* ``qet_time`` - online bound from the realized error quadratures.

All bound functions share the same envelope shape: a covering sum of
per-segment error terms plus noise terms, amplified by the Gronwall factor
exp(L_x * tau), compared against the trigger threshold. The envelopes are
nondecreasing in tau and jump upward as tau crosses mesh points, so the
supremum is located by a boundary sweep plus bisection.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .collocation import (ErrorCertificate, PiecewiseTrajectory, collocation_points,
                          scaling_weights, segment_poly_lipschitz)
from .errors import ThresholdTooSmallError, UnboundedWeightError
from .mesh import Mesh
from .models import DynamicsModel, NoiseBounds
from .norms import NormConfig, induced_weight_norm, weighted_norm
from .quadrature import integrate_abs

BISECTION_TOL = 1e-9


class ToleranceMode(enum.Enum):
    RELATIVE = "rel"
    ABSOLUTE = "abs"


@dataclass(frozen=True)
class TriggerConfig:
    """Threshold, norm and horizon cap shared by all triggering quantities."""

    delta: float
    norm: NormConfig = field(default_factory=NormConfig)
    horizon: float = np.inf

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("trigger threshold delta must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon cap must be positive")


@dataclass(frozen=True)
class TriggerReport:
    """Computed bounds plus the data they were evaluated from."""

    tau_min: Optional[float] = None
    tau_ct: Optional[float] = None
    tau_qet: Optional[float] = None
    inputs: dict = field(default_factory=dict)

    def row(self) -> dict:
        out = {"tau_min": self.tau_min, "tau_ct": self.tau_ct, "tau_qet": self.tau_qet}
        out.update(self.inputs)
        return out


def event_condition(pred: PiecewiseTrajectory, measured_state, t: float,
                    cfg: TriggerConfig) -> tuple[bool, float]:
    """Evaluate the trigger at one instant.

    Returns (fired, margin) with margin = delta - |x~(t) - measurement|_M;
    the event fires when the margin reaches zero.
    """
    delta_vec = pred.eval_state(t) - np.asarray(measured_state, dtype=float)
    margin = cfg.delta - weighted_norm(delta_vec, cfg.norm)
    return margin <= 0.0, float(margin)


def min_iut(tolerance, mode: ToleranceMode, sigma: float, h: float,
            lipschitz_x: float, noise: NoiseBounds, cfg: TriggerConfig,
            w_hat=None) -> float:
    """Guaranteed minimum inter-update time from offline data.

    RELATIVE mode scales the tolerance vector by (w_hat + 1); ABSOLUTE mode
    uses the absolute tolerance vector directly. The displayed form of this
    bound carries a sign typo on the measurement-noise term; the
    proof-consistent (conservative) minus sign is implemented, which also
    matches the stated positivity condition.
    """
    tolerance = np.atleast_1d(np.asarray(tolerance, dtype=float))
    if mode is ToleranceMode.RELATIVE:
        if w_hat is None:
            raise ValueError("relative mode needs the scaling-weight bound w_hat")
        xi = (np.atleast_1d(np.asarray(w_hat, dtype=float)) + 1.0) * tolerance
    else:
        xi = tolerance
    const = induced_weight_norm(cfg.norm)
    xi_norm = weighted_norm(xi, cfg.norm)
    numerator = cfg.delta - xi_norm - const * 2.0 * noise.theta_hat
    if numerator <= 0:
        raise ThresholdTooSmallError(
            f"threshold {cfg.delta} too small; needs delta > {xi_norm + const * 2 * noise.theta_hat:.6g}",
            min_delta=xi_norm + const * 2.0 * noise.theta_hat)
    denominator = xi_norm / (sigma * h) + const * (lipschitz_x * cfg.delta + noise.v_hat)
    tau = numerator / denominator if denominator > 0 else np.inf
    return float(min(tau, cfg.horizon))


def _sweep_bound(mesh: Mesh, seg_terms_norm: np.ndarray, lipschitz_x: float,
                 noise: NoiseBounds, cfg: TriggerConfig) -> float:
    """sup{tau : (prefix(tau) + c(2 theta + v tau)) exp(L tau) <= delta}.

    ``seg_terms_norm[j]`` is the M-norm of the accumulated per-segment terms
    for all segments up to j inclusive. The envelope is nondecreasing, so a
    sweep over coverage pieces plus bisection in the crossing piece finds
    the supremum to BISECTION_TOL seconds.
    """
    const = induced_weight_norm(cfg.norm)
    t_rel = mesh.points - mesh.t0
    t_cap = min(cfg.horizon, t_rel[-1])

    def envelope(tau, prefix):
        return (prefix + const * (2.0 * noise.theta_hat + noise.v_hat * tau)) \
            * np.exp(lipschitz_x * tau)

    if envelope(0.0, seg_terms_norm[0]) > cfg.delta:
        raise ThresholdTooSmallError(
            f"threshold {cfg.delta} violated already as tau -> 0+",
            min_delta=envelope(0.0, seg_terms_norm[0]))

    # Pieces: tau in (t_j, t_{j+1}] covers segments 0..j.
    for j in range(mesh.n_segments):
        lo, hi = t_rel[j], min(t_rel[j + 1], t_cap)
        if lo >= t_cap:
            return t_cap
        prefix = seg_terms_norm[j]
        if envelope(hi, prefix) <= cfg.delta:
            continue
        if envelope(lo, prefix) > cfg.delta:
            # Jump at the piece boundary crossed the threshold.
            return float(lo)
        a, b = lo, hi
        while b - a > BISECTION_TOL:
            mid = 0.5 * (a + b)
            if envelope(mid, prefix) <= cfg.delta:
                a = mid
            else:
                b = mid
        return float(a)
    return t_cap


def qet_time(cert: ErrorCertificate, lipschitz_x: float, noise: NoiseBounds,
             cfg: TriggerConfig, mode: ToleranceMode = ToleranceMode.ABSOLUTE) -> float:
    """Quadrature-error triggering bound from a realized certificate.

    ABSOLUTE mode accumulates the absolute quadratures; RELATIVE mode scales
    the relative quadratures back by (w + 1), which reproduces the absolute
    ones on a consistent certificate (the two modes then agree by
    construction).
    """
    if mode is ToleranceMode.RELATIVE:
        terms = (cert.weights + 1.0) * cert.eps_rel
    else:
        terms = cert.eta
    cumulative = np.cumsum(terms, axis=0)
    prefix_norms = np.array([weighted_norm(row, cfg.norm) for row in cumulative])
    return _sweep_bound(cert.mesh, prefix_norms, lipschitz_x, noise, cfg)


def ct_time(traj: PiecewiseTrajectory, model: DynamicsModel, noise: NoiseBounds,
            cfg: TriggerConfig, quad_rtol: float = 1e-8) -> float:
    """Collocation triggering bound from the solution structure alone.

    Per segment and state the inner integral accumulates the polynomial
    Lipschitz term and the state displacement from the nearest collocation
    point, scaled by 1/(w+1); no error certificate is needed.
    """
    mesh = traj.mesh
    K, n = mesh.n_segments, traj.state_dim
    w = scaling_weights(traj)
    lx = model.lipschitz_x
    seg_integrals = np.empty((K, n))
    for k in range(K):
        a, b = mesh.segment(k)
        cols = np.asarray(collocation_points(traj.scheme, (a, b)))
        lpk = segment_poly_lipschitz(traj, k, p=cfg.norm.p)

        def integrand(ts):
            idx = np.argmin(np.abs(ts[:, None] - cols[None, :]), axis=1)
            tc = cols[idx]
            gap = np.abs(ts - tc)
            x_ts = traj.eval_state(ts)
            x_tc = traj.eval_state(tc)
            return (lpk * gap[:, None] + lx * np.abs(x_tc - x_ts)) / (w + 1.0)

        # Split at collocation midpoints: the nearest-point map switches there.
        splits = np.concatenate([[a], 0.5 * (cols[1:] + cols[:-1]), [b]])
        total = np.zeros(n)
        for lo, hi in zip(splits[:-1], splits[1:]):
            if hi > lo:
                val, _ = integrate_abs(integrand, lo, hi, rtol=quad_rtol)
                total += val
        seg_integrals[k] = total
    cumulative = np.cumsum(seg_integrals, axis=0)
    prefix_norms = np.array([weighted_norm(row, cfg.norm) for row in cumulative])
    return _sweep_bound(mesh, prefix_norms, lx, noise, cfg)


def scaling_weight_bound(state_box, rate_box=None, lipschitz_x: float = None,
                         origin_equilibrium: bool = False) -> np.ndarray:
    """Offline bound w_hat on the scaling weights from constraint boxes.

    With state and rate boxes: w_hat_i = max(|bounds|). With only a state
    box and an origin equilibrium, the rate is bounded through the Lipschitz
    constant instead.
    """
    lo = np.atleast_1d(np.asarray(state_box[0], dtype=float))
    hi = np.atleast_1d(np.asarray(state_box[1], dtype=float))
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise UnboundedWeightError("state box must be finite for a weight bound")
    state_mag = np.maximum(np.abs(lo), np.abs(hi))
    if origin_equilibrium:
        if lipschitz_x is None:
            raise ValueError("origin-equilibrium mode needs lipschitz_x")
        return np.maximum(state_mag, lipschitz_x * state_mag)
    if rate_box is None:
        raise ValueError("need a rate box or origin_equilibrium=True")
    rlo = np.atleast_1d(np.asarray(rate_box[0], dtype=float))
    rhi = np.atleast_1d(np.asarray(rate_box[1], dtype=float))
    if not (np.all(np.isfinite(rlo)) and np.all(np.isfinite(rhi))):
        raise UnboundedWeightError("rate box must be finite for a weight bound")
    return np.maximum(state_mag, np.maximum(np.abs(rlo), np.abs(rhi)))
