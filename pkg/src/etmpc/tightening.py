"""Constraint-set machinery for guaranteed continuous-time satisfaction.

Box constraint sets are eroded by weighted-norm balls (Pontryagin
difference) whose radius grows with prediction time: the radius combines the
certified per-segment ODE error budget, noise bounds and the Lipschitz
growth envelope, clamped at the trigger threshold since the event condition
guarantees an update before the prediction error exceeds it. A second,
per-mesh-point erosion handles the excursion of the polynomial trajectory
between mesh points.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .collocation import PiecewiseTrajectory
from .errors import DimensionError, EmptySetError, InfeasibleTighteningError
from .mesh import Mesh, covering_prefix
from .norms import NormConfig, ball_axis_extent, induced_weight_norm, unweighted_norm, weighted_norm

UPSILON_SAMPLES = 129


@dataclass(frozen=True)
class BoxSet:
    """Axis-aligned box with possibly infinite bounds; closed and convex."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise DimensionError("box bounds have mismatched shapes")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def empty(self) -> bool:
        return bool(np.any(self.lower > self.upper))

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    @staticmethod
    def unbounded(n: int) -> "BoxSet":
        return BoxSet(np.full(n, -np.inf), np.full(n, np.inf))


@dataclass(frozen=True)
class TighteningParams:
    """Inputs of the growing-ball tightening.

    ``xi_hat`` is the per-state, per-segment error budget: the absolute
    tolerance vector, or (w_hat + 1) * relative tolerance, depending on the
    refinement termination criterion.
    """

    xi_hat: np.ndarray
    norm: NormConfig
    lipschitz_x: float
    f_bound: float
    v_hat: float
    theta_hat: float
    delta: float

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi_hat, dtype=float))
        if np.any(xi < 0):
            raise ValueError("xi_hat entries must be non-negative")
        object.__setattr__(self, "xi_hat", xi)
        for label in ("lipschitz_x", "f_bound", "v_hat", "theta_hat"):
            if getattr(self, label) < 0:
                raise ValueError(f"{label} must be non-negative")
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    @property
    def induced(self) -> float:
        return induced_weight_norm(self.norm)

    def beta(self, n_segments: int) -> float:
        """|sum of xi_hat over the covering segments|_M + theta term."""
        return (weighted_norm(n_segments * self.xi_hat, self.norm)
                + self.induced * 2.0 * self.theta_hat)


def ball_radius(s: float, params: TighteningParams, xi_prefix: float) -> float:
    """Radius of the prediction-error ball a time s after the update.

    ``xi_prefix`` is |sum of the error budgets over the segments covering
    [0, s]|_M. The Gronwall envelope is clamped at delta because the event
    trigger guarantees an update before the error grows past it.
    """
    if s < 0:
        raise ValueError("prediction time must be non-negative")
    beta = xi_prefix + params.induced * 2.0 * params.theta_hat
    grow = (beta + params.induced * params.v_hat * s) * np.exp(params.lipschitz_x * s)
    return float(min(grow, params.delta))


def pontryagin_box_minus_ball(box: BoxSet, radius: float, norm: NormConfig) -> BoxSet:
    """Erode a box by a weighted-norm ball; infinite bounds are unchanged."""
    if radius < 0:
        raise ValueError("ball radius must be non-negative")
    extent = ball_axis_extent(radius, norm, box.dim)
    lo = np.where(np.isfinite(box.lower), box.lower + extent, box.lower)
    hi = np.where(np.isfinite(box.upper), box.upper - extent, box.upper)
    out = BoxSet(lo, hi)
    if out.empty:
        raise EmptySetError(
            f"box eroded by ball radius {radius} is empty "
            f"(violates the non-empty reduced-set assumption)")
    return out


def signed_distance(x, box: BoxSet, p: float = np.inf) -> float:
    """Signed p-norm distance to the box: negative inside, positive outside.

    For a box the nearest boundary point from the inside lies along a single
    axis, so the inside distance is the smallest face clearance in any
    p-norm; the outside distance is the p-norm of the componentwise
    violation.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != box.lower.shape:
        raise DimensionError(f"point has shape {x.shape}, expected {box.lower.shape}")
    violation = np.maximum(np.maximum(box.lower - x, x - box.upper), 0.0)
    if np.any(violation > 0):
        return unweighted_norm(violation, p)
    clear_lo = np.where(np.isfinite(box.lower), x - box.lower, np.inf)
    clear_hi = np.where(np.isfinite(box.upper), box.upper - x, np.inf)
    clearance = float(np.minimum(clear_lo, clear_hi).min())
    return -clearance


def growth_gap(params: TighteningParams, s_later: float, s_earlier: float,
               prefix_later: float, prefix_earlier: float) -> float:
    """g(later, earlier) = r(later) - r(earlier) >= 0 between ball radii."""
    g = ball_radius(s_later, params, prefix_later) - ball_radius(s_earlier, params, prefix_earlier)
    return max(g, 0.0)


def alpha_k(params: TighteningParams, seg_length: float,
            s_k: float, s_k1: float, prefix_k: float, prefix_k1: float) -> float:
    """Mesh-point margin |xi_hat| + L_f |T_k| + g(t_{k+1}, t_k)."""
    return (weighted_norm(params.xi_hat, params.norm)
            + params.f_bound * seg_length
            + growth_gap(params, s_k1, s_k, prefix_k1, prefix_k))


def upsilon(traj: PiecewiseTrajectory, k: int, params: TighteningParams,
            g: float, coords: Optional[np.ndarray] = None,
            n_samples: int = UPSILON_SAMPLES) -> float:
    """Inter-mesh-point excursion bound for segment k.

    Dense-sample maximum of |x~(s) - x~(t_k)| over the segment plus the ball
    growth ``g`` across it. Degree <= 3 polynomials are bounded well by the
    default 129 samples.

    The signed distance to a box depends only on coordinates with a finite
    bound and is 1-Lipschitz in their projection, so the refinement loop
    passes that coordinate mask via ``coords``; the default uses the full
    state, matching the generic convex-set bound.
    """
    a, b = traj.mesh.segment(k)
    ts = np.linspace(a, b, n_samples)
    xs = traj.eval_state(ts)
    disp = xs - traj.eval_state(np.array([a]))[0]
    w = params.norm.expand(disp.shape[1]).weights
    if coords is not None:
        disp = disp[:, coords]
        w = w[coords]
    if disp.shape[1] == 0:
        return float(g)
    if np.isinf(params.norm.p):
        norms = (np.abs(disp) * w).max(axis=1)
    else:
        norms = (w * np.abs(disp) ** params.norm.p).sum(axis=1) ** (1.0 / params.norm.p)
    return float(norms.max() + g)


@dataclass(frozen=True)
class TightenedBounds:
    """Per-mesh-point boxes produced by the two-stage tightening."""

    mesh: Mesh
    boxes: tuple
    radii: np.ndarray
    extra: np.ndarray

    def __len__(self):
        return len(self.boxes)

    def __getitem__(self, k):
        return self.boxes[k]


def segment_prefixes(mesh: Mesh, params: TighteningParams) -> np.ndarray:
    """|sum xi_hat over covering segments|_M at every mesh point (K entries)."""
    pts = mesh.mesh_points
    out = np.empty(pts.size)
    for k, t in enumerate(pts):
        count = covering_prefix(mesh, t).size
        out[k] = weighted_norm(count * params.xi_hat, params.norm)
    return out


def tightened_boxes_at_mesh_points(box: BoxSet, mesh: Mesh, params: TighteningParams,
                                   extra: Optional[np.ndarray] = None) -> TightenedBounds:
    """Erode the base box at every mesh point by ball(r(t_k)) + extra_k.

    ``extra`` holds the accumulated inter-mesh-point erosion radii from the
    iterative stage of the tightening algorithm (Minkowski sum of two balls
    in the same norm is the ball of the summed radius).
    """
    K = mesh.n_segments
    extra = np.zeros(K) if extra is None else np.asarray(extra, dtype=float)
    prefixes = segment_prefixes(mesh, params)
    rel = mesh.mesh_points - mesh.t0
    boxes = []
    radii = np.empty(K)
    for k in range(K):
        radii[k] = ball_radius(rel[k], params, prefixes[k]) + extra[k]
        try:
            boxes.append(pontryagin_box_minus_ball(box, radii[k], params.norm))
        except EmptySetError as exc:
            raise InfeasibleTighteningError(
                f"tightened box empty at mesh point {k} (t={mesh.mesh_points[k]:.6g})",
                point_index=k) from exc
    return TightenedBounds(mesh, tuple(boxes), radii, extra.copy())
