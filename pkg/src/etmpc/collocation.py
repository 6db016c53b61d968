"""Piecewise-polynomial trajectories, collocation schemes and error certificates.

Three h-method transcriptions are supported:

* ``FE``          - piecewise-linear state, piecewise-constant input,
                    collocated at segment left endpoints;
* ``TRAPEZOIDAL`` - quadratic state / linear input, collocated at both
                    endpoints;
* ``HS``          - Hermite-Simpson: cubic state / quadratic input,
                    collocated at endpoints and midpoint.

States are continuous across mesh points; inputs need not be, and at an
interior mesh point evaluation takes the right segment's polynomial.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List

import numpy as np

from . import kernels
from .errors import DimensionError
from .mesh import Mesh
from .models import DynamicsModel
from .norms import unweighted_norm
from .quadrature import integrate_abs

CONTINUITY_TOL = 1e-10


class Scheme(enum.Enum):
    FE = "fe"
    TRAPEZOIDAL = "trapezoidal"
    HS = "hs"

    @property
    def state_degree(self) -> int:
        return {Scheme.FE: 1, Scheme.TRAPEZOIDAL: 2, Scheme.HS: 3}[self]

    @property
    def input_degree(self) -> int:
        return {Scheme.FE: 0, Scheme.TRAPEZOIDAL: 1, Scheme.HS: 2}[self]


def collocation_points(scheme: Scheme, segment: tuple[float, float]) -> List[float]:
    """Times in a segment where the ODE is enforced exactly."""
    a, b = segment
    if not b > a:
        raise ValueError(f"bad segment {segment}")
    if scheme is Scheme.FE:
        return [a]
    if scheme is Scheme.TRAPEZOIDAL:
        return [a, b]
    return [a, 0.5 * (a + b), b]


@dataclass(frozen=True)
class PiecewiseTrajectory:
    """Polynomial state/input trajectory on a mesh.

    ``state_coeffs`` is (K, n, d+1) in ascending powers of local time
    s = t - tau_k; ``input_coeffs`` is (K, m, d_u+1).
    """

    mesh: Mesh
    scheme: Scheme
    state_coeffs: np.ndarray
    input_coeffs: np.ndarray

    @property
    def state_dim(self) -> int:
        return self.state_coeffs.shape[1]

    @property
    def input_dim(self) -> int:
        return self.input_coeffs.shape[1]

    def _check_domain(self, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if ts.min() < self.mesh.t0 - 1e-9 or ts.max() > self.mesh.tf + 1e-9:
            raise ValueError(
                f"time outside trajectory horizon [{self.mesh.t0}, {self.mesh.tf}]")
        return ts

    def eval_state(self, t):
        ts = self._check_domain(t)
        out = kernels.poly_eval(self.state_coeffs, self.mesh.points, ts)
        return out[0] if np.isscalar(t) else out

    def eval_state_derivative(self, t):
        ts = self._check_domain(t)
        out = kernels.poly_eval(self.state_coeffs, self.mesh.points, ts, 1)
        return out[0] if np.isscalar(t) else out

    def eval_input(self, t):
        ts = self._check_domain(t)
        out = kernels.poly_eval(self.input_coeffs, self.mesh.points, ts)
        return out[0] if np.isscalar(t) else out

    def node_states(self) -> np.ndarray:
        """State values at all mesh nodes including tf; (K+1, n)."""
        vals = kernels.poly_eval(self.state_coeffs, self.mesh.points, self.mesh.points)
        return vals

    def continuity_defect(self) -> float:
        """Largest jump of the state across interior mesh points."""
        K = self.mesh.n_segments
        if K == 1:
            return 0.0
        lengths = self.mesh.lengths[:-1]
        right_vals = np.stack([
            _poly_val(self.state_coeffs[k], lengths[k]) for k in range(K - 1)
        ])
        left_vals = self.state_coeffs[1:, :, 0]
        return float(np.abs(right_vals - left_vals).max())


def _poly_val(coeffs: np.ndarray, s: float) -> np.ndarray:
    out = coeffs[:, -1].copy()
    for j in range(coeffs.shape[1] - 2, -1, -1):
        out = out * s + coeffs[:, j]
    return out


# ---------------------------------------------------------------------------
# Builders from node data (used by the transcription and for warm starts)


def trajectory_from_nodes(mesh: Mesh, scheme: Scheme, model: DynamicsModel,
                          node_states: np.ndarray, node_inputs: np.ndarray,
                          mid_inputs: np.ndarray | None = None) -> PiecewiseTrajectory:
    """Assemble the scheme's polynomials from node values.

    ``node_inputs`` has K rows for FE (left endpoints) and K+1 rows for the
    other schemes; HS additionally takes K midpoint inputs.
    """
    K, n, m = mesh.n_segments, model.state_dim, model.input_dim
    node_states = np.asarray(node_states, dtype=float).reshape(K + 1, n)
    lengths = mesh.lengths
    ts = mesh.points

    if scheme is Scheme.FE:
        node_inputs = np.asarray(node_inputs, dtype=float).reshape(K, m)
        rates = model.rates_batch(ts[:-1], node_states[:-1], node_inputs)
        sc = np.zeros((K, n, 2))
        sc[:, :, 0] = node_states[:-1]
        sc[:, :, 1] = rates
        ic = node_inputs[:, :, None].copy()
        return PiecewiseTrajectory(mesh, scheme, sc, ic)

    node_inputs = np.asarray(node_inputs, dtype=float).reshape(K + 1, m)
    rates = model.rates_batch(ts, node_states, node_inputs)
    f0, f1 = rates[:-1], rates[1:]
    x0, x1 = node_states[:-1], node_states[1:]
    h = lengths[:, None]

    if scheme is Scheme.TRAPEZOIDAL:
        sc = np.zeros((K, n, 3))
        sc[:, :, 0] = x0
        sc[:, :, 1] = f0
        sc[:, :, 2] = (f1 - f0) / (2 * h)
        ic = np.zeros((K, m, 2))
        ic[:, :, 0] = node_inputs[:-1]
        ic[:, :, 1] = (node_inputs[1:] - node_inputs[:-1]) / h
        return PiecewiseTrajectory(mesh, scheme, sc, ic)

    if scheme is Scheme.HS:
        if mid_inputs is None:
            raise ValueError("HS trajectories need midpoint inputs")
        mid_inputs = np.asarray(mid_inputs, dtype=float).reshape(K, m)
        sc = np.zeros((K, n, 4))
        dx = x1 - x0
        sc[:, :, 0] = x0
        sc[:, :, 1] = f0
        sc[:, :, 2] = 3 * dx / h**2 - (2 * f0 + f1) / h
        sc[:, :, 3] = -2 * dx / h**3 + (f0 + f1) / h**2
        ic = np.zeros((K, m, 3))
        u0, u1 = node_inputs[:-1], node_inputs[1:]
        ic[:, :, 0] = u0
        ic[:, :, 1] = (-3 * u0 + 4 * mid_inputs - u1) / h
        ic[:, :, 2] = (2 * u0 - 4 * mid_inputs + 2 * u1) / h**2
        return PiecewiseTrajectory(mesh, scheme, sc, ic)

    raise ValueError(f"unknown scheme {scheme}")


# ---------------------------------------------------------------------------
# Local error, quadratures, certificates


def residual_batch(traj: PiecewiseTrajectory, model: DynamicsModel, ts: np.ndarray) -> np.ndarray:
    """ODE residual d/dt x~(t) - f(t, x~(t), u(t)) at sample times; (N, n)."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    xs = kernels.poly_eval(traj.state_coeffs, traj.mesh.points, ts)
    dxs = kernels.poly_eval(traj.state_coeffs, traj.mesh.points, ts, 1)
    us = kernels.poly_eval(traj.input_coeffs, traj.mesh.points, ts)
    return dxs - model.rates_batch(ts, xs, us)


def local_error(traj: PiecewiseTrajectory, model: DynamicsModel, t: float) -> np.ndarray:
    """Absolute local error vector at one time."""
    if model.state_dim != traj.state_dim:
        raise DimensionError("trajectory/model state dimensions differ")
    return residual_batch(traj, model, np.array([t]))[0]


def quadrature(traj: PiecewiseTrajectory, model: DynamicsModel, k: int,
               rtol: float = 1e-8, atol: float = 1e-12) -> np.ndarray:
    """Per-state integral of |local error| over segment k."""
    a, b = traj.mesh.segment(k)
    val, _ = integrate_abs(lambda ts: residual_batch(traj, model, ts), a, b,
                           rtol=rtol, atol=atol)
    return val


def scaling_weights(traj: PiecewiseTrajectory) -> np.ndarray:
    """w_i = max over mesh points of max(|x~_i|, |d/dt x~_i|).

    Mesh points are the segment left endpoints; derivatives there follow the
    right-segment convention.
    """
    pts = traj.mesh.mesh_points
    xs = kernels.poly_eval(traj.state_coeffs, traj.mesh.points, pts)
    dxs = kernels.poly_eval(traj.state_coeffs, traj.mesh.points, pts, 1)
    return np.maximum(np.abs(xs), np.abs(dxs)).max(axis=0)


@dataclass(frozen=True)
class ErrorCertificate:
    """Per-segment, per-state error quadratures of a collocation solution."""

    mesh: Mesh
    scheme: Scheme
    eta: np.ndarray      # (K, n) absolute quadratures
    weights: np.ndarray  # (n,) scaling weights
    eps_rel: np.ndarray  # (K, n) relative quadratures eta / (w + 1)

    @property
    def collocation_points(self) -> List[List[float]]:
        return [collocation_points(self.scheme, self.mesh.segment(k))
                for k in range(self.mesh.n_segments)]

    def max_eta(self) -> float:
        return float(self.eta.max())

    def as_relative_certificate(self) -> "ErrorCertificate":
        """View with eta replaced by the relative errors (weights zeroed).

        Feeding this view to an absolute-mode bound evaluates the raw
        relative-sum variant of the quadrature-triggering condition.
        """
        return ErrorCertificate(self.mesh, self.scheme, self.eps_rel.copy(),
                                np.zeros_like(self.weights), self.eps_rel.copy())


def certify(traj: PiecewiseTrajectory, model: DynamicsModel,
            rtol: float = 1e-8, atol: float = 1e-12) -> ErrorCertificate:
    """Compute the full error certificate of a trajectory."""
    K = traj.mesh.n_segments
    eta = np.empty((K, traj.state_dim))
    for k in range(K):
        eta[k] = quadrature(traj, model, k, rtol=rtol, atol=atol)
    w = scaling_weights(traj)
    return ErrorCertificate(traj.mesh, traj.scheme, eta, w, eta / (w + 1.0))


def max_relative_error(cert: ErrorCertificate) -> np.ndarray:
    """Per-segment maximum over states of the relative quadrature."""
    return cert.eps_rel.max(axis=1)


# 65 Chebyshev sample points and 5% inflation bound the derivative of
# degree <= 3 polynomials safely.
_CHEB = 0.5 * (1.0 + np.cos(np.pi * np.arange(65)[::-1] / 64))
POLY_LIPSCHITZ_INFLATION = 1.05


def segment_poly_lipschitz(traj: PiecewiseTrajectory, k: int, p: float = 2.0) -> float:
    """Lipschitz constant of the state polynomial on segment k.

    Max p-norm of the state derivative over 65 Chebyshev points, inflated 5%.
    Evaluates segment k's own polynomial so the right endpoint does not leak
    into the next segment.
    """
    a, b = traj.mesh.segment(k)
    coeffs = traj.state_coeffs[k]  # (n, d+1)
    d = coeffs.shape[1] - 1
    if d == 0:
        return 0.0
    dcoeffs = coeffs[:, 1:] * np.arange(1, d + 1)
    ss = (b - a) * _CHEB
    vals = dcoeffs[:, -1][:, None] * np.ones_like(ss)
    for j in range(dcoeffs.shape[1] - 2, -1, -1):
        vals = vals * ss + dcoeffs[:, j][:, None]
    if np.isinf(p):
        norms = np.abs(vals).max(axis=0)
    else:
        norms = (np.abs(vals) ** p).sum(axis=0) ** (1.0 / p)
    return float(norms.max() * POLY_LIPSCHITZ_INFLATION)
