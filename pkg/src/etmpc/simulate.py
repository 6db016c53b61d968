"""Ground-truth plant integration and bounded noise generation.

The plant integrates dx/dt = f(t, x, u(t)) + v(t) with an adaptive
embedded Runge-Kutta 4(5) pair at tight tolerances and dense output on a
fixed millisecond grid; closed-loop cost accumulates as an extra quadrature
state so reported costs are plant quantities, not transcription quadratures.
Disturbance and measurement noise are piecewise-constant on a coarser grid,
drawn uniformly from the unweighted p-norm ball of the configured bound and
fully reproducible per seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationFailure
from .models import DynamicsModel, NoiseBounds
from .norms import sample_in_pball

OUTPUT_GRID = 1e-3      # dense output resolution, seconds
NOISE_GRID = 1e-2       # piecewise-constant noise resolution, seconds
RTOL = 1e-9
ATOL = 1e-12


class NoiseSource:
    """Piecewise-constant bounded noise, deterministic per seed.

    Samples are drawn uniformly from the p-ball of radius ``bound`` on a
    fixed grid anchored at t = 0, so restarting the integration mid-run
    reproduces the same realization.
    """

    def __init__(self, dim: int, bound: float, p: float = np.inf, seed: int = 0,
                 kind: str = "uniform", direction=None, grid: float = NOISE_GRID):
        self.dim = dim
        self.bound = float(bound)
        self.p = p
        self.seed = seed
        self.kind = kind
        self.grid = grid
        self.direction = None if direction is None else np.asarray(direction, dtype=float)
        if kind == "constant" and self.direction is None:
            raise ValueError("constant noise needs a direction vector")
        self._cache: dict[int, np.ndarray] = {}

    def __call__(self, t: float) -> np.ndarray:
        if self.bound == 0.0 and self.kind != "constant":
            return np.zeros(self.dim)
        if self.kind == "constant":
            return self.direction
        idx = int(np.floor(t / self.grid + 1e-12))
        sample = self._cache.get(idx)
        if sample is None:
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, max(idx, 0)]))
            sample = sample_in_pball(rng, self.dim, self.p, self.bound)
            self._cache[idx] = sample
        return sample

    def grid_points(self, t0: float, t1: float) -> np.ndarray:
        """Noise switching times inside (t0, t1); integration splits there."""
        first = np.ceil(t0 / self.grid + 1e-9)
        last = np.floor(t1 / self.grid - 1e-9)
        if last < first:
            return np.zeros(0)
        return np.arange(first, last + 1) * self.grid


@dataclass
class PlantTrace:
    """Dense plant trajectory on the fixed output grid."""

    ts: np.ndarray
    xs: np.ndarray
    cost: np.ndarray
    final_state: np.ndarray
    final_cost: float


@dataclass
class PlantSimulator:
    """Plant wrapper: nominal model plus noise sources and cost integrand."""

    model: DynamicsModel
    disturbance: Optional[NoiseSource] = None
    measurement: Optional[NoiseSource] = None
    stage_cost: Optional[Callable] = None   # L(x, u, t)
    rtol: float = RTOL
    atol: float = ATOL

    def measure(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.measurement is None:
            return x.copy()
        return x + self.measurement(t)


def integrate_plant(sim: PlantSimulator, x0, input_fn, t_span,
                    cost0: float = 0.0, grid: float = OUTPUT_GRID) -> PlantTrace:
    """Integrate the plant over t_span with dense output.

    ``input_fn(t) -> u`` supplies the applied input (ignored for autonomous
    models). Integration restarts at noise switching times so the
    piecewise-constant disturbance is resolved exactly.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError(f"bad time span {t_span}")
    x0 = np.asarray(x0, dtype=float)
    n = sim.model.state_dim
    m = sim.model.input_dim
    track_cost = sim.stage_cost is not None

    def u_of(t):
        if m == 0:
            return np.zeros(0)
        return np.asarray(input_fn(t), dtype=float)

    def rhs(t, y):
        x = y[:n]
        u = u_of(t)
        dx = sim.model.f(t, x, u)
        if sim.disturbance is not None:
            dx = dx + sim.disturbance(t)
        if track_cost:
            return np.concatenate([dx, [sim.stage_cost(x, u, t)]])
        return dx

    y0 = np.concatenate([x0, [cost0]]) if track_cost else x0
    # Dense output grid; segment breaks at noise switches.
    ts_out = np.arange(t0, t1 + 0.5 * grid, grid)
    ts_out[-1] = min(ts_out[-1], t1)
    breaks = [t0, t1]
    if sim.disturbance is not None and sim.disturbance.kind != "constant":
        breaks = np.concatenate([[t0], sim.disturbance.grid_points(t0, t1), [t1]])
    else:
        breaks = np.array([t0, t1])

    xs_out = np.empty((ts_out.size, n))
    cost_out = np.zeros(ts_out.size)
    y = y0
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b - a <= 1e-12:
            continue
        mask = (ts_out >= a - 1e-12) & (ts_out <= b + 1e-12)
        sol = solve_ivp(rhs, (a, b), y, method="RK45", rtol=sim.rtol, atol=sim.atol,
                        dense_output=True, max_step=b - a)
        if not sol.success:
            raise IntegrationFailure(
                f"plant integration failed at t={sol.t[-1]:.6g}: {sol.message}",
                last_time=float(sol.t[-1]))
        if mask.any():
            yy = sol.sol(np.clip(ts_out[mask], a, b)).T
            xs_out[mask] = yy[:, :n]
            if track_cost:
                cost_out[mask] = yy[:, n]
        y = sol.y[:, -1]
    final_cost = float(y[n]) if track_cost else 0.0
    return PlantTrace(ts_out, xs_out, cost_out, y[:n].copy(), final_cost)
