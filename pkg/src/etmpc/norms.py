"""Weighted p-norms and their induced constants.

A norm is configured by an exponent ``p`` in [1, inf] and a positive diagonal
weight vector ``M``:

    |x|_M = (sum_i M_i |x_i|^p)^(1/p)        for finite p,
    |x|_M = max_i M_i |x_i|                  for p = inf.

``induced_weight_norm`` returns the smallest constant c with
|x|_M <= c * |x|_p for all x (equality is achievable), which is what the
inter-update-time bounds use to convert unweighted noise bounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class NormConfig:
    """Weighted p-norm: exponent ``p`` in [1, inf] and diagonal weights ``weights``."""

    p: float = np.inf
    weights: np.ndarray = field(default_factory=lambda: np.array([1.0]))

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("norm weights must be positive and finite")
        if not (self.p >= 1):
            raise ValueError(f"norm exponent must satisfy p >= 1, got {self.p}")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def expand(self, n: int) -> "NormConfig":
        """Broadcast a scalar weight configuration to dimension ``n``."""
        if self.dim == n:
            return self
        if self.dim == 1:
            return NormConfig(self.p, np.full(n, self.weights[0]))
        raise DimensionError(f"norm weights have dim {self.dim}, expected {n}")


def weighted_norm(x, norm: NormConfig) -> float:
    """Evaluate |x|_M for the configured weighted p-norm."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cfg = norm.expand(x.shape[-1])
    if np.isinf(cfg.p):
        return float(np.max(cfg.weights * np.abs(x), axis=-1))
    return float(np.sum(cfg.weights * np.abs(x) ** cfg.p, axis=-1) ** (1.0 / cfg.p))


def unweighted_norm(x, p: float) -> float:
    """Plain p-norm |x|_p."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.isinf(p):
        return float(np.max(np.abs(x)))
    return float(np.sum(np.abs(x) ** p) ** (1.0 / p))


def induced_weight_norm(norm: NormConfig) -> float:
    """Smallest c with |x|_M <= c |x|_p for all x.

    For finite p this is max_i M_i^(1/p); for p = inf it is max_i M_i.
    """
    m = float(np.max(norm.weights))
    if np.isinf(norm.p):
        return m
    return m ** (1.0 / norm.p)


def ball_axis_extent(radius: float, norm: NormConfig, n: int) -> np.ndarray:
    """Per-axis extent max{|x_i| : |x|_M <= radius} of the weighted-p ball."""
    cfg = norm.expand(n)
    if radius < 0:
        raise ValueError("ball radius must be non-negative")
    if np.isinf(cfg.p):
        return radius / cfg.weights
    return radius / cfg.weights ** (1.0 / cfg.p)


def induced_matrix_norm(a: np.ndarray, p: float) -> float:
    """Induced (operator) p-norm of a matrix, for p in {1, 2, inf}."""
    a = np.asarray(a, dtype=float)
    if p == 1:
        return float(np.abs(a).sum(axis=0).max())
    if p == 2:
        return float(np.linalg.norm(a, 2))
    if np.isinf(p):
        return float(np.abs(a).sum(axis=1).max())
    raise ValueError(f"induced matrix norm only available for p in {{1, 2, inf}}, got {p}")


def sample_in_pball(rng: np.random.Generator, n: int, p: float, radius: float) -> np.ndarray:
    """Draw one point uniformly from the unweighted p-ball of given radius.

    Uses the generalized-normal construction: for finite p, components drawn
    from exp(-|t|^p) with signs, scaled by U^(1/n) / |g|_p; for p = inf the
    components are independent uniforms.
    """
    if radius == 0.0:
        return np.zeros(n)
    if np.isinf(p):
        return rng.uniform(-radius, radius, size=n)
    g = rng.gamma(1.0 / p, 1.0, size=n) ** (1.0 / p)
    g *= rng.choice([-1.0, 1.0], size=n)
    u = rng.uniform() ** (1.0 / n)
    return radius * u * g / unweighted_norm(g, p)
