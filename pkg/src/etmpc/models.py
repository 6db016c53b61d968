"""Plant/prediction dynamics models and the two built-in systems.

A :class:`DynamicsModel` wraps the nominal vector field f(t, x, u) together
with the constants the triggering and tightening bounds consume: a Lipschitz
constant ``lipschitz_x`` in the state argument and a magnitude bound
``f_bound``, both declared over a documented operating box. Both built-ins
ship analytic Jacobians and vectorized batch evaluation; user models may
register plain callables and fall back to finite differences.

Models are immutable after construction and evaluation is pure, so they are
safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import DimensionError
from .norms import induced_matrix_norm, unweighted_norm


@dataclass(frozen=True)
class NoiseBounds:
    """Norm bounds on the process disturbance and measurement noise."""

    v_hat: float = 0.0
    theta_hat: float = 0.0

    def __post_init__(self):
        for label, v in (("v_hat", self.v_hat), ("theta_hat", self.theta_hat)):
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{label} must be finite and non-negative, got {v}")


@dataclass(frozen=True)
class OperatingBox:
    """Region over which the model's constants are declared and validated."""

    state_radius: np.ndarray
    input_radius: np.ndarray

    def sample_state(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-self.state_radius, self.state_radius)

    def sample_input(self, rng: np.random.Generator) -> np.ndarray:
        if self.input_radius.size == 0:
            return np.zeros(0)
        return rng.uniform(-self.input_radius, self.input_radius)


@dataclass(frozen=True)
class DynamicsModel:
    """Nominal dynamics f(t, x, u) with declared Lipschitz and magnitude bounds."""

    name: str
    state_dim: int
    input_dim: int
    f: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    lipschitz_x: float
    f_bound: float
    operating_box: OperatingBox
    f_batch: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None
    jac_x: Optional[Callable[[float, np.ndarray, np.ndarray], np.ndarray]] = None
    jac_u: Optional[Callable[[float, np.ndarray, np.ndarray], np.ndarray]] = None
    jacs_batch: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], tuple]] = None
    default_noise: NoiseBounds = field(default_factory=NoiseBounds)
    extras: dict = field(default_factory=dict)

    @property
    def autonomous(self) -> bool:
        return self.input_dim == 0

    def rates_batch(self, ts: np.ndarray, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        """Vectorized f over sample batches; falls back to a Python loop."""
        if self.f_batch is not None:
            return self.f_batch(ts, xs, us)
        return np.stack([self.f(t, x, u) for t, x, u in zip(ts, xs, us)])

    def jacobians(self, t: float, x: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(df/dx, df/du); analytic when supplied, else central differences."""
        if self.jac_x is not None and self.jac_u is not None:
            return self.jac_x(t, x, u), self.jac_u(t, x, u)
        return _fd_jacobian(self.f, t, x, u)

    def jacobians_batch(self, ts: np.ndarray, xs: np.ndarray, us: np.ndarray):
        """Stacked (N, n, n) and (N, n, m) Jacobians over sample batches."""
        if self.jacs_batch is not None:
            return self.jacs_batch(ts, xs, us)
        pairs = [self.jacobians(t, x, u) for t, x, u in zip(ts, xs, us)]
        return (np.stack([p[0] for p in pairs]),
                np.stack([p[1] for p in pairs]))


def eval_dynamics(model: DynamicsModel, t: float, x, u=()) -> np.ndarray:
    """Evaluate the nominal f(t, x, u); no noise is added."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float)) if len(np.atleast_1d(u)) else np.zeros(0)
    if x.shape != (model.state_dim,):
        raise DimensionError(f"state has shape {x.shape}, expected ({model.state_dim},)")
    if u.shape != (model.input_dim,):
        raise DimensionError(f"input has shape {u.shape}, expected ({model.input_dim},)")
    return np.asarray(model.f(t, x, u), dtype=float)


def _fd_jacobian(f, t, x, u, rel_step=1e-6):
    n, m = x.size, u.size
    fx = np.empty((n, n))
    fu = np.empty((n, m))
    for i in range(n):
        h = rel_step * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fx[:, i] = (f(t, xp, u) - f(t, xm, u)) / (2 * h)
    for j in range(m):
        h = rel_step * (1.0 + abs(u[j]))
        up, um = u.copy(), u.copy()
        up[j] += h
        um[j] -= h
        fu[:, j] = (f(t, x, up) - f(t, x, um)) / (2 * h)
    return fx, fu


# ---------------------------------------------------------------------------
# Built-in: 2-state LTI system with constant-direction disturbance


LINEAR_A = np.array([[0.05, 0.5], [0.0, -0.5]])
LINEAR_E = np.array([1.0, 1.0])
LINEAR_W_HAT = 0.01


def builtin_linear_model(p: float = np.inf) -> DynamicsModel:
    """The autonomous 2-state LTI benchmark system.

    The nominal field is f(x) = A x; the disturbance enters the plant as the
    constant E * w_hat, whose p-norm is the recommended ``v_hat``. The
    Lipschitz constant is the induced matrix p-norm of A, so it depends on
    the configured vector norm (p in {1, 2, inf}).
    """
    a = LINEAR_A

    def f(t, x, u):
        return a @ x

    def f_batch(ts, xs, us):
        return xs @ a.T

    def jac_x(t, x, u):
        return a

    def jac_u(t, x, u):
        return np.zeros((2, 0))

    def jacs_batch(ts, xs, us):
        N = len(ts)
        return np.broadcast_to(a, (N, 2, 2)).copy(), np.zeros((N, 2, 0))

    box = OperatingBox(state_radius=np.full(2, 30.0), input_radius=np.zeros(0))
    lip = induced_matrix_norm(a, p)
    return DynamicsModel(
        name="linear2d",
        state_dim=2,
        input_dim=0,
        f=f,
        f_batch=f_batch,
        jac_x=jac_x,
        jac_u=jac_u,
        jacs_batch=jacs_batch,
        lipschitz_x=lip,
        f_bound=lip * 30.0,
        operating_box=box,
        default_noise=NoiseBounds(v_hat=unweighted_norm(LINEAR_E * LINEAR_W_HAT, p)),
        extras={"A": a, "E": LINEAR_E, "w_hat": LINEAR_W_HAT, "norm_p": p},
    )


# ---------------------------------------------------------------------------
# Built-in: two-link robotic arm

# Reported Lipschitz estimate for the arm; the paper's standard estimation
# method and norm are not tied to a specific region, so the constant is kept
# as published and validated by sampling over the operating box below.
ARM_LIPSCHITZ = 4.5309

# Operating box for empirical validation of the declared constants. The
# closed-loop regulation task stays well inside it. The theta-derivative of
# the arm field grows with |u|, so the published Lipschitz constant only
# holds with torques well below the raw actuator range; sampled pairwise
# ratios over this box stay near 3.1 against the stored 4.5309.
ARM_STATE_RADIUS = np.array([0.5, 0.5, 1.6, 2.0])
ARM_INPUT_RADIUS = np.array([0.5, 0.5])

# 1-norm bound on f over the operating box (sampled estimate 7.95 + margin).
ARM_F_BOUND = 8.5

_D0 = 31.0 / 36.0


def _arm_f(t, x, u):
    return kernels.arm_rates(x[None, :], u[None, :])[0]


def _arm_f_batch(ts, xs, us):
    return kernels.arm_rates(xs, us)


def _arm_jac_x(t, x, u):
    w_a, w_b, th = x[0], x[1], x[2]
    u1, u2 = u[0], u[1]
    s, c = np.sin(th), np.cos(th)
    den = _D0 + 2.25 * s * s
    dden = 4.5 * s * c
    n1 = 2.25 * s * c * w_a**2 + 2.0 * w_b**2 + (4.0 / 3.0) * u1 - (4.0 / 3.0) * u2 - 1.5 * c * u2
    n2 = 2.25 * s * c * w_b**2 + 3.5 * w_a**2 - (7.0 / 3.0) * u2 + 1.5 * c * (u1 - u2)
    dn1_dth = 2.25 * (c * c - s * s) * w_a**2 + 1.5 * s * u2
    dn2_dth = 2.25 * (c * c - s * s) * w_b**2 - 1.5 * s * (u1 - u2)
    jac = np.zeros((4, 4))
    jac[0, 0] = 4.5 * s * c * w_a / den
    jac[0, 1] = 4.0 * w_b / den
    jac[0, 2] = (dn1_dth * den - n1 * dden) / den**2
    jac[1, 0] = 7.0 * w_a / den
    jac[1, 1] = 4.5 * s * c * w_b / den
    jac[1, 2] = (dn2_dth * den - n2 * dden) / den**2
    jac[2, 0] = 1.0
    jac[2, 1] = -1.0
    jac[3, 1] = 1.0
    return jac


def _arm_jac_u(t, x, u):
    th = x[2]
    c = np.cos(th)
    den = _D0 + 2.25 * np.sin(th) ** 2
    jac = np.zeros((4, 2))
    jac[0, 0] = (4.0 / 3.0) / den
    jac[0, 1] = (-4.0 / 3.0 - 1.5 * c) / den
    jac[1, 0] = 1.5 * c / den
    jac[1, 1] = (-7.0 / 3.0 - 1.5 * c) / den
    return jac


def _arm_jacs_batch(ts, xs, us):
    xs = np.asarray(xs, dtype=float)
    us = np.asarray(us, dtype=float)
    w_a, w_b, th = xs[:, 0], xs[:, 1], xs[:, 2]
    u1, u2 = us[:, 0], us[:, 1]
    s, c = np.sin(th), np.cos(th)
    den = _D0 + 2.25 * s * s
    dden = 4.5 * s * c
    n1 = 2.25 * s * c * w_a**2 + 2.0 * w_b**2 + (4.0 / 3.0) * u1 - (4.0 / 3.0) * u2 - 1.5 * c * u2
    n2 = 2.25 * s * c * w_b**2 + 3.5 * w_a**2 - (7.0 / 3.0) * u2 + 1.5 * c * (u1 - u2)
    dn1 = 2.25 * (c * c - s * s) * w_a**2 + 1.5 * s * u2
    dn2 = 2.25 * (c * c - s * s) * w_b**2 - 1.5 * s * (u1 - u2)
    N = xs.shape[0]
    jx = np.zeros((N, 4, 4))
    jx[:, 0, 0] = 4.5 * s * c * w_a / den
    jx[:, 0, 1] = 4.0 * w_b / den
    jx[:, 0, 2] = (dn1 * den - n1 * dden) / den**2
    jx[:, 1, 0] = 7.0 * w_a / den
    jx[:, 1, 1] = 4.5 * s * c * w_b / den
    jx[:, 1, 2] = (dn2 * den - n2 * dden) / den**2
    jx[:, 2, 0] = 1.0
    jx[:, 2, 1] = -1.0
    jx[:, 3, 1] = 1.0
    ju = np.zeros((N, 4, 2))
    ju[:, 0, 0] = (4.0 / 3.0) / den
    ju[:, 0, 1] = (-4.0 / 3.0 - 1.5 * c) / den
    ju[:, 1, 0] = 1.5 * c / den
    ju[:, 1, 1] = (-7.0 / 3.0 - 1.5 * c) / den
    return jx, ju


def builtin_two_link_arm() -> DynamicsModel:
    """Two-link robotic arm: state [w_a, w_b, theta, beta], two torque inputs."""
    return DynamicsModel(
        name="two_link_arm",
        state_dim=4,
        input_dim=2,
        f=_arm_f,
        f_batch=_arm_f_batch,
        jac_x=_arm_jac_x,
        jac_u=_arm_jac_u,
        jacs_batch=_arm_jacs_batch,
        lipschitz_x=ARM_LIPSCHITZ,
        f_bound=ARM_F_BOUND,
        operating_box=OperatingBox(ARM_STATE_RADIUS, ARM_INPUT_RADIUS),
        default_noise=NoiseBounds(v_hat=5e-3),
    )


# ---------------------------------------------------------------------------
# Registry for config-file model selection

_REGISTRY: dict[str, Callable[..., DynamicsModel]] = {
    "linear2d": builtin_linear_model,
    "two_link_arm": lambda p=np.inf: builtin_two_link_arm(),
}


def register_model(name: str, factory: Callable[..., DynamicsModel]) -> None:
    """Register a custom model factory for config-file selection by name."""
    _REGISTRY[name] = factory


def make_model(name: str, p: float = np.inf) -> DynamicsModel:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown model '{name}'; registered: {sorted(_REGISTRY)}") from None
    return factory(p=p)


def sampled_lipschitz_ratio(model: DynamicsModel, n_pairs: int = 10_000, seed: int = 0,
                            p: float = 2.0) -> float:
    """Largest |f(x1)-f(x2)| / |x1-x2| ratio over random pairs in the operating box."""
    rng = np.random.default_rng(seed)
    box = model.operating_box
    worst = 0.0
    for _ in range(n_pairs):
        x1, x2 = box.sample_state(rng), box.sample_state(rng)
        u = box.sample_input(rng)
        dx = unweighted_norm(x1 - x2, p)
        if dx < 1e-12:
            continue
        df = unweighted_norm(model.f(0.0, x1, u) - model.f(0.0, x2, u), p)
        worst = max(worst, df / dx)
    return worst
