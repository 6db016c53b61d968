"""Run configuration: schema, defaults and JSON loading.

The JSON schema mirrors :class:`RunConfig` field names; unknown keys and
malformed values raise :class:`~etmpc.errors.ConfigError`, which the CLI
maps to exit code 2.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .collocation import Scheme
from .errors import ConfigError
from .norms import NormConfig
from .solver import SolverSettings
from .triggering import ToleranceMode

TRIGGER_MODES = ("etc", "stc_qet")
TERMINAL_KINDS = ("penalty", "equality", "none")
NOISE_KINDS = ("uniform", "constant")


@dataclass(frozen=True)
class RunConfig:
    """Complete description of one experiment run."""

    model: str = "two_link_arm"
    scheme: Scheme = Scheme.TRAPEZOIDAL
    horizon: float = 4.0
    sim_time: float = 8.0
    initial_state: Optional[np.ndarray] = None
    tolerance_mode: ToleranceMode = ToleranceMode.ABSOLUTE
    tolerance: np.ndarray = field(default_factory=lambda: np.array([1e-3]))
    delta: float = 7e-3
    norm: NormConfig = field(default_factory=lambda: NormConfig(p=1))
    v_hat: Optional[float] = None        # None: model default
    theta_hat: float = 0.0
    noise_kind: str = "uniform"
    noise_direction: Optional[np.ndarray] = None
    noise_grid: float = 1e-2
    trigger_mode: str = "stc_qet"
    solver: SolverSettings = field(default_factory=SolverSettings)
    mesh_segments: int = 8
    state_lower: Optional[np.ndarray] = None
    state_upper: Optional[np.ndarray] = None
    input_lower: Optional[np.ndarray] = None
    input_upper: Optional[np.ndarray] = None
    terminal: str = "penalty"
    terminal_weight: float = 200.0
    monitor_dt: float = 1e-3
    refine_max_iterations: int = 15
    max_updates: int = 200
    seed: int = 0
    out_dir: Optional[str] = None
    # Per-scheme trigger thresholds for the open-loop comparison experiment.
    open_loop_deltas: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trigger_mode not in TRIGGER_MODES:
            raise ConfigError(f"trigger_mode must be one of {TRIGGER_MODES}")
        if self.terminal not in TERMINAL_KINDS:
            raise ConfigError(f"terminal must be one of {TERMINAL_KINDS}")
        if self.noise_kind not in NOISE_KINDS:
            raise ConfigError(f"noise_kind must be one of {NOISE_KINDS}")
        if not self.horizon > 0 or not self.sim_time > 0:
            raise ConfigError("horizon and sim_time must be positive")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if self.mesh_segments < 1:
            raise ConfigError("mesh_segments must be >= 1")

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)


def arm_default_config(**overrides) -> RunConfig:
    """Closed-loop two-link-arm benchmark configuration.

    The plant papers over a 4 s receding horizon with the energy objective,
    the angular-rate box on the first joint and a terminal penalty steering
    the window toward the origin; the initial joint angle of 0.9 rad keeps
    the swing inside the reachable set of the constrained joint.
    """
    base = RunConfig(
        model="two_link_arm",
        scheme=Scheme.TRAPEZOIDAL,
        horizon=4.0,
        sim_time=8.0,
        initial_state=np.array([0.0, 0.0, 0.9, 0.0]),
        tolerance_mode=ToleranceMode.ABSOLUTE,
        tolerance=np.array([1e-3, 1e-3, 1e-3, 1e-3]),
        delta=7e-3,
        norm=NormConfig(p=1, weights=np.ones(4)),
        v_hat=5e-3,
        theta_hat=0.0,
        trigger_mode="stc_qet",
        mesh_segments=8,
        state_lower=np.array([-0.3, -np.inf, -np.inf, -np.inf]),
        state_upper=np.array([0.3, np.inf, np.inf, np.inf]),
        terminal="penalty",
        terminal_weight=200.0,
    )
    return base.with_overrides(**overrides) if overrides else base


def linear_default_config(**overrides) -> RunConfig:
    """Open-loop LTI benchmark configuration (forward-Euler vs Hermite-Simpson)."""
    base = RunConfig(
        model="linear2d",
        scheme=Scheme.FE,
        horizon=6.0,
        sim_time=6.0,
        initial_state=np.array([10.0, 10.0]),
        tolerance_mode=ToleranceMode.ABSOLUTE,
        tolerance=np.array([0.1, 0.1]),
        delta=5.0,
        norm=NormConfig(p=np.inf, weights=np.ones(2)),
        theta_hat=0.0,
        noise_kind="constant",
        trigger_mode="etc",
        mesh_segments=4,
        terminal="none",
        open_loop_deltas={"fe": 5.0, "hs": 0.5},
    )
    return base.with_overrides(**overrides) if overrides else base


_DEFAULTS = {"two_link_arm": arm_default_config, "linear2d": linear_default_config}


def _parse_array(value, name):
    try:
        return np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field '{name}' must be a numeric array") from exc


def config_from_dict(data: dict) -> RunConfig:
    """Build a RunConfig from a JSON-compatible mapping."""
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be an object")
    data = dict(data)
    model = data.pop("model", "two_link_arm")
    if model not in _DEFAULTS:
        raise ConfigError(f"unknown model '{model}'; available: {sorted(_DEFAULTS)}")
    base = _DEFAULTS[model]()
    kwargs = {}
    for key, value in data.items():
        if key == "scheme":
            try:
                kwargs["scheme"] = Scheme(value)
            except ValueError:
                raise ConfigError(f"unknown scheme '{value}'") from None
        elif key == "tolerance":
            kwargs["tolerance"] = np.atleast_1d(_parse_array(value, key))
        elif key == "tolerance_mode":
            try:
                kwargs["tolerance_mode"] = ToleranceMode(value)
            except ValueError:
                raise ConfigError(f"tolerance_mode must be 'abs' or 'rel'") from None
        elif key == "norm":
            if not isinstance(value, dict):
                raise ConfigError("'norm' must be an object with 'p' and optional 'weights'")
            p = value.get("p", 2)
            p = np.inf if p in ("inf", "Infinity") else float(p)
            weights = _parse_array(value.get("weights", [1.0]), "norm.weights")
            try:
                kwargs["norm"] = NormConfig(p=p, weights=weights)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        elif key == "solver":
            if not isinstance(value, dict):
                raise ConfigError("'solver' must be an object")
            allowed = {"tolerance", "max_iter", "inner_max_iter",
                       "penalty_init", "penalty_growth", "penalty_cap"}
            bad = set(value) - allowed
            if bad:
                raise ConfigError(f"unknown solver settings: {sorted(bad)}")
            kwargs["solver"] = SolverSettings(**value)
        elif key in ("initial_state", "state_lower", "state_upper",
                     "input_lower", "input_upper", "noise_direction"):
            kwargs[key] = _parse_array(value, key)
        elif key in RunConfig.__dataclass_fields__:
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown configuration key '{key}'")
    try:
        return base.with_overrides(model=model, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    """Load and validate a JSON run configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(data)
