"""Direct collocation with certified mesh refinement and triggered MPC loops."""

from .collocation import (ErrorCertificate, PiecewiseTrajectory, Scheme,
                          certify, collocation_points, local_error,
                          max_relative_error, quadrature, scaling_weights,
                          segment_poly_lipschitz, trajectory_from_nodes)
from .config import RunConfig, arm_default_config, linear_default_config, load_config
from .mesh import Mesh, covering_prefix, mesh_parameters, subdivide, uniform_mesh
from .models import (DynamicsModel, NoiseBounds, builtin_linear_model,
                     builtin_two_link_arm, eval_dynamics, make_model, register_model)
from .norms import NormConfig, induced_weight_norm, weighted_norm
from .ocp import (BolzaOCP, QuadraticInputCost, TerminalEquality, TerminalPenalty,
                  transcribe)
from .refinement import (RefinementConfig, RefinementReport, plan_subdivision,
                         refine, refine_with_tightening)
from .simulate import NoiseSource, PlantSimulator, integrate_plant
from .solver import NLPSolution, SolverSettings, SolverStatus, solve_nlp
from .tightening import (BoxSet, TighteningParams, alpha_k, ball_radius,
                         pontryagin_box_minus_ball, signed_distance,
                         tightened_boxes_at_mesh_points, upsilon)
from .triggering import (ToleranceMode, TriggerConfig, TriggerReport, ct_time,
                         event_condition, min_iut, qet_time, scaling_weight_bound)
from .experiments import (ClosedLoopLog, run_closed_loop, run_open_loop_experiment,
                          sweep_thresholds)

__version__ = "0.1.0"
