"""Constrained (multivalued/reflected) SDE simulation under small noise,
action-functional rate estimation, and Monte Carlo verification of the
large-deviation and Laplace asymptotics."""

from .domains import (AxisBox, ConvexDomain, DomainError, EuclideanBall, HalfSpace,
                      InteriorBallConstants, Polytope, ProjectionError, free_space,
                      interior_ball_constants)
from .grids import BrownianPath, Control, TimeGrid
from .models import (Brownian, DoubleWell, Model, OrnsteinUhlenbeck,
                     StateDependentDiffusion, make_model, verify_coefficient_bounds)
from .operators import (FilledGraph1D, IndicatorOperator, LipschitzSum,
                        MonotoneOperator, ResolventError, sign_graph, verify_monotone)
from .simulate import (SimulationError, SolutionPath, check_solution_properties,
                       dynamics_residual, simulate, simulate_controlled)
from .action import (RateOptions, RateResult, action_norm, adjoint_gradient,
                     fd_endpoint_gradient, minimize_endpoint_rate,
                     minimize_functional_cost, solve_skeleton)
from .functionals import (ConstantFunctional, EndpointDistanceCap, PathFunctional,
                          RunningMaxCap)
from .ldp import (ControlledLimitReport, EndpointBeyondLevel, EndpointInBall,
                  EventSpec, LdpError, MCEstimate, RunningMaxAboveLevel, SlopeReport,
                  SupTube, controlled_limit_report, estimate_event, extrapolate_rate,
                  laplace_estimate)
from .kernels import backend_name

__version__ = "0.1.0"
