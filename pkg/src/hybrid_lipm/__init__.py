"""Hybrid LIPM walking toolkit: timer-based reference, certified saturated
feedback, event-driven simulation, lateral MPC and swing-foot references."""

from .controller import ControllerConfig, control, dz, sat
from .error_dynamics import (delta_alpha, delta_bounds, derivative_intervals, eta,
                             jump_displacement, tau_epsilon, xi)
from .exceptions import (AlphaTooSmall, ConfigError, HybridLipmError, Infeasible, InfeasibleGait,
                         NotInJumpSet, QpInfeasible, SolverFailure, StepNeverCompletes,
                         TimerOutOfRange, ZenoGuardTripped)
from .model import (ModelParams, complete_params, flow_field, flow_matrices, jump_map, reference,
                    transition_matrix)
from .simulation import (HybridSimulator, HybridTrajectory, SimOptions, Status, check_monotonicity,
                         lyapunov, residual_time, simulate)
from .synthesis import (GainCertificate, SynthesisProblem, feasibility_witness, synthesize, verify,
                        witness_certificate)

__version__ = "0.1.0"
