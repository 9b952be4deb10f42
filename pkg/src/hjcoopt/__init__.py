"""Grid-based co-optimization of safety and performance for control-affine systems.

Workflow: solve the safety value field on a grid, turn its level sets and
derivatives into state/time-dependent safe-control bands, solve the
band-constrained performance PDE on the same grid, and synthesize the
closed-loop controller from both fields by exact small convex solves. A
rollout lab benchmarks the result against sampling-based baselines, and a
coarse-grid dynamic-programming oracle cross-validates both solvers.
"""

from .config import (
    BenchmarkConfig,
    MpcParams,
    MppiParams,
    Obstacle,
    SolverSettings,
    config_hash,
    load_config,
    save_config,
)
from .controller import (
    ControlDecision,
    min_linear_on_ball_hyperplane,
    project_onto_ball_band,
    synthesize,
    synthesize_policy,
)
from .errors import (
    ConfigError,
    ContractViolation,
    GridQueryError,
    HjcooptError,
    InfeasibleConstraint,
    SolverFailure,
)
from .grids import GridSpec, ValueField, gradient, interpolate, load_field, save_field, time_derivative
from .hamiltonians import HamiltonianResult, hamiltonian_max, hamiltonian_min_constrained
from .performance import solve_performance, unreliable_mask
from .rollout_lab import Trajectory, compare, rollout, sample_initial_states, success_tolerance
from .safe_controls import SafeControlSet, contains, query
from .safety import solve_safety
from .systems import (
    BallControlSet,
    BoxControlSet,
    ProblemSpec,
    SystemModel,
    benchmark_grid,
    benchmark_instance,
    flow,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
