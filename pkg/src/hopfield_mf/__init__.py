"""Mean-field limit of Hopfield-like rate networks by Monte Carlo fixed-point iteration."""

__version__ = "0.1.0"

from ._backend import kernels as _kernels
from .fixed_point import (DivergenceError, FixedPointState, IterationDiagnostics, SolverConfig,
                          distance, lambda_step, solve_fixed_point)
from .kernel_ops import (KtildeFamily, NotPSDError, SolverError, compose, h_series, hs_norm,
                         ktilde_block, ktilde_family, ktilde_row, resolvent, trace_norm)
from .model import (BoundaryExitError, DomainError, InitialLaw, ModelError, ModelSpec, TimeGrid,
                    TrajectoryBatch, activation, drift, simulate_uncoupled)
from .network import (EmpiricalStats, WeightMatrix, empirical_stats, sample_weights_bernoulli,
                      sample_weights_gaussian, simulate_network)
from .runner import ExperimentConfig, build_config, compare_runs, run_experiment
from .volterra import reconstruct_p_brownian, solve_increments, solve_resolvent_form

backend = _kernels.backend_name
