"""mrplab: tabular value estimation on terminating Markov reward processes.

Model and sampling live in `mrp`, benchmark families in `generators`, exact
theory (values, occupancies, asymptotic variances, pooling coefficients,
advantage bounds) in `analysis`, the Monte Carlo and TD estimators in
`estimators`, trajectory crossing times in `coupling`, and the experiment
harness in `harness`.
"""

from .analysis import (AnalysisReport, PoolingCoefficient, advantage_weighting,
                       analyze, mc_advantage_asymptotic_variance,
                       mc_advantage_lower_bound, mc_asymptotic_variance,
                       pooling_coefficient, td_advantage_upper_bound,
                       td_asymptotic_variance, td_mc_ratio,
                       td_value_asymptotic_variance, weighted_occupancy,
                       weighted_value)
from .coupling import (CouplingResult, TrajectoryAtom, TransportProblem,
                       check_disjoint, crossing_cost, crossing_time_exact,
                       crossing_time_upper, enumerate_trajectories,
                       solve_crossing, solve_transportation)
from .estimators import (TabularEstimate, advantage, mc_estimate, td_estimate,
                         weighted_estimate)
from .generators import gen_checkout, gen_layered, gen_meeting
from .harness import (ExperimentConfig, RatioRow, RegretRow, SweepRow,
                      mse_with_ci, normal_cdf, ratio_with_ci, run_experiment,
                      run_horizon_sweep, run_meeting_sweep, run_regret,
                      run_sample_sweep, write_outputs)
from .mrp import (CONSTANT, GAUSSIAN, TERMINAL, UNIFORM, Dataset, Edge,
                  MrpSpec, RewardDist, Trajectory, Violation, constant,
                  dumps_mrp, gaussian, load_mrp, loads_mrp, sample_dataset,
                  sample_trajectory, save_mrp, uniform, validate)
from .rng import Stream, mix64

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
