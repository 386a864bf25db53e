"""Non-adaptive 20-questions tracking of a moving target under measurement-dependent noise."""

__version__ = "0.1.0"

from .channel import ChannelSpec, SizeMap, sample_output, state_of_measure, transition_matrix, verify_continuity
from .info import (
    ChannelStats,
    capacity,
    channel_stats,
    dispersion,
    empirical_info,
    gaussian_cdf,
    gaussian_icdf,
    info_density,
    mutual_info,
    output_dist,
    third_moment,
)
from .limits import critical_rate, excess_prob_approx, phase_curve, resolution_approx, velocity_regime
from .montecarlo import ExperimentPlan, compare_with_theory, estimate_excess_prob, wilson_ci
from .motion import TargetState, locate_scalar, locate_vector, unwrapped_position
from .scheme import BudgetError, TrajectoryDecoder, decode, draw_codebook, plan_grid, run_episode
