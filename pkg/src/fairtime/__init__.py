"""Fairness over time: choosing decisions repeatedly so that aggregated
stakeholder utilities end up fair."""

from .aggregation import (
    Average,
    LinearCombo,
    Maximum,
    MaxOf,
    MeanAbsDev,
    Minimum,
    MinOf,
    Percentile,
    ThresholdExceedance,
    aggregate,
    format_aggregator,
    parse_aggregator,
)
from .distributional import DiscreteDistribution, dist, dist_aggregate, edd_of_sequence, ees_of_distribution
from .estimator import FairnessOverTime
from .exact import solve_descriptive, solve_pe
from .instance import FilteredInstance, Instance, alpha_filter, load_instance, save_instance
from .relaxation import epsilon_schedule, lcm_schedule, solve_relaxation
from .unfairness import Gap, MaxDeviationFromMean, Quadratic, parse_unfairness, unfairness

__version__ = "0.1.0"
