"""Agent-based simulator for creator-follower dynamics under
recommendation policies, with fairness metrics and an experiment harness."""

from .errors import (
    AggregationError,
    CCFairError,
    ConfigurationError,
    InputDataError,
    InvalidSignalError,
    ParseError,
)
from .harness import SimulationConfig, run_experiment, run_simulation, sweep_ratios
from .metrics import dissatisfaction, fairness_vector, is_cc_fair
from .model import (
    NO_FOLLOW,
    PlatformState,
    QualityRanking,
    StepDelta,
    apply_step,
    follow_decision,
    is_absorbing_noiseless,
    new_platform,
)
from .policies import PolicySpec, build_policy
from .theory import (
    expected_pairwise_counts,
    expected_permutation_counts,
    min_group_size,
    validate_fair_maintenance,
    validate_pairwise_noise,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationError",
    "CCFairError",
    "ConfigurationError",
    "InputDataError",
    "InvalidSignalError",
    "NO_FOLLOW",
    "ParseError",
    "PlatformState",
    "PolicySpec",
    "QualityRanking",
    "SimulationConfig",
    "StepDelta",
    "apply_step",
    "build_policy",
    "dissatisfaction",
    "expected_pairwise_counts",
    "expected_permutation_counts",
    "fairness_vector",
    "follow_decision",
    "is_absorbing_noiseless",
    "is_cc_fair",
    "min_group_size",
    "new_platform",
    "run_experiment",
    "run_simulation",
    "sweep_ratios",
    "validate_fair_maintenance",
    "validate_pairwise_noise",
    "__version__",
]
