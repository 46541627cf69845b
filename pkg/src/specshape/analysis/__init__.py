from .pu import (
    ChannelOccupancyProfile,
    expected_completion_time_arq,
    expected_completion_time_nc,
    idle_probability,
    pu_profile,
    recommended_backoff,
)
from .sensing import (
    AdaptiveFixedPoint,
    FormulaMode,
    NoConvergence,
    Regime,
    SuThroughputReport,
    optimal_backoff,
    prediction_distance,
    solve_adaptive_fixed_point,
    stage_sensing_probabilities,
    su_throughput_adaptive,
    su_throughput_random,
    throughput_given_list_dist,
    timer_stationary_distribution,
)
