from .engine import (
    PuChannelRun,
    SimParams,
    SimReport,
    run_experiment,
    run_pu_channel,
    run_trial,
    sample_batch_completion_times,
    simulate_iid_channels,
    su_step_adaptive,
    su_step_random,
    su_step_single_channel,
)
from ._accel import USE_NUMBA
