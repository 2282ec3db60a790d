"""Worst-case loss minimization over multiple sampling distributions.

Library layout:

* core         -- instances, randomized hypotheses, exact loss oracles
* game         -- Hedge updates, matrix-game solving, bilinear-game Hedge
* sampling     -- sample bank, resample trigger, loss estimators
* learners     -- full algorithm drivers and run reports
* instances    -- synthetic instance generators and complexity schedules
* diagnostics  -- trajectory norms, weight buckets, segment detection
* cli          -- experiment configs, sweeps, CSV/JSON outputs, summaries
"""

from .core import (
    ConfigError,
    Instance,
    RandomizedHypothesis,
    ValidationError,
    exact_mixture_loss,
    exact_worst_case_loss,
    optimality_gap,
)
from .diagnostics import Trajectory, find_segments, trajectory_norm, weight_buckets
from .game import (
    BilinearTrajectory,
    ConvergenceError,
    HedgeWeights,
    duality_gap,
    hedge_step,
    normalize,
    run_bilinear_hedge,
    solve_matrix_game,
)
from .instances import (
    RademacherSchedule,
    custom_schedule,
    make_hard_instance,
    make_heterogeneous_instance,
    make_random_instance,
    massart_rademacher_schedule,
    vc_rademacher_schedule,
)
from .learners import (
    HyperParams,
    RunReport,
    erm,
    instance_opt,
    multi_loss_hyperparams,
    paper_hyperparams,
    rad_t1,
    run_mdl_hedge_rad,
    run_mdl_hedge_vc,
    run_mlmdl_hedge,
    run_uniform_baseline,
)
from .sampling import (
    SampleBank,
    SamplerState,
    WeightSnapshots,
    empirical_weighted_loss,
    estimate_loss_vector,
    grow_bank,
    rad_effective_counts,
    resample_trigger,
)

__version__ = "0.1.0"
