from .bounds import (
    EnergyMoments,
    lambda_of,
    log_logistic_bound,
    energy_moments,
    local_xi,
    mackay_probability,
)
from .caches import (
    BackgroundCache,
    build_item_background,
    build_user_background,
    full_second_moment,
)
from .updates import (
    TraitNaturalParams,
    update_user_traits,
    update_item_traits,
    update_user_bias,
    update_item_bias,
    update_dirichlet,
    update_categorical_s,
    update_categorical_t,
    update_shared_xi,
    mean_gradient,
)
from .sweep import SweepEngine, sweep
from .elbo import ElboBreakdown, compute_elbo
from .simulator import GroundTruth, SimulationResult, sample_ground_truth, simulate
from .truth_io import write_ground_truth, read_ground_truth
from .checkpoint import save_checkpoint, load_checkpoint
from .evaluation import (
    EvalReport,
    score,
    predict_conditional,
    heldout_split,
    heldout_rank,
    popularity_scorer,
    model_scorer,
    build_report,
    write_report,
)
