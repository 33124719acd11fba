from .hyper import Hyperparams, HYPER_DEFAULTS
from .state import (
    GaussianTraitFactor,
    BiasFactor,
    DirichletFactor,
    TiedCategorical,
    EntityFactors,
    SideView,
    ModelState,
    init_state,
)
