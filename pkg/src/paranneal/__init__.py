"""Annealed particle filtering and parametric annealing for black-box global optimisation."""

__version__ = "0.1.0"

from .annealing import (
    AnnealingSchedule,
    Temperature,
    regularizer_at,
    schedule_alphas,
    solve_temperature,
    survival_rate,
)
from .exceptions import ConfigError, DegenerateWeights, ParannealError, SingularCovariance
from .mog import (
    MixtureOfGaussians,
    MogObjectivePrior,
    WeightedGaussianMixture,
    draw_benchmark_objective,
    log_density,
    mog_mode_estimate,
    sample_mog,
    sample_wishart,
    weighted_em_step,
)
from .objectives import ObjectiveSpec, mog_objective, quadratic_objective
from .optimizers import (
    AnnealedParticleFilter,
    ApfConfig,
    PaConfig,
    ParametricAnnealing,
    RunRecord,
    run_apf,
    run_apf_retain,
    run_pa,
)
from .sampling import (
    GaussianParams,
    WeightedSampleSet,
    make_rng,
    normalize_weights,
    resample_multinomial,
    resample_systematic,
    sample_gaussian,
)
