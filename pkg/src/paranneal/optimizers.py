"""Annealed particle filter and parametric annealing search loops.

Both procedures maximise a black-box log-objective starting from a given
state.  The functional entry points (:func:`run_apf`, :func:`run_apf_retain`,
:func:`run_pa`) return a :class:`RunRecord`; the estimator classes wrap them
with a scikit-learn style parameter interface.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_covariance, check_open_unit, check_positive_int, check_vector
from .annealing import AnnealingSchedule, regularizer_at, schedule_alphas, solve_temperature
from .mog import MixtureOfGaussians, mog_mode_estimate, sample_mog, weighted_em_step
from .objectives import ObjectiveSpec
from .sampling import (
    GaussianParams,
    cholesky_with_jitter,
    make_rng,
    normalize_weights,
    resample,
    resample_multinomial,
    sample_gaussian,
)

__all__ = [
    "AnnealedParticleFilter",
    "ApfConfig",
    "LayerDiagnostics",
    "PaConfig",
    "ParametricAnnealing",
    "RunRecord",
    "run_apf",
    "run_apf_retain",
    "run_pa",
]


@dataclass(frozen=True)
class ApfConfig:
    """Annealed particle filter settings.

    ``decay`` scales the diffusion covariance as ``decay**m * diffusion_cov``
    after layer ``m``; it is independent of the survival-rate target.
    """

    n_particles: int
    n_layers: int
    diffusion_cov: np.ndarray
    decay: float = 0.5
    survival: str = "ess"
    resampling: str = "multinomial"

    def __post_init__(self):
        check_positive_int(self.n_particles, "n_particles")
        check_positive_int(self.n_layers, "n_layers")
        check_open_unit(self.decay, "decay")

    @property
    def budget(self):
        return self.n_particles * self.n_layers

    def to_dict(self):
        return {
            "n_particles": self.n_particles,
            "n_layers": self.n_layers,
            "decay": self.decay,
            "survival": self.survival,
            "resampling": self.resampling,
        }


@dataclass(frozen=True)
class PaConfig:
    """Parametric annealing settings; ``schedule`` must carry ``xi``."""

    n_initial: int
    n_layers: int
    n_new: int
    schedule: AnnealingSchedule
    init_cov: np.ndarray
    survival: str = "ess"
    refine_mode: bool = True

    def __post_init__(self):
        check_positive_int(self.n_initial, "n_initial")
        check_positive_int(self.n_layers, "n_layers")
        check_positive_int(self.n_new, "n_new")
        if self.schedule.n_layers < self.n_layers:
            raise ValueError("schedule has fewer layers than the configuration")
        if self.schedule.xi is None:
            raise ValueError("parametric annealing needs a schedule with a base regulariser xi")

    @property
    def budget(self):
        return self.n_initial + self.n_layers * self.n_new

    def to_dict(self):
        return {
            "n_initial": self.n_initial,
            "n_layers": self.n_layers,
            "n_new": self.n_new,
            "eta": self.schedule.eta,
            "lambda": self.schedule.lam,
            "schedule": self.schedule.kind,
            "survival": self.survival,
            "refine_mode": self.refine_mode,
        }


@dataclass(frozen=True)
class LayerDiagnostics:
    beta: float
    target: float
    survival: float
    n_samples: int
    saturated: bool
    identical: bool
    respawned: tuple = ()


@dataclass
class RunRecord:
    """Outcome of one optimisation run.

    ``eval_count`` counts the evaluations made by the search itself;
    the start and final states are evaluated once more each and reported in
    ``reference_evals``.  ``final_samples`` and ``final_weights`` are the
    weighted set of the last layer.
    """

    method: str
    seed: object
    config: dict
    start: np.ndarray
    start_log_y: float
    estimate: np.ndarray
    final_log_y: float
    eval_count: int
    layers: list = field(default_factory=list)
    reference_evals: int = 2
    final_samples: np.ndarray = field(default=None, repr=False)
    final_weights: np.ndarray = field(default=None, repr=False)
    mixture: MixtureOfGaussians = field(default=None, repr=False)

    @property
    def improvement(self):
        return self.final_log_y - self.start_log_y

    def to_dict(self):
        return {
            "method": self.method,
            "seed": self.seed,
            "config": self.config,
            "start": self.start.tolist(),
            "start_log_y": self.start_log_y,
            "estimate": self.estimate.tolist(),
            "final_log_y": self.final_log_y,
            "improvement": self.improvement,
            "eval_count": self.eval_count,
            "reference_evals": self.reference_evals,
            "layers": {
                "beta": [d.beta for d in self.layers],
                "target": [d.target for d in self.layers],
                "survival": [d.survival for d in self.layers],
                "n_samples": [d.n_samples for d in self.layers],
                "saturated": [d.saturated for d in self.layers],
                "respawned": [list(d.respawned) for d in self.layers],
            },
        }


def _as_objective(objective, dim):
    if isinstance(objective, ObjectiveSpec):
        if objective.dim != dim:
            raise ValueError(f"objective dimension {objective.dim} does not match start ({dim})")
        return objective
    if callable(objective):
        return ObjectiveSpec(dim, objective)
    raise TypeError("objective must be an ObjectiveSpec or a callable")


def _layer(temp, n, respawned=()):
    return LayerDiagnostics(
        temp.beta, temp.target, temp.achieved, n, temp.saturated, temp.identical, tuple(respawned)
    )


def _apf(objective, start, config, rng, retain, targets, method, seed):
    start = check_vector(start, "start")
    objective = _as_objective(objective, start.shape[0])
    d, N, M = start.shape[0], config.n_particles, config.n_layers
    targets = np.asarray(targets, dtype=float)
    if targets.shape[0] < M:
        raise ValueError(f"need {M} survival targets, got {targets.shape[0]}")
    diffusion = check_covariance(config.diffusion_cov, dim=d, name="diffusion_cov")
    chol = cholesky_with_jitter(diffusion)

    start_log_y = objective.evaluate_one(start)
    used_before = objective.eval_count

    x = sample_gaussian(GaussianParams(start, diffusion), rng, N)
    log_y = objective(x)
    pool_x, pool_y = x, log_y
    layers = []
    for m in range(1, M + 1):
        temp = solve_temperature(pool_y, targets[m - 1], measure=config.survival)
        pi = normalize_weights(pool_y, temp.beta)
        layers.append(_layer(temp, pool_y.shape[0]))
        if m == M:
            break
        idx = resample(pi, rng, N, scheme=config.resampling)
        noise = rng.standard_normal((N, d)) @ (np.sqrt(config.decay**m) * chol).T
        x = pool_x[idx] + noise
        log_y = objective(x)
        if retain:
            pool_x = np.vstack([pool_x, x])
            pool_y = np.concatenate([pool_y, log_y])
        else:
            pool_x, pool_y = x, log_y

    eval_count = objective.eval_count - used_before
    estimate = pi @ pool_x
    final_log_y = objective.evaluate_one(estimate)
    cfg = config.to_dict()
    cfg["retain"] = retain
    cfg["targets"] = targets[:M].tolist()
    return RunRecord(
        method=method,
        seed=seed,
        config=cfg,
        start=start,
        start_log_y=start_log_y,
        estimate=estimate,
        final_log_y=final_log_y,
        eval_count=eval_count,
        layers=layers,
        final_samples=pool_x,
        final_weights=pi,
    )


def run_apf(objective, start, config, rng=None, seed=None):
    """Annealed particle filter that discards samples between layers.

    Each layer evaluates ``N`` fresh samples, picks the temperature giving a
    50 % survival rate, weights, then resamples and diffuses with covariance
    ``decay**m * diffusion_cov``.  The estimate is the weighted mean of the last
    layer.  Uses exactly ``N * M`` search evaluations.
    """
    rng = make_rng(seed if rng is None else rng)
    return _apf(objective, start, config, rng, False, np.full(config.n_layers, 0.5), "apf", seed)


def run_apf_retain(objective, start, config, rng=None, deep_schedule=None, seed=None):
    """APF variant that keeps every evaluated sample and re-weights it each layer.

    With ``deep_schedule`` the per-layer survival targets come from the
    schedule instead of the constant 0.5.
    """
    rng = make_rng(seed if rng is None else rng)
    if deep_schedule is None:
        targets, method = np.full(config.n_layers, 0.5), "apf-retain"
    else:
        targets = schedule_alphas(deep_schedule)
        method = "apf-retain" if deep_schedule.kind == "apf" else "apf-retain-deep"
    return _apf(objective, start, config, rng, True, targets, method, seed)


def run_pa(objective, start, config, rng=None, seed=None):
    """Parametric annealing.

    ``N0`` samples are drawn around ``start`` and evaluated.  In each layer
    ``m`` all retained samples are re-weighted at the temperature hitting the
    survival target ``alpha_m``, one weighted EM step updates the mixture
    proposal with regulariser ``xi_m``, and ``C`` new samples drawn from the
    mixture are evaluated and retained.  The estimate is the mode of the final
    mixture.  Uses exactly ``N0 + M * C`` search evaluations.
    """
    rng = make_rng(seed if rng is None else rng)
    start = check_vector(start, "start")
    objective = _as_objective(objective, start.shape[0])
    d, C, M = start.shape[0], config.n_new, config.n_layers
    if config.schedule.xi.shape[0] != d:
        raise ValueError(f"xi has {config.schedule.xi.shape[0]} entries, expected {d}")
    init_cov = check_covariance(config.init_cov, dim=d, name="init_cov")
    alphas = schedule_alphas(config.schedule)

    start_log_y = objective.evaluate_one(start)
    used_before = objective.eval_count

    X = sample_gaussian(GaussianParams(start, init_cov), rng, config.n_initial)
    LY = objective(X)
    mog = None
    layers = []
    for m in range(1, M + 1):
        temp = solve_temperature(LY, alphas[m - 1], measure=config.survival)
        pi = normalize_weights(LY, temp.beta)
        reg = regularizer_at(config.schedule, m)
        if mog is None:
            mog = MixtureOfGaussians(
                np.full(C, 1.0 / C), X[resample_multinomial(pi, rng, C)], np.repeat(reg[None], C, axis=0)
            )
        mog, respawned = weighted_em_step(mog, (X, pi), reg, respawn_cov=reg, return_info=True)
        layers.append(_layer(temp, LY.shape[0], respawned))
        weighted = X
        new = sample_mog(mog, rng, C)
        X = np.vstack([X, new])
        LY = np.concatenate([LY, objective(new)])

    eval_count = objective.eval_count - used_before
    estimate = mog_mode_estimate(mog, refine=config.refine_mode)
    final_log_y = objective.evaluate_one(estimate)
    return RunRecord(
        method="pa",
        seed=seed,
        config=config.to_dict(),
        start=start,
        start_log_y=start_log_y,
        estimate=estimate,
        final_log_y=final_log_y,
        eval_count=eval_count,
        layers=layers,
        final_samples=weighted,
        final_weights=pi,
        mixture=mog,
    )


class _SearchEstimator(BaseEstimator):
    def fit(self, objective, x0):
        """Search for the maximum of ``objective`` starting at ``x0``.

        ``objective`` is an :class:`ObjectiveSpec` or a callable mapping one
        point to a log-objective value.
        """
        x0 = check_vector(x0, "x0")
        record = self._run(objective, x0, make_rng(self.random_state))
        self.record_ = record
        self.estimate_ = record.estimate
        self.final_log_y_ = record.final_log_y
        self.improvement_ = record.improvement
        self.n_evals_ = record.eval_count
        self.n_features_in_ = x0.shape[0]
        return self

    def predict(self, X=None):
        """The estimated maximiser (``X`` is ignored)."""
        check_is_fitted(self, "estimate_")
        return self.estimate_.copy()

    def score(self, X=None, y=None):
        """Log-objective at the estimate."""
        check_is_fitted(self, "final_log_y_")
        return self.final_log_y_


def _scaled_identity(value, d):
    value = np.asarray(value, dtype=np.float64)
    return value * np.eye(d) if value.ndim == 0 else value


class AnnealedParticleFilter(_SearchEstimator):
    """Annealed particle filter for global maximisation of a log-objective.

    Parameters
    ----------
    n_particles : int, default=200
    n_layers : int, default=5
    diffusion_cov : float or (d, d) array, default=1.0
        Initial diffusion covariance; a scalar means a multiple of the identity.
    decay : float, default=0.5
        Diffusion shrink factor per layer.
    retain : bool, default=False
        Keep evaluated samples across layers instead of discarding them.
    deep_schedule : AnnealingSchedule, optional
        Survival targets for the retaining variant.
    survival : {"ess", "unique"}, default="ess"
    resampling : {"multinomial", "systematic"}, default="multinomial"
    random_state : int, Generator or None
    """

    def __init__(self, n_particles=200, n_layers=5, diffusion_cov=1.0, decay=0.5, retain=False,
                 deep_schedule=None, survival="ess", resampling="multinomial", random_state=None):
        self.n_particles = n_particles
        self.n_layers = n_layers
        self.diffusion_cov = diffusion_cov
        self.decay = decay
        self.retain = retain
        self.deep_schedule = deep_schedule
        self.survival = survival
        self.resampling = resampling
        self.random_state = random_state

    def _run(self, objective, x0, rng):
        config = ApfConfig(
            self.n_particles, self.n_layers, _scaled_identity(self.diffusion_cov, x0.shape[0]),
            self.decay, self.survival, self.resampling,
        )
        if self.retain or self.deep_schedule is not None:
            return run_apf_retain(objective, x0, config, rng, self.deep_schedule)
        return run_apf(objective, x0, config, rng)


class ParametricAnnealing(_SearchEstimator):
    """Parametric annealing: sample reuse, deep schedule and a mixture proposal.

    Parameters
    ----------
    n_initial : int, default=150
        Samples drawn around the start state.
    n_layers : int, default=24
    n_new : int, default=12
        New samples per layer, also the number of mixture components.
    eta, lam : float, default=0.5, 0.9
        Survival targets ``eta * lam**m``.
    xi : float or array of shape (d,), default=1.0
        Diagonal of the base regulariser, about half the largest expected
        change of the state along each dimension.
    init_cov : float or (d, d) array, optional
        Covariance of the initial draw; defaults to ``diag(xi**2)``.
    survival : {"ess", "unique"}, default="ess"
    refine_mode : bool, default=True
        Polish the final mode estimate by a fixed-point mode search; when
        false the best component mean is returned.
    random_state : int, Generator or None
    """

    def __init__(self, n_initial=150, n_layers=24, n_new=12, eta=0.5, lam=0.9, xi=1.0,
                 init_cov=None, survival="ess", refine_mode=True, random_state=None):
        self.n_initial = n_initial
        self.n_layers = n_layers
        self.n_new = n_new
        self.eta = eta
        self.lam = lam
        self.xi = xi
        self.init_cov = init_cov
        self.survival = survival
        self.refine_mode = refine_mode
        self.random_state = random_state

    def _run(self, objective, x0, rng):
        d = x0.shape[0]
        xi = np.broadcast_to(np.asarray(self.xi, dtype=np.float64), (d,)).copy()
        init_cov = np.diag(xi**2) if self.init_cov is None else _scaled_identity(self.init_cov, d)
        schedule = AnnealingSchedule.power_law(self.eta, self.lam, self.n_layers, xi)
        config = PaConfig(self.n_initial, self.n_layers, self.n_new, schedule, init_cov,
                          self.survival, self.refine_mode)
        return run_pa(objective, x0, config, rng)
