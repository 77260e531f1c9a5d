"""Weighted sample sets, seeded randomness, Gaussian sampling and resampling.

Every objective value is carried in the log domain.  Raising a likelihood to
an inverse temperature ``beta`` therefore becomes ``beta * log_y`` and the
normalisation is done with a max-subtraction, which keeps high-dimensional
objectives from overflowing.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_covariance, check_log_values, check_points, check_vector
from .exceptions import DegenerateWeights, SingularCovariance

__all__ = [
    "GaussianParams",
    "WeightedSampleSet",
    "cholesky_with_jitter",
    "make_rng",
    "normalize_weights",
    "resample",
    "resample_multinomial",
    "resample_systematic",
    "sample_gaussian",
]

JITTER_STEPS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def make_rng(seed=None):
    """Return a ``numpy.random.Generator``.

    ``seed`` may be an int, a sequence of ints, a ``SeedSequence`` or an
    existing generator (returned unchanged, so the stream is shared).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def cholesky_with_jitter(cov):
    """Lower Cholesky factor of ``cov``, adding diagonal jitter if needed.

    The jitter is ``eps * trace(cov) / d`` with ``eps`` escalating through
    1e-10 ... 1e-6.  Raises :class:`SingularCovariance` when every attempt fails.
    """
    cov = np.asarray(cov, dtype=np.float64)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    d = cov.shape[0]
    scale = np.trace(cov) / d
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    eye = np.eye(d)
    for eps in JITTER_STEPS:
        try:
            return np.linalg.cholesky(cov + eps * scale * eye)
        except np.linalg.LinAlgError:
            continue
    raise SingularCovariance(
        f"covariance is not positive definite even with jitter {JITTER_STEPS[-1]:g}*trace/d"
    )


@dataclass(frozen=True)
class GaussianParams:
    """Mean and covariance of a multivariate normal."""

    mean: np.ndarray
    covariance: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = check_vector(self.mean, "mean")
        cov = check_covariance(self.covariance, dim=mean.shape[0])
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "covariance", _frozen(cov))
        object.__setattr__(self, "chol", _frozen(cholesky_with_jitter(cov)))

    @property
    def dim(self):
        return self.mean.shape[0]


def sample_gaussian(params, rng, n):
    """Draw ``n`` i.i.d. points from ``N(params.mean, params.covariance)``.

    Returns an ``(n, d)`` array.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    z = rng.standard_normal((n, params.dim))
    return params.mean + z @ params.chol.T


def normalize_weights(log_values, beta):
    """Annealed weights ``pi_i ∝ exp(beta * log_y_i)``, normalised to sum to one.

    Entries equal to -inf get weight zero.  Raises :class:`DegenerateWeights`
    if every entry is -inf.
    """
    log_values = check_log_values(log_values)
    if not np.isfinite(beta) or beta < 0.0:
        raise ValueError(f"beta must be a finite non-negative number, got {beta!r}")
    finite = np.isfinite(log_values)
    if not finite.any():
        raise DegenerateWeights("all log-objective values are -inf")
    scaled = np.full(log_values.shape, -np.inf)
    scaled[finite] = beta * log_values[finite]
    w = np.exp(scaled - scaled[finite].max())
    return w / w.sum()


@dataclass(frozen=True)
class WeightedSampleSet:
    """Points ``x`` with raw log-objective values and normalised weights ``pi``."""

    x: np.ndarray
    log_y: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        x = check_points(self.x, "x")
        log_y = check_log_values(self.log_y, "log_y")
        pi = np.asarray(self.pi, dtype=np.float64)
        n = x.shape[0]
        if log_y.shape != (n,) or pi.shape != (n,):
            raise ValueError("x, log_y and pi must describe the same number of samples")
        if (pi < 0).any() or abs(pi.sum() - 1.0) > 1e-9:
            raise ValueError("pi must be non-negative and sum to one")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "log_y", _frozen(log_y))
        object.__setattr__(self, "pi", _frozen(pi))

    @classmethod
    def from_log_values(cls, x, log_y, beta):
        """Build a set whose weights are ``normalize_weights(log_y, beta)``."""
        return cls(x, log_y, normalize_weights(log_y, beta))

    @property
    def dim(self):
        return self.x.shape[1]

    def __len__(self):
        return self.x.shape[0]

    def mean(self):
        """Weighted mean ``sum_i pi_i x_i``."""
        return self.pi @ self.x


def _probabilities(weights):
    if isinstance(weights, WeightedSampleSet):
        return weights.pi
    p = np.asarray(weights, dtype=np.float64)
    if p.ndim != 1 or (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be a normalised 1-D probability vector")
    return p


def _inverse_cdf(p, u):
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, p.shape[0] - 1)


def resample_multinomial(weights, rng, n):
    """Draw ``n`` indices i.i.d. with probabilities ``weights`` (or ``set.pi``)."""
    p = _probabilities(weights)
    return _inverse_cdf(p, rng.random(n))


def resample_systematic(weights, rng, n):
    """Systematic resampling: one uniform offset, ``n`` evenly spaced points."""
    p = _probabilities(weights)
    u = (np.arange(n) + rng.random()) / n
    return _inverse_cdf(p, u)


def resample(weights, rng, n, scheme="multinomial"):
    if scheme == "multinomial":
        return resample_multinomial(weights, rng, n)
    if scheme == "systematic":
        return resample_systematic(weights, rng, n)
    raise ValueError(f"unknown resampling scheme {scheme!r}; expected 'multinomial' or 'systematic'")
