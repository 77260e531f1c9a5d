"""Mixtures of Gaussians: density, sampling, weighted EM and random objectives.

The same :class:`MixtureOfGaussians` value serves as the adaptive proposal
of parametric annealing and as the random search objective of the scaling
benchmark.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_positive, check_positive_int
from .sampling import WeightedSampleSet, cholesky_with_jitter, make_rng, resample_multinomial

__all__ = [
    "MixtureOfGaussians",
    "MogObjectivePrior",
    "WeightedGaussianMixture",
    "component_log_pdf",
    "draw_benchmark_objective",
    "log_density",
    "mog_mode_estimate",
    "responsibilities",
    "sample_mog",
    "sample_wishart",
    "weighted_em_step",
]

LOG_2PI = np.log(2.0 * np.pi)
DEAD_COMPONENT_MASS = 1e-12


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class MixtureOfGaussians:
    """``C`` weighted Gaussian components in ``R^d``.

    Parameters
    ----------
    weights : array of shape (C,)
        Mixture weights, summing to one.
    means : array of shape (C, d)
    covariances : array of shape (C, d, d)
        Symmetric positive (semi-)definite; factorised under the jitter policy.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    chols: np.ndarray = field(init=False, repr=False)
    precision_chols: np.ndarray = field(init=False, repr=False)
    log_dets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        means = np.asarray(self.means, dtype=np.float64)
        if means.ndim == 1:
            means = means[:, None] if weights.shape[0] > 1 else means[None, :]
        covs = np.asarray(self.covariances, dtype=np.float64)
        n_comp, dim = means.shape
        if covs.ndim == 1 and dim == 1:
            covs = covs.reshape(n_comp, 1, 1)
        if weights.shape != (n_comp,) or covs.shape != (n_comp, dim, dim):
            raise ValueError(
                f"inconsistent shapes: weights {weights.shape}, means {means.shape}, "
                f"covariances {covs.shape}"
            )
        if (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to one")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(covs))):
            raise ValueError("means and covariances must be finite")
        covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
        chols = np.stack([cholesky_with_jitter(c) for c in covs])
        eye = np.eye(dim)
        # (x - mu) @ precision_chols[c] has squared norm equal to the Mahalanobis distance
        prec = np.stack([np.linalg.solve(L, eye).T for L in chols])
        log_dets = 2.0 * np.log(np.diagonal(chols, axis1=1, axis2=2)).sum(axis=1)
        object.__setattr__(self, "weights", _frozen(weights))
        object.__setattr__(self, "means", _frozen(means))
        object.__setattr__(self, "covariances", _frozen(covs))
        object.__setattr__(self, "chols", _frozen(chols))
        object.__setattr__(self, "precision_chols", _frozen(prec))
        object.__setattr__(self, "log_dets", _frozen(log_dets))

    @property
    def n_components(self):
        return self.means.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    def to_dict(self):
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data["weights"], data["means"], data["covariances"])

    def __eq__(self, other):
        if not isinstance(other, MixtureOfGaussians):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.covariances, other.covariances)
        )

    __hash__ = None


def component_log_pdf(mog, X):
    """Per-component Gaussian log densities, shape ``(n, C)``."""
    X = np.atleast_2d(X)
    diff = X[:, None, :] - mog.means[None, :, :]
    y = np.einsum("ncd,cde->nce", diff, mog.precision_chols)
    maha = np.einsum("nce,nce->nc", y, y)
    return -0.5 * (maha + mog.dim * LOG_2PI + mog.log_dets)


def _log_weights(mog):
    with np.errstate(divide="ignore"):
        return np.log(mog.weights)


def log_density(mog, x):
    """``log sum_c phi_c N(x; mu_c, Sigma_c)`` for one point or a batch of points."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if x.shape[-1] != mog.dim:
        raise ValueError(f"point dimension {x.shape[-1]} does not match mixture dimension {mog.dim}")
    out = logsumexp(component_log_pdf(mog, x) + _log_weights(mog), axis=1)
    return float(out[0]) if single else out


def responsibilities(mog, X):
    """Posterior component probabilities ``r_ic``, each row summing to one."""
    joint = component_log_pdf(mog, X) + _log_weights(mog)
    return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))


def sample_mog(mog, rng, n):
    """Draw ``n`` points: pick a component by weight, then a Gaussian draw."""
    comp = resample_multinomial(mog.weights, rng, n)
    z = rng.standard_normal((n, mog.dim))
    return mog.means[comp] + np.einsum("nde,ne->nd", mog.chols[comp], z)


def weighted_em_step(mog, samples, regularizer=None, *, respawn_cov=None, return_info=False):
    """One EM iteration with per-sample weights and an additive covariance regulariser.

    The M-step uses ``w_ic = pi_i * r_ic``; the covariance update of each
    component gets ``regularizer / phi_c`` added.  A component whose mass falls
    below 1e-12 is re-seeded at the highest-weight sample with covariance
    ``respawn_cov`` (defaults to the regulariser, else the old covariance) and
    weight ``1 / (10 C)`` before the weights are renormalised.

    Parameters
    ----------
    mog : MixtureOfGaussians
        Current parameters; the E-step is evaluated under them.
    samples : WeightedSampleSet or tuple (X, pi)
    regularizer : (d, d) array, 1-D diagonal, or None for no regularisation.
    return_info : bool
        Also return the list of respawned component indices.
    """
    if isinstance(samples, WeightedSampleSet):
        X, pi = samples.x, samples.pi
    else:
        X, pi = samples
        X = check_points(X, dim=mog.dim)
        pi = np.asarray(pi, dtype=np.float64)
        if pi.shape != (X.shape[0],) or (pi < 0).any() or abs(pi.sum() - 1.0) > 1e-9:
            raise ValueError("sample weights must be a normalised vector matching X")
    d, n_comp = mog.dim, mog.n_components
    if regularizer is None:
        reg = np.zeros((d, d))
    else:
        reg = np.asarray(regularizer, dtype=np.float64)
        reg = np.diag(reg) if reg.ndim == 1 else reg

    w = pi[:, None] * responsibilities(mog, X)
    mass = w.sum(axis=0)
    alive = mass >= DEAD_COMPONENT_MASS

    weights = mass.copy()
    means = mog.means.copy()
    covs = mog.covariances.copy()
    for c in np.flatnonzero(alive):
        mu = w[:, c] @ X / mass[c]
        diff = X - mu
        means[c] = mu
        covs[c] = (w[:, c, None] * diff).T @ diff / mass[c] + reg / mass[c]

    respawned = np.flatnonzero(~alive).tolist()
    if respawned:
        best = X[int(np.argmax(pi))]
        if respawn_cov is not None:
            fresh = np.asarray(respawn_cov, dtype=np.float64)
            fresh = np.diag(fresh) if fresh.ndim == 1 else fresh
        elif regularizer is not None and np.any(reg):
            fresh = reg
        else:
            fresh = None
        for c in respawned:
            weights[c] = 1.0 / (10 * n_comp)
            means[c] = best
            if fresh is not None:
                covs[c] = fresh
    weights = weights / weights.sum()

    new = MixtureOfGaussians(weights, means, covs)
    return (new, respawned) if return_info else new


def _mean_shift(mog, x, max_iter, tol):
    precisions = np.einsum("cde,cfe->cdf", mog.precision_chols, mog.precision_chols)
    prec_means = np.einsum("cdf,cf->cd", precisions, mog.means)
    for _ in range(max_iter):
        r = responsibilities(mog, x[None, :])[0]
        x_new = np.linalg.solve(np.einsum("c,cdf->df", r, precisions), r @ prec_means)
        if np.max(np.abs(x_new - x)) <= tol * (1.0 + np.max(np.abs(x))):
            return x_new
        x = x_new
    return x


def mog_mode_estimate(mog, refine=True, max_iter=500, tol=1e-12):
    """Highest-density point of the mixture.

    The density is probed at the component means (ties go to the lowest
    index), then a fixed-point mode search is started from every mean and the
    best point found is returned, so the result is never worse than the best
    mean.  ``refine=False`` skips the search and returns the best mean.
    """
    scores = log_density(mog, mog.means)
    best = int(np.argmax(scores))
    if not refine:
        return mog.means[best].copy()
    candidates = [mog.means[best].copy()]
    for c in range(mog.n_components):
        candidates.append(_mean_shift(mog, mog.means[c].copy(), max_iter, tol))
    candidates = np.array(candidates)
    return candidates[int(np.argmax(log_density(mog, candidates)))].copy()


def sample_wishart(scale, dof, rng):
    """One Wishart(scale, dof) draw via the Bartlett decomposition."""
    scale = np.atleast_2d(np.asarray(scale, dtype=np.float64))
    d = scale.shape[0]
    if dof <= d - 1:
        raise ValueError(f"Wishart degrees of freedom must exceed d - 1 = {d - 1}, got {dof}")
    A = np.zeros((d, d))
    A[np.diag_indices(d)] = np.sqrt(rng.chisquare(dof - np.arange(d)))
    rows, cols = np.tril_indices(d, -1)
    A[rows, cols] = rng.standard_normal(rows.size)
    LA = np.linalg.cholesky(scale) @ A
    return LA @ LA.T


@dataclass(frozen=True)
class MogObjectivePrior:
    """Generative prior over random mixture objectives.

    ``wishart_dof`` defaults to ``dim + 2``.
    """

    dim: int
    n_components: int
    scale: float
    wishart_dof: float = None

    def __post_init__(self):
        object.__setattr__(self, "dim", check_positive_int(self.dim, "dim"))
        object.__setattr__(self, "n_components", check_positive_int(self.n_components, "n_components"))
        object.__setattr__(self, "scale", check_positive(self.scale, "scale"))
        dof = self.dim + 2 if self.wishart_dof is None else float(self.wishart_dof)
        if dof <= self.dim - 1:
            raise ValueError(f"wishart_dof must exceed dim - 1, got {dof}")
        object.__setattr__(self, "wishart_dof", float(dof))


def draw_benchmark_objective(prior, rng):
    """Draw a random mixture objective.

    Weights ~ Dirichlet(1, ..., 1); for each component the precision is
    Wishart(I_d, dof) and the mean is N(0, scale * I_d).
    """
    d, k = prior.dim, prior.n_components
    weights = rng.dirichlet(np.ones(k))
    means = np.empty((k, d))
    covs = np.empty((k, d, d))
    eye = np.eye(d)
    for c in range(k):
        precision = sample_wishart(eye, prior.wishart_dof, rng)
        cov = np.linalg.inv(precision)
        covs[c] = 0.5 * (cov + cov.T)
        means[c] = np.sqrt(prior.scale) * rng.standard_normal(d)
    return MixtureOfGaussians(weights, means, covs)


def _seed_means(X, pi, C, rng):
    centres = [X[resample_multinomial(pi, rng, 1)[0]]]
    d2 = np.sum((X - centres[0]) ** 2, axis=1)
    for _ in range(1, C):
        p = pi * d2
        # all remaining mass sits on chosen points: fall back to plain resampling
        p = pi if p.sum() <= 0 else p / p.sum()
        centres.append(X[resample_multinomial(p, rng, 1)[0]])
        d2 = np.minimum(d2, np.sum((X - centres[-1]) ** 2, axis=1))
    return np.array(centres)


class WeightedGaussianMixture(DensityMixin, BaseEstimator):
    """Gaussian mixture fitted by weighted EM with a constant diagonal regulariser.

    A small estimator wrapper around :func:`weighted_em_step` for use outside
    the annealing loop.  Means are seeded k-means++ style (weighted by
    ``sample_weight`` times squared distance to the nearest chosen mean) and
    covariances start at the weighted data covariance.

    Parameters
    ----------
    n_components : int, default=1
    n_iter : int, default=100
        Number of EM iterations; stops early when the weighted
        log-likelihood changes by less than ``tol``.
    reg : float, default=1e-6
        Diagonal regulariser added (divided by the component weight) in
        every M-step.
    tol : float, default=1e-8
    random_state : int, Generator or None
    """

    def __init__(self, n_components=1, n_iter=100, reg=1e-6, tol=1e-8, random_state=None):
        self.n_components = n_components
        self.n_iter = n_iter
        self.reg = reg
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None, sample_weight=None):
        X = check_points(X)
        n, d = X.shape
        check_positive_int(self.n_components, "n_components")
        check_positive_int(self.n_iter, "n_iter")
        if sample_weight is None:
            pi = np.full(n, 1.0 / n)
        else:
            pi = np.asarray(sample_weight, dtype=np.float64)
            if pi.shape != (n,) or (pi < 0).any() or pi.sum() <= 0:
                raise ValueError("sample_weight must be non-negative with positive sum")
            pi = pi / pi.sum()
        rng = make_rng(self.random_state)
        diff = X - pi @ X
        cov = (pi[:, None] * diff).T @ diff + self.reg * np.eye(d)
        C = self.n_components
        mog = MixtureOfGaussians(np.full(C, 1.0 / C), _seed_means(X, pi, C, rng), np.repeat(cov[None], C, axis=0))
        reg = self.reg * np.eye(d)
        prev = -np.inf
        for it in range(self.n_iter):
            mog = weighted_em_step(mog, (X, pi), reg)
            ll = float(pi @ log_density(mog, X))
            if abs(ll - prev) < self.tol:
                break
            prev = ll
        self.mixture_ = mog
        self.weights_ = mog.weights
        self.means_ = mog.means
        self.covariances_ = mog.covariances
        self.n_iter_ = it + 1
        self.n_features_in_ = d
        return self

    def score_samples(self, X):
        check_is_fitted(self, "mixture_")
        return log_density(self.mixture_, check_points(X, dim=self.n_features_in_))

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def predict(self, X):
        check_is_fitted(self, "mixture_")
        return responsibilities(self.mixture_, check_points(X, dim=self.n_features_in_)).argmax(axis=1)

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "mixture_")
        return sample_mog(self.mixture_, make_rng(random_state), n_samples)
