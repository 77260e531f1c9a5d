"""Black-box log-objectives with evaluation accounting."""

import numpy as np

from ._validation import check_positive_int
from .mog import MixtureOfGaussians, log_density

__all__ = ["ObjectiveSpec", "mog_objective", "quadratic_objective"]


class ObjectiveSpec:
    """A log-objective ``R^d -> R ∪ {-inf}`` that counts its evaluations.

    Parameters
    ----------
    dim : int
    func : callable
        Maps one point of shape (d,) to a real log-objective value, or a batch
        of shape (n, d) to shape (n,) when ``vectorized=True``.
    vectorized : bool, default=False
    map_fn : callable, optional
        ``map``-like function used for non-vectorized batches, e.g.
        ``executor.map``.  Results are consumed in input order, so a parallel
        map cannot change outcomes.  ``func`` must then be picklable.
    name : str, optional
    """

    def __init__(self, dim, func, vectorized=False, map_fn=None, name=None):
        self.dim = check_positive_int(dim, "dim")
        self.func = func
        self.vectorized = vectorized
        self.map_fn = map_fn
        self.name = name or getattr(func, "__name__", "objective")
        self.eval_count = 0

    def __call__(self, X):
        """Evaluate a batch of points, shape (n, d) -> (n,)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ValueError(f"points have dimension {X.shape[1]}, objective expects {self.dim}")
        if self.vectorized:
            values = np.asarray(self.func(X), dtype=np.float64).reshape(X.shape[0])
        else:
            mapper = self.map_fn or map
            values = np.fromiter((float(v) for v in mapper(self.func, list(X))), float, X.shape[0])
        self.eval_count += X.shape[0]
        if np.isnan(values).any() or np.isposinf(values).any():
            raise ValueError(f"objective {self.name!r} returned nan or +inf")
        return values

    def evaluate_one(self, x):
        return float(self(np.asarray(x, dtype=np.float64)[None, :])[0])

    def __repr__(self):
        return f"ObjectiveSpec(name={self.name!r}, dim={self.dim}, eval_count={self.eval_count})"


def _quadratic(X):
    return -0.5 * np.einsum("nd,nd->n", X, X)


def quadratic_objective(dim):
    """``log y = -x^T x / 2``, maximised at the origin."""
    return ObjectiveSpec(dim, _quadratic, vectorized=True, name="quadratic")


def mog_objective(mog):
    """Log density of a mixture of Gaussians used as the search objective."""
    if not isinstance(mog, MixtureOfGaussians):
        raise TypeError("mog_objective expects a MixtureOfGaussians")
    return ObjectiveSpec(mog.dim, lambda X: log_density(mog, X), vectorized=True, name="mog")
