"""Input validation helpers shared by the estimators and the functional core."""

import numbers

import numpy as np
from sklearn.utils import check_array


def check_vector(x, name="x", dim=None):
    """Return ``x`` as a finite 1-D float64 array, optionally of length ``dim``."""
    x = check_array(x, ensure_2d=False, dtype=np.float64, input_name=name)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise ValueError(f"{name} has length {x.shape[0]}, expected {dim}")
    return x


def check_points(X, name="X", dim=None):
    """Return ``X`` as a finite (n, d) float64 array."""
    X = check_array(X, dtype=np.float64, input_name=name)
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"{name} has {X.shape[1]} columns, expected {dim}")
    return X


def check_log_values(log_values, name="log_values"):
    """Return log-objective values as a 1-D array; -inf allowed, nan and +inf not."""
    values = np.asarray(log_values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {values.shape}")
    if np.isnan(values).any() or np.isposinf(values).any():
        raise ValueError(f"{name} must not contain nan or +inf")
    return values


def check_covariance(cov, dim=None, name="covariance", rtol=1e-10):
    """Return a symmetric (d, d) covariance; a scalar or 1-D input becomes diagonal."""
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim == 0:
        if dim is None:
            raise ValueError(f"scalar {name} needs an explicit dimension")
        cov = float(cov) * np.eye(dim)
    elif cov.ndim == 1:
        cov = np.diag(cov)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {cov.shape}")
    if dim is not None and cov.shape[0] != dim:
        raise ValueError(f"{name} is {cov.shape[0]}x{cov.shape[0]}, expected {dim}x{dim}")
    if not np.all(np.isfinite(cov)):
        raise ValueError(f"{name} must be finite")
    scale = max(np.abs(cov).max(), np.finfo(float).tiny)
    if np.abs(cov - cov.T).max() > rtol * scale:
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (cov + cov.T)


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_open_unit(value, name):
    """Check ``value`` lies strictly inside (0, 1)."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not 0.0 < value < 1.0:
        raise ValueError(f"{name} must be in (0,1), got {value!r}")
    return float(value)


def check_positive(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not value > 0.0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return float(value)
