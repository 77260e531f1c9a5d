"""Annealing temperatures and schedules.

The annealing temperature of a layer is chosen so that a survival measure of
the weighted sample set hits a target rate.  The default measure is the
normalised effective sample size

    ESS(beta) / N = (sum_i w_i)^2 / (N * sum_i w_i^2),   w_i = y_i^beta,

which equals 1 at ``beta = 0`` and decreases strictly and continuously in
``beta`` for non-constant objective values, so the inverse problem has a
single root that plain bisection finds.

Two schedules are provided: the constant 50 % rate used by the annealed
particle filter, and the deep power law ``alpha_m = eta * lambda**m`` whose
regulariser matrices ``alpha_m**2 * xi xi^T`` shrink with the layer.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_log_values, check_open_unit, check_positive_int
from .exceptions import DegenerateWeights

__all__ = [
    "AnnealingSchedule",
    "Temperature",
    "regularizer_at",
    "schedule_alphas",
    "solve_temperature",
    "survival_rate",
]

BETA_MIN = 1e-12
BETA_MAX = 1e6
SURVIVAL_MEASURES = ("ess", "unique")


def _finite_part(log_values):
    log_values = check_log_values(log_values)
    finite = log_values[np.isfinite(log_values)]
    if finite.size == 0:
        raise DegenerateWeights("all log-objective values are -inf")
    return finite, log_values.shape[0]


def _relative_weights(finite, beta):
    a = beta * finite
    return np.exp(a - a.max())


def survival_rate(log_values, beta, measure="ess"):
    """Fraction of samples expected to survive resampling at inverse temperature ``beta``.

    ``measure="ess"`` gives the normalised effective sample size.
    ``measure="unique"`` gives the expected fraction of distinct indices when
    ``N`` indices are drawn multinomially, ``sum_i (1 - (1 - pi_i)^N) / N``.
    Samples with ``log_y = -inf`` count towards ``N`` with zero weight.
    """
    if not np.isfinite(beta) or beta < 0.0:
        raise ValueError(f"beta must be a finite non-negative number, got {beta!r}")
    finite, n = _finite_part(log_values)
    w = _relative_weights(finite, beta)
    if measure == "ess":
        s = w.sum()
        return float(s * s / (n * np.dot(w, w)))
    if measure == "unique":
        pi = w / w.sum()
        return float(-np.expm1(n * np.log1p(-pi)).sum() / n)
    raise ValueError(f"unknown survival measure {measure!r}; expected one of {SURVIVAL_MEASURES}")


@dataclass(frozen=True)
class Temperature:
    """Inverse temperature chosen for one annealing layer.

    ``saturated`` is set when the target rate could not be reached inside
    ``[BETA_MIN, BETA_MAX]`` and ``beta`` sits on the bracket edge;
    ``identical`` is set when the survival rate does not depend on ``beta``
    (all finite values equal) and ``beta = 1`` is returned.
    """

    beta: float
    target: float
    achieved: float
    saturated: bool = False
    identical: bool = False

    @property
    def temperature(self):
        return 1.0 / self.beta


def solve_temperature(log_values, target_alpha, measure="ess", beta_max=BETA_MAX, tol=1e-6):
    """Find ``beta`` with ``survival_rate(log_values, beta) == target_alpha``.

    Bisection on ``log(beta)`` over ``[BETA_MIN, beta_max]``; the result is
    within ``tol`` of the target unless flagged as saturated.
    """
    target_alpha = check_open_unit(target_alpha, "target_alpha")
    finite, _ = _finite_part(log_values)

    def rate(beta):
        return survival_rate(log_values, beta, measure)

    if finite.size < 2 or finite.max() == finite.min():
        return Temperature(1.0, target_alpha, rate(1.0), identical=True)

    lo, hi = np.log(BETA_MIN), np.log(beta_max)
    r_hi = rate(beta_max)
    if r_hi > target_alpha:
        return Temperature(float(beta_max), target_alpha, r_hi, saturated=True)
    r_lo = rate(BETA_MIN)
    if r_lo < target_alpha:
        return Temperature(BETA_MIN, target_alpha, r_lo, saturated=True)

    beta, r = float(beta_max), r_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        beta = float(np.exp(mid))
        r = rate(beta)
        if abs(r - target_alpha) <= 0.1 * tol:
            break
        if r > target_alpha:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return Temperature(beta, target_alpha, r)


@dataclass(frozen=True)
class AnnealingSchedule:
    """Per-layer survival targets and regulariser matrices.

    ``kind="apf"`` holds the survival target at 0.5 in every layer.
    ``kind="power"`` uses ``alpha_m = eta * lam**m`` for ``m = 1..n_layers``.
    ``xi`` holds the diagonal of the base regulariser matrix; it is only
    needed by :func:`regularizer_at`.
    """

    kind: str
    n_layers: int
    eta: float = 0.5
    lam: float = 0.9
    xi: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("apf", "power"):
            raise ValueError(f"schedule kind must be 'apf' or 'power', got {self.kind!r}")
        object.__setattr__(self, "n_layers", check_positive_int(self.n_layers, "n_layers"))
        object.__setattr__(self, "eta", check_open_unit(self.eta, "eta"))
        object.__setattr__(self, "lam", check_open_unit(self.lam, "lambda"))
        if self.xi is not None:
            xi = np.asarray(self.xi, dtype=np.float64)
            if xi.ndim == 2:
                if np.count_nonzero(xi - np.diag(np.diag(xi))):
                    raise ValueError("xi must be diagonal")
                xi = np.diag(xi)
            xi = np.atleast_1d(xi).copy()
            if xi.ndim != 1 or not np.all(xi > 0) or not np.all(np.isfinite(xi)):
                raise ValueError("xi must have strictly positive finite diagonal entries")
            xi.flags.writeable = False
            object.__setattr__(self, "xi", xi)

    @classmethod
    def apf_simple(cls, n_layers, xi=None):
        return cls("apf", n_layers, xi=xi)

    @classmethod
    def power_law(cls, eta, lam, n_layers, xi=None):
        return cls("power", n_layers, eta=eta, lam=lam, xi=xi)

    def with_xi(self, xi):
        return AnnealingSchedule(self.kind, self.n_layers, self.eta, self.lam, xi)

    def __eq__(self, other):
        if not isinstance(other, AnnealingSchedule):
            return NotImplemented
        same_xi = (self.xi is None and other.xi is None) or (
            self.xi is not None and other.xi is not None and np.array_equal(self.xi, other.xi)
        )
        return (self.kind, self.n_layers, self.eta, self.lam) == (
            other.kind, other.n_layers, other.eta, other.lam
        ) and same_xi

    __hash__ = None


def schedule_alphas(schedule):
    """Survival-rate targets ``alpha_1 .. alpha_M`` as an array."""
    m = np.arange(1, schedule.n_layers + 1)
    if schedule.kind == "apf":
        return np.full(m.shape, 0.5)
    return schedule.eta * schedule.lam ** m


def regularizer_at(schedule, m):
    """Diagonal regulariser ``alpha_m**2 * xi xi^T`` for layer ``m`` (1-based)."""
    if schedule.xi is None:
        raise ValueError("schedule has no base regulariser xi")
    if not 1 <= m <= schedule.n_layers:
        raise ValueError(f"layer must be in 1..{schedule.n_layers}, got {m}")
    alpha = schedule_alphas(schedule)[m - 1]
    return np.diag(alpha * alpha * schedule.xi ** 2)
