"""Synthetic benchmark experiments.

Three studies are provided:

* :func:`run_quadratic_reuse` runs the discard, retain and retain+deep APF
  variants on ``-x^T x / 2`` in 30 dimensions from a fixed start and
  collects the norms of the final estimates.
* :func:`run_scaling` compares parametric annealing with two APF budgets on
  random mixture objectives while sweeping dimension, number of modes and
  search range one at a time.
* :func:`run_sensitivity` sweeps the parametric annealing parameters one at
  a time around the defaults.

Every replicate is an independent work item with its own seeds derived from
``(master seed, sweep index, grid index, replicate)``, so results are
identical for any worker count.  All methods at one grid point see the same
objective draw and the same run seed.  In sensitivity sweeps the objective
prior does not change along the grid, so the grid index is left out of the
seed and neighbouring grid points are compared on common random numbers.
"""

import concurrent.futures
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .annealing import AnnealingSchedule
from .mog import MogObjectivePrior, draw_benchmark_objective
from .objectives import mog_objective, quadratic_objective
from .optimizers import ApfConfig, PaConfig, run_apf, run_apf_retain, run_pa

__all__ = [
    "ApfSettings",
    "BenchmarkResult",
    "ExperimentPlan",
    "ImprovementRow",
    "ObjectiveSettings",
    "PaSettings",
    "QuadraticResult",
    "QuadraticSettings",
    "default_plan",
    "paired_fraction",
    "pooled_std",
    "run_plan",
    "run_quadratic_reuse",
    "run_scaling",
    "run_sensitivity",
    "summarize",
]

KINDS = ("quadratic", "scaling", "sensitivity")
SCALING_SWEEPS = ("dim", "components", "scale")
SENSITIVITY_SWEEPS = ("eta", "lambda", "n_initial", "n_layers", "n_new")
QUADRATIC_CONFIGS = ("discard", "retain", "retain-deep")


@dataclass(frozen=True)
class ObjectiveSettings:
    """Random mixture objective prior plus the search-range heuristic.

    The regulariser base is ``xi = xi_factor * scale`` on every axis and the
    initial diffusion is ``xi xi^T``.
    """

    dim: int = 10
    components: int = 5
    scale: float = 5.0
    wishart_dof_offset: float = 2.0
    xi_factor: float = 0.5

    def prior(self):
        return MogObjectivePrior(self.dim, self.components, self.scale, self.dim + self.wishart_dof_offset)

    def xi(self):
        return np.full(self.dim, self.xi_factor * self.scale)


@dataclass(frozen=True)
class PaSettings:
    n_initial: int = 150
    n_layers: int = 24
    n_new: int = 12
    eta: float = 0.5
    lam: float = 0.9
    survival: str = "ess"
    refine_mode: bool = True

    @property
    def budget(self):
        return self.n_initial + self.n_layers * self.n_new

    @property
    def name(self):
        return f"pa-{self.budget}"

    def config(self, xi):
        xi = np.asarray(xi, dtype=float)
        schedule = AnnealingSchedule.power_law(self.eta, self.lam, self.n_layers, xi)
        return PaConfig(self.n_initial, self.n_layers, self.n_new, schedule, np.diag(xi**2),
                        self.survival, self.refine_mode)


@dataclass(frozen=True)
class ApfSettings:
    name: str
    n_particles: int
    n_layers: int
    decay: float = 0.5
    survival: str = "ess"
    resampling: str = "multinomial"

    @property
    def budget(self):
        return self.n_particles * self.n_layers

    def config(self, diffusion_cov):
        return ApfConfig(self.n_particles, self.n_layers, diffusion_cov, self.decay,
                         self.survival, self.resampling)


@dataclass(frozen=True)
class QuadraticSettings:
    """Sample-reuse experiment; the start state has every coordinate equal to ``start``."""

    dim: int = 30
    start: float = 1.0
    diffusion: float = 1.0
    n_particles: int = 200
    n_layers: int = 5
    decay: float = 0.5
    deep_eta: float = 0.5
    deep_lambda: float = 0.9


DEFAULT_APF = (ApfSettings("apf-1000", 200, 5), ApfSettings("apf-500", 100, 5))
DEFAULT_SWEEPS = {
    "quadratic": (),
    "scaling": (
        ("dim", (2, 5, 10, 20, 30)),
        ("components", (1, 2, 5, 10, 20)),
        ("scale", (1.0, 2.0, 5.0, 10.0, 20.0)),
    ),
    "sensitivity": (
        ("eta", (0.3, 0.4, 0.5, 0.6, 0.7)),
        ("lambda", (0.8, 0.85, 0.9, 0.93, 0.96)),
        ("n_initial", (50, 100, 150, 200, 250)),
        ("n_layers", (8, 16, 24, 32, 40)),
        ("n_new", (4, 8, 12, 16, 20)),
    ),
}
DEFAULT_REPLICATES = {"quadratic": 200, "scaling": 100, "sensitivity": 100}


@dataclass(frozen=True)
class ExperimentPlan:
    """A fully resolved experiment: what to sweep, how often, with which methods."""

    kind: str
    seed: int = 1
    replicates: int = 100
    sweeps: tuple = ()
    objective: ObjectiveSettings = field(default_factory=ObjectiveSettings)
    pa: PaSettings = field(default_factory=PaSettings)
    apf: tuple = DEFAULT_APF
    quadratic: QuadraticSettings = field(default_factory=QuadraticSettings)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        allowed = {"scaling": SCALING_SWEEPS, "sensitivity": SENSITIVITY_SWEEPS}.get(self.kind, ())
        sweeps = tuple((name, tuple(values)) for name, values in self.sweeps)
        for name, values in sweeps:
            if name not in allowed:
                raise ValueError(f"sweep {name!r} not valid for {self.kind}; expected one of {allowed}")
            if not values:
                raise ValueError(f"sweep {name!r} has an empty grid")
        object.__setattr__(self, "sweeps", sweeps)
        object.__setattr__(self, "apf", tuple(self.apf))

    @property
    def methods(self):
        if self.kind == "quadratic":
            return QUADRATIC_CONFIGS
        if self.kind == "sensitivity":
            return (self.pa.name,)
        return (self.pa.name,) + tuple(a.name for a in self.apf)


def default_plan(kind, **overrides):
    """Plan for ``kind`` with every default filled in."""
    plan = ExperimentPlan(kind, replicates=DEFAULT_REPLICATES[kind], sweeps=DEFAULT_SWEEPS[kind])
    return replace(plan, **overrides) if overrides else plan


def _seed(master, *key):
    return np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))


def _parallel_map(func, items, workers):
    if workers is None or workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    chunksize = max(1, len(items) // (4 * workers))
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items, chunksize=chunksize))


def _failure(exc):
    return {"error": f"{type(exc).__name__}: {exc}"}


# ---------------------------------------------------------------------------
# quadratic reuse


@dataclass
class QuadraticResult:
    """Final-estimate norms per configuration, in replicate order."""

    plan: ExperimentPlan
    norms: dict
    eval_counts: dict
    failures: list = field(default_factory=list)


def _quadratic_item(item):
    settings, master, rep = item
    d = settings.dim
    start = np.full(d, float(settings.start))
    config = ApfConfig(settings.n_particles, settings.n_layers, settings.diffusion * np.eye(d), settings.decay)
    deep = AnnealingSchedule.power_law(settings.deep_eta, settings.deep_lambda, settings.n_layers)
    seed = _seed(master, 0, 0, rep)
    runs = {
        "discard": run_apf(quadratic_objective(d), start, config, np.random.default_rng(seed)),
        "retain": run_apf_retain(quadratic_objective(d), start, config, np.random.default_rng(seed)),
        "retain-deep": run_apf_retain(quadratic_objective(d), start, config, np.random.default_rng(seed), deep),
    }
    return {name: (float(np.linalg.norm(r.estimate)), r.eval_count) for name, r in runs.items()}


def run_quadratic_reuse(plan, workers=1):
    """Norms of the APF estimate for the discard, retain and retain+deep variants.

    Each replicate runs all three variants from the same start with the same
    seed.
    """
    items = [(plan.quadratic, plan.seed, rep) for rep in range(plan.replicates)]
    outputs = _parallel_map(_guarded_quadratic, items, workers)
    norms = {name: [] for name in QUADRATIC_CONFIGS}
    evals = {name: [] for name in QUADRATIC_CONFIGS}
    failures = []
    for rep, out in enumerate(outputs):
        if "error" in out:
            failures.append({"sweep": "quadratic", "grid_index": 0, "replicate": rep, "error": out["error"]})
            continue
        for name in QUADRATIC_CONFIGS:
            norms[name].append(out[name][0])
            evals[name].append(out[name][1])
    return QuadraticResult(
        plan,
        {k: np.array(v) for k, v in norms.items()},
        {k: np.array(v, dtype=int) for k, v in evals.items()},
        failures,
    )


def _guarded_quadratic(item):
    try:
        return _quadratic_item(item)
    except Exception as exc:  # reported as a failed replicate
        return _failure(exc)


# ---------------------------------------------------------------------------
# scaling and sensitivity


@dataclass(frozen=True)
class ImprovementRow:
    sweep: str
    grid_value: float
    method: str
    mean_I: float
    std_I: float
    replicates: int
    eval_count: float
    total_evals: int
    std_defined: bool = True


@dataclass
class BenchmarkResult:
    """Aggregated improvement statistics plus the raw per-replicate values.

    ``raw[(sweep, grid_index, method)]`` holds the improvements in replicate
    order, ``evals`` the matching evaluation counts.
    """

    plan: ExperimentPlan
    rows: list
    raw: dict
    evals: dict
    failures: list = field(default_factory=list)

    def row(self, sweep, grid_value, method):
        for r in self.rows:
            if r.sweep == sweep and r.grid_value == grid_value and r.method == method:
                return r
        raise KeyError((sweep, grid_value, method))

    def values(self, sweep, grid_value, method):
        grid = dict(self.plan.sweeps)[sweep]
        return self.raw[(sweep, list(grid).index(grid_value), method)]


def _point_settings(plan, sweep, value):
    obj, pa = plan.objective, plan.pa
    if sweep == "dim":
        obj = replace(obj, dim=int(value))
    elif sweep == "components":
        obj = replace(obj, components=int(value))
    elif sweep == "scale":
        obj = replace(obj, scale=float(value))
    elif sweep == "eta":
        pa = replace(pa, eta=float(value))
    elif sweep == "lambda":
        pa = replace(pa, lam=float(value))
    elif sweep in ("n_initial", "n_layers", "n_new"):
        pa = replace(pa, **{sweep: int(value)})
    return obj, pa


def _mog_item(item):
    obj, pa, apfs, pa_name, obj_seed, run_seed = item
    mog = draw_benchmark_objective(obj.prior(), np.random.default_rng(obj_seed))
    xi = obj.xi()
    start = np.zeros(obj.dim)
    out = {}
    rec = run_pa(mog_objective(mog), start, pa.config(xi), np.random.default_rng(run_seed))
    out[pa_name] = (rec.improvement, rec.eval_count)
    for apf in apfs:
        rec = run_apf(mog_objective(mog), start, apf.config(np.diag(xi**2)), np.random.default_rng(run_seed))
        out[apf.name] = (rec.improvement, rec.eval_count)
    return out


def _guarded_mog(item):
    try:
        return _mog_item(item)
    except Exception as exc:  # reported as a failed replicate
        return _failure(exc)


def _run_mog_study(plan, workers):
    if plan.kind not in ("scaling", "sensitivity"):
        raise ValueError(f"expected a scaling or sensitivity plan, got {plan.kind!r}")
    apfs = plan.apf if plan.kind == "scaling" else ()
    shared_objective = plan.kind == "sensitivity"
    keys, items = [], []
    for s_idx, (sweep, grid) in enumerate(plan.sweeps):
        for g_idx, value in enumerate(grid):
            obj, pa = _point_settings(plan, sweep, value)
            for rep in range(plan.replicates):
                base = (0, 0) if shared_objective else (s_idx, g_idx)
                obj_seed = _seed(plan.seed, *base, rep, 0)
                run_seed = _seed(plan.seed, *base, rep, 1)
                keys.append((sweep, g_idx, rep))
                items.append((obj, pa, apfs, plan.pa.name, obj_seed, run_seed))
    outputs = _parallel_map(_guarded_mog, items, workers)

    raw, evals, failures = {}, {}, []
    for (sweep, g_idx, rep), out in zip(keys, outputs):
        if "error" in out:
            failures.append({"sweep": sweep, "grid_index": g_idx, "replicate": rep, "error": out["error"]})
            continue
        for method, (imp, count) in out.items():
            raw.setdefault((sweep, g_idx, method), []).append(imp)
            evals.setdefault((sweep, g_idx, method), []).append(count)
    raw = {k: np.array(v) for k, v in raw.items()}
    evals = {k: np.array(v, dtype=int) for k, v in evals.items()}

    rows = []
    for sweep, grid in plan.sweeps:
        for g_idx, value in enumerate(grid):
            for method in plan.methods:
                key = (sweep, g_idx, method)
                if key not in raw:
                    continue
                mean, std, defined = summarize(raw[key])
                rows.append(ImprovementRow(sweep, value, method, mean, std, raw[key].size,
                                           float(evals[key].mean()), int(evals[key].sum()), defined))
    return BenchmarkResult(plan, rows, raw, evals, failures)


def run_scaling(plan, workers=1):
    """Mean and deviation of the improvement for PA and the APF budgets over the sweeps."""
    return _run_mog_study(plan, workers)


def run_sensitivity(plan, workers=1):
    """One-at-a-time sweeps of the PA parameters around the base configuration."""
    return _run_mog_study(plan, workers)


def run_plan(plan, workers=1):
    if plan.kind == "quadratic":
        return run_quadratic_reuse(plan, workers)
    if plan.kind == "scaling":
        return run_scaling(plan, workers)
    return run_sensitivity(plan, workers)


# ---------------------------------------------------------------------------
# statistics


def summarize(values):
    """``(mean, unbiased std, std_defined)``; a single value has std 0, flagged undefined."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return math.nan, math.nan, False
    if values.size == 1:
        return float(values[0]), 0.0, False
    return float(values.mean()), float(values.std(ddof=1)), True


def paired_fraction(better, worse):
    """Fraction of paired replicates with ``better > worse``; ties count one half."""
    better, worse = np.asarray(better, dtype=float), np.asarray(worse, dtype=float)
    if better.shape != worse.shape or better.size == 0:
        raise ValueError("paired samples must be non-empty and of equal length")
    return float(np.mean(np.where(better > worse, 1.0, np.where(better == worse, 0.5, 0.0))))


def pooled_std(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.sqrt(0.5 * (a.var(ddof=1) + b.var(ddof=1))))
