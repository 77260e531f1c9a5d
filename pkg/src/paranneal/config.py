"""Flat ``key = value`` experiment configuration with ``[section]`` headers.

Example::

    kind = scaling
    seed = 7
    replicates = 50

    [objective]
    dim = 10

    [sweep]
    dim = 2, 5, 10

    [pa]
    eta = 0.4
    lambda = 0.85

    [apf-500]
    n_particles = 100
    n_layers = 5

Keys before the first header are top-level; PA keys (``eta``, ``lambda``,
``n_initial``, ``n_layers``, ``n_new``) are also accepted there.  Sections
named ``apf-<name>`` override or add APF methods.  ``#`` starts a comment.
Parsing materialises every default so the returned plan is complete.
"""

from dataclasses import dataclass, field, fields, replace

from .benchmark import (
    DEFAULT_APF,
    DEFAULT_REPLICATES,
    DEFAULT_SWEEPS,
    SCALING_SWEEPS,
    SENSITIVITY_SWEEPS,
    ApfSettings,
    ExperimentPlan,
    ObjectiveSettings,
    PaSettings,
    QuadraticSettings,
)
from .exceptions import ConfigError
from .mog import MixtureOfGaussians

__all__ = ["SingleRunSpec", "format_config", "parse_config", "METHODS", "OBJECTIVES"]

METHODS = ("pa", "apf", "apf-retain", "apf-retain-deep")
OBJECTIVES = ("quadratic", "mog-from-seed", "mog")
SURVIVAL = ("ess", "unique")
RESAMPLING = ("multinomial", "systematic")


@dataclass(frozen=True)
class SingleRunSpec:
    """One optimisation run on a built-in or inline objective."""

    method: str = "pa"
    objective: str = "quadratic"
    seed: int = 1
    objective_seed: int = 0
    start: tuple = (0.0,)
    objective_settings: ObjectiveSettings = field(default_factory=lambda: ObjectiveSettings(dim=3))
    pa: PaSettings = field(default_factory=PaSettings)
    apf: ApfSettings = field(default_factory=lambda: ApfSettings("apf", 100, 5))
    deep_eta: float = 0.5
    deep_lambda: float = 0.9
    mog: MixtureOfGaussians = None

    @property
    def dim(self):
        return self.mog.dim if self.mog is not None else self.objective_settings.dim


# ---------------------------------------------------------------------------
# value parsers; each raises ValueError with a message naming the key


def _int(lo=1):
    def parse(key, text):
        try:
            value = int(text)
        except ValueError:
            raise ValueError(f"{key} must be an integer, got {text!r}") from None
        if value < lo:
            raise ValueError(f"{key} must be >= {lo}, got {value}")
        return value

    return parse


def _float(key, text):
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"{key} must be a number, got {text!r}") from None


def _positive(key, text):
    value = _float(key, text)
    if not value > 0:
        raise ValueError(f"{key} must be positive, got {text}")
    return value


def _unit(key, text):
    value = _float(key, text)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{key} must be in (0,1)")
    return value


def _nonneg(key, text):
    value = _float(key, text)
    if value < 0:
        raise ValueError(f"{key} must be non-negative, got {text}")
    return value


def _choice(options):
    def parse(key, text):
        if text not in options:
            raise ValueError(f"{key} must be one of {', '.join(options)}; got {text!r}")
        return text

    return parse


def _bool(key, text):
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"{key} must be true or false, got {text!r}")


def _floats(key, text):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError(f"{key} must list at least one number")
    return tuple(_float(key, p) for p in parts)


def _matrix(key, text):
    rows = [_floats(key, row) for row in text.split(";")]
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{key} rows must have equal length")
    return rows


OBJECTIVE_KEYS = {
    "dim": ("dim", _int()),
    "components": ("components", _int()),
    "scale": ("scale", _positive),
    "wishart_dof_offset": ("wishart_dof_offset", _nonneg),
    "xi_factor": ("xi_factor", _positive),
}
PA_KEYS = {
    "n_initial": ("n_initial", _int()),
    "n_layers": ("n_layers", _int()),
    "n_new": ("n_new", _int()),
    "eta": ("eta", _unit),
    "lambda": ("lam", _unit),
    "survival": ("survival", _choice(SURVIVAL)),
    "refine_mode": ("refine_mode", _bool),
}
APF_KEYS = {
    "n_particles": ("n_particles", _int()),
    "n_layers": ("n_layers", _int()),
    "decay": ("decay", _unit),
    "survival": ("survival", _choice(SURVIVAL)),
    "resampling": ("resampling", _choice(RESAMPLING)),
}
QUADRATIC_KEYS = {
    "dim": ("dim", _int()),
    "start": ("start", _float),
    "diffusion": ("diffusion", _positive),
    "n_particles": ("n_particles", _int()),
    "n_layers": ("n_layers", _int()),
    "decay": ("decay", _unit),
    "deep_eta": ("deep_eta", _unit),
    "deep_lambda": ("deep_lambda", _unit),
}
INT_SWEEPS = ("dim", "components", "n_initial", "n_layers", "n_new")
KIND_CHOICES = ("quadratic", "scaling", "sensitivity", "single-run")
TOP_KEYS = {
    "kind": _choice(KIND_CHOICES),
    "seed": _int(0),
    "replicates": _int(),
    "method": _choice(METHODS),
    "objective": _choice(OBJECTIVES),
    "objective_seed": _int(0),
    "start": _floats,
}
SINGLE_RUN_ONLY = ("method", "objective", "objective_seed", "start")


def _sweep_value(key, text, allowed):
    if key not in allowed:
        raise ValueError(f"unknown sweep {key!r}; expected one of {', '.join(allowed)}")
    values = _floats(key, text)
    if key in INT_SWEEPS:
        if any(v != int(v) or v < 1 for v in values):
            raise ValueError(f"{key} sweep values must be positive integers")
        return tuple(int(v) for v in values)
    if key in ("eta", "lambda") and any(not 0 < v < 1 for v in values):
        raise ValueError(f"{key} must be in (0,1)")
    if any(v <= 0 for v in values):
        raise ValueError(f"{key} sweep values must be positive")
    return values


def _tokenize(text):
    """Yield ``(line_no, section, key, value)``; section is None for top-level keys."""
    section = None
    seen = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"malformed section header {raw.strip()!r}", line=line_no)
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=line_no)
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError("missing key before '='", line=line_no)
        if (section, key) in seen:
            raise ConfigError(f"duplicate key {key!r}", key=key, line=line_no)
        seen.add((section, key))
        yield line_no, section, key, value


def parse_config(text):
    """Parse configuration text into an :class:`ExperimentPlan` or :class:`SingleRunSpec`.

    Raises :class:`ConfigError` naming the offending key and line.
    """
    entries = list(_tokenize(text))
    kind = None
    for line_no, section, key, value in entries:
        if section is None and key == "kind":
            kind = _apply(TOP_KEYS["kind"], key, value, line_no)
    if kind is None:
        raise ConfigError("missing required key 'kind'", key="kind")

    top, objective, pa, quadratic, sweeps, apf = {}, {}, {}, {}, {}, {}
    mog = {}
    allowed_sweeps = {"scaling": SCALING_SWEEPS, "sensitivity": SENSITIVITY_SWEEPS}.get(kind, ())
    for line_no, section, key, value in entries:
        if section is None:
            if key in TOP_KEYS:
                if key in SINGLE_RUN_ONLY and kind != "single-run":
                    raise ConfigError(f"key {key!r} only applies to single-run", key=key, line=line_no)
                top[key] = _apply(TOP_KEYS[key], key, value, line_no)
            elif key in PA_KEYS:
                _store(pa, PA_KEYS, key, value, line_no)
            else:
                raise ConfigError(f"unknown key {key!r}", key=key, line=line_no)
        elif section == "objective":
            _store(objective, OBJECTIVE_KEYS, key, value, line_no)
        elif section == "pa":
            _store(pa, PA_KEYS, key, value, line_no)
        elif section == "quadratic" and kind == "quadratic":
            _store(quadratic, QUADRATIC_KEYS, key, value, line_no)
        elif section == "sweep" and allowed_sweeps:
            sweeps[key] = _apply(lambda k, v: _sweep_value(k, v, allowed_sweeps), key, value, line_no)
        elif section == "deep" and kind == "single-run":
            _store(quadratic, {"eta": ("deep_eta", _unit), "lambda": ("deep_lambda", _unit)},
                   key, value, line_no)
        elif section == "mog" and kind == "single-run":
            mog[key] = (line_no, value)
        elif section.startswith("apf") and kind in ("scaling", "single-run"):
            _store(apf.setdefault(section, {}), APF_KEYS, key, value, line_no)
        else:
            raise ConfigError(f"unknown section [{section}] for kind {kind!r}", key=key, line=line_no)

    try:
        obj_settings = ObjectiveSettings(**objective) if kind != "single-run" else \
            ObjectiveSettings(**{"dim": 3, **objective})
        pa_settings = PaSettings(**pa)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    if kind == "single-run":
        return _single_run(top, obj_settings, pa_settings, apf, quadratic, mog)

    sweep_list = tuple(
        (name, sweeps.get(name, dict(DEFAULT_SWEEPS[kind]).get(name))) for name in allowed_sweeps
    )
    apf_list = []
    if kind == "scaling":
        defaults = {a.name: a for a in DEFAULT_APF}
        for name in list(defaults) + [n for n in apf if n not in defaults]:
            base = defaults.get(name)
            values = apf.get(name, {})
            if base is None and "n_particles" not in values:
                raise ConfigError(f"section [{name}] must set n_particles", key="n_particles")
            base = base or ApfSettings(name, values["n_particles"], 5)
            apf_list.append(replace(base, **values))
    return ExperimentPlan(
        kind=kind,
        seed=top.get("seed", 1),
        replicates=top.get("replicates", DEFAULT_REPLICATES[kind]),
        sweeps=sweep_list if kind != "quadratic" else (),
        objective=obj_settings,
        pa=pa_settings,
        apf=tuple(apf_list) if kind == "scaling" else DEFAULT_APF,
        quadratic=QuadraticSettings(**quadratic),
    )


def _apply(parser, key, value, line_no):
    try:
        return parser(key, value)
    except ValueError as exc:
        raise ConfigError(str(exc), key=key, line=line_no) from None


def _store(target, table, key, value, line_no):
    if key not in table:
        raise ConfigError(f"unknown key {key!r}", key=key, line=line_no)
    attr, parser = table[key]
    target[attr] = _apply(parser, key, value, line_no)


def _single_run(top, obj, pa, apf, deep, mog_entries):
    if len(apf) > 1 or (apf and "apf" not in apf):
        raise ConfigError("single-run accepts a single [apf] section", key="apf")
    apf_settings = replace(ApfSettings("apf", 100, 5), **apf.get("apf", {}))
    mog = None
    objective = top.get("objective", "quadratic")
    if objective == "mog":
        mog = _inline_mog(mog_entries)
        obj = replace(obj, dim=mog.dim)
    elif mog_entries:
        raise ConfigError("[mog] section requires objective = mog", key="objective")
    start = top.get("start", (0.0,))
    dim = obj.dim
    if len(start) == 1:
        start = start * dim
    if len(start) != dim:
        raise ConfigError(f"start has {len(start)} entries, expected {dim}", key="start")
    return SingleRunSpec(
        method=top.get("method", "pa"),
        objective=objective,
        seed=top.get("seed", 1),
        objective_seed=top.get("objective_seed", 0),
        start=tuple(start),
        objective_settings=obj,
        pa=pa,
        apf=apf_settings,
        deep_eta=deep.get("deep_eta", 0.5),
        deep_lambda=deep.get("deep_lambda", 0.9),
        mog=mog,
    )


def _inline_mog(entries):
    """``weights = ...``, ``mean.<c> = ...`` and ``cov.<c> = row; row; ...``."""
    if "weights" not in entries:
        raise ConfigError("[mog] section needs 'weights'", key="weights")
    line_no, text = entries["weights"]
    weights = _apply(_floats, "weights", text, line_no)
    means, covs = [], []
    for c in range(len(weights)):
        for prefix, out, parser in (("mean", means, _floats), ("cov", covs, _matrix)):
            key = f"{prefix}.{c}"
            if key not in entries:
                raise ConfigError(f"[mog] section is missing {key!r}", key=key)
            line_no, text = entries[key]
            out.append(_apply(parser, key, text, line_no))
    extra = set(entries) - {"weights"} - {f"{p}.{c}" for p in ("mean", "cov") for c in range(len(weights))}
    if extra:
        key = sorted(extra)[0]
        raise ConfigError(f"unknown key {key!r}", key=key, line=entries[key][0])
    try:
        return MixtureOfGaussians(weights, means, covs)
    except ValueError as exc:
        raise ConfigError(f"invalid inline mixture: {exc}", key="mog") from None


# ---------------------------------------------------------------------------
# serialisation


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def _section(lines, header, obj, table):
    if header:
        lines.append("")
        lines.append(f"[{header}]")
    for key, (attr, _) in table.items():
        lines.append(f"{key} = {_fmt(getattr(obj, attr))}")


def format_config(plan):
    """Render a plan as configuration text; ``parse_config`` reproduces it exactly."""
    if isinstance(plan, SingleRunSpec):
        return _format_single_run(plan)
    lines = [f"kind = {plan.kind}", f"seed = {plan.seed}", f"replicates = {plan.replicates}"]
    if plan.kind == "quadratic":
        _section(lines, "quadratic", plan.quadratic, QUADRATIC_KEYS)
    _section(lines, "objective", plan.objective, OBJECTIVE_KEYS)
    _section(lines, "pa", plan.pa, PA_KEYS)
    if plan.kind != "quadratic":
        lines += ["", "[sweep]"] + [f"{name} = {_fmt(values)}" for name, values in plan.sweeps]
        if plan.kind == "scaling":
            for apf in plan.apf:
                _section(lines, apf.name, apf, APF_KEYS)
    return "\n".join(lines) + "\n"


def _format_single_run(spec):
    lines = [
        "kind = single-run",
        f"method = {spec.method}",
        f"objective = {spec.objective}",
        f"seed = {spec.seed}",
        f"objective_seed = {spec.objective_seed}",
        f"start = {_fmt(tuple(float(v) for v in spec.start))}",
    ]
    obj_table = OBJECTIVE_KEYS if spec.mog is None else {k: v for k, v in OBJECTIVE_KEYS.items() if k != "dim"}
    _section(lines, "objective", spec.objective_settings, obj_table)
    _section(lines, "pa", spec.pa, PA_KEYS)
    _section(lines, "apf", spec.apf, APF_KEYS)
    lines += ["", "[deep]", f"eta = {_fmt(spec.deep_eta)}", f"lambda = {_fmt(spec.deep_lambda)}"]
    if spec.mog is not None:
        lines += ["", "[mog]", f"weights = {_fmt(spec.mog.weights.tolist())}"]
        for c in range(spec.mog.n_components):
            lines.append(f"mean.{c} = {_fmt(spec.mog.means[c].tolist())}")
            lines.append(f"cov.{c} = " + "; ".join(_fmt(r) for r in spec.mog.covariances[c].tolist()))
    return "\n".join(lines) + "\n"


def plan_to_dict(plan):
    """JSON-ready view of a resolved plan or single-run spec."""
    def conv(obj):
        if isinstance(obj, MixtureOfGaussians):
            return obj.to_dict()
        if hasattr(obj, "__dataclass_fields__"):
            return {f.name: conv(getattr(obj, f.name)) for f in fields(obj)}
        if isinstance(obj, (tuple, list)):
            return [conv(v) for v in obj]
        return obj

    out = conv(plan)
    if isinstance(plan, ExperimentPlan):
        out["methods"] = list(plan.methods)
    return out
