"""Plot-ready result files.

Per sweep one long-format table (``grid_value, method, mean_I, std_I,
eval_count, replicates, std_defined``) plus the raw per-replicate values; for
the reuse experiment one raw file of final-estimate norms per configuration.
``metadata.json`` records the resolved configuration, the master seed and the
library version.  Floats are written with ``repr`` so values round-trip
exactly, and the only run-dependent field is the metadata timestamp.
"""

import csv
import datetime
import json
import os

import numpy as np

from . import __version__
from .benchmark import BenchmarkResult, QuadraticResult
from .config import format_config, plan_to_dict

__all__ = ["emit_results", "write_metadata"]

TABLE_COLUMNS = ("grid_value", "method", "mean_I", "std_I", "eval_count", "replicates", "std_defined")
RAW_COLUMNS = ("grid_value", "method", "replicate", "I", "eval_count")
QUADRATIC_SUMMARY_COLUMNS = ("configuration", "median_norm", "mean_norm", "std_norm", "eval_count", "replicates")

INVENTED_DEFAULTS = (
    "Sweep grids, replicate counts, eta/lambda defaults, the Wishart degrees of freedom and the "
    "reuse-experiment start state are library defaults, not values published with the method."
)


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _jsonable(value):
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _write_table(path, columns, rows, fmt):
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(columns)
                for row in rows:
                    writer.writerow([_cell(v) for v in row])
        else:
            records = [{c: _jsonable(v) for c, v in zip(columns, row)} for row in rows]
            with open(path, "w") as fh:
                json.dump({"columns": list(columns), "rows": records}, fh, indent=1)
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_metadata(out_dir, plan, workers, status="running", failures=()):
    """Write ``resolved_config.txt`` and ``metadata.json``; returns the metadata path."""
    os.makedirs(out_dir, exist_ok=True)
    text = format_config(plan)
    _write_text(os.path.join(out_dir, "resolved_config.txt"), text)
    meta = {
        "library": "paranneal",
        "version": __version__,
        "kind": getattr(plan, "kind", "single-run"),
        "master_seed": plan.seed,
        "workers": workers,
        "status": status,
        "failures": list(failures),
        "resolved_config": text,
        "plan": plan_to_dict(plan),
        "invented_defaults": INVENTED_DEFAULTS,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = os.path.join(out_dir, "metadata.json")
    _write_text(path, json.dumps(meta, indent=1, default=_jsonable) + "\n")
    return path


def _write_text(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_results(result, out_dir, fmt="csv", workers=1):
    """Write tables, raw values and metadata for a finished experiment.

    Returns the list of written paths.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if isinstance(result, QuadraticResult):
        summary = []
        for name, norms in result.norms.items():
            evals = result.eval_counts[name]
            rows = [(rep, v) for rep, v in enumerate(norms)]
            written.append(_write_table(os.path.join(out_dir, f"quadratic_{name}.{fmt}"),
                                        ("replicate", "norm"), rows, fmt))
            if norms.size:
                std = float(norms.std(ddof=1)) if norms.size > 1 else 0.0
                summary.append((name, float(np.median(norms)), float(norms.mean()), std,
                                float(evals.mean()), int(norms.size)))
        written.append(_write_table(os.path.join(out_dir, f"quadratic_summary.{fmt}"),
                                    QUADRATIC_SUMMARY_COLUMNS, summary, fmt))
    elif isinstance(result, BenchmarkResult):
        kind = result.plan.kind
        for sweep, grid in result.plan.sweeps:
            rows = [
                (r.grid_value, r.method, r.mean_I, r.std_I, r.eval_count, r.replicates, r.std_defined)
                for r in result.rows if r.sweep == sweep
            ]
            written.append(_write_table(os.path.join(out_dir, f"{kind}_{sweep}.{fmt}"), TABLE_COLUMNS, rows, fmt))
            raw_rows = []
            for g_idx, value in enumerate(grid):
                for method in result.plan.methods:
                    key = (sweep, g_idx, method)
                    if key not in result.raw:
                        continue
                    for rep, (imp, count) in enumerate(zip(result.raw[key], result.evals[key])):
                        raw_rows.append((value, method, rep, imp, count))
            written.append(_write_table(os.path.join(out_dir, f"{kind}_{sweep}_raw.{fmt}"),
                                        RAW_COLUMNS, raw_rows, fmt))
    else:
        raise TypeError(f"cannot emit results of type {type(result).__name__}")
    status = "failed" if result.failures else "complete"
    written.append(write_metadata(out_dir, result.plan, workers, status, result.failures))
    return written
