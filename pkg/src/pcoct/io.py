"""CSV and summary writers.

Floats are written with 17 significant digits so repeated runs (and other
implementations) produce byte-identical bodies from identical numbers.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import yaml


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_trace_csv(path, trace) -> None:
    _write_rows(path, ("T", "z_re", "z_im", "envelope"),
                zip(trace.delays, trace.values.real, trace.values.imag,
                    trace.envelope))


def write_response_csv(path, omega, values) -> None:
    values = np.asarray(values, dtype=complex)
    _write_rows(path, ("omega", "value_re", "value_im"),
                zip(omega, values.real, values.imag))


def write_budget_csv(path, budget) -> None:
    _write_rows(path, ("term", "value", "share"), budget.as_rows())


def write_trials_csv(path, experiment) -> None:
    rows = zip(range(experiment.n_trials), experiment.trial_seeds,
               experiment.trial_averages)
    _write_rows(path, ("trial_id", "seed", "i_avg"), rows)


def write_dispersion_csv(path, results) -> None:
    header = ("modality", "orders", "coefficients", "max_deviation",
              "cancelled", "peak_shift", "recentered_deviation",
              "width", "width_ratio")
    rows = []
    for r in results:
        orders = ";".join(str(k) for k in sorted(r.coefficients))
        coeffs = ";".join(fmt(r.coefficients[k]) for k in sorted(r.coefficients))
        rows.append((r.modality, orders, coeffs, r.max_deviation,
                     int(r.cancelled), r.peak_shift, r.recentered_deviation,
                     "" if r.width is None else fmt(r.width),
                     "" if r.width_ratio is None else fmt(r.width_ratio)))
    _write_rows(path, header, rows)


def plain(obj):
    """Recursively convert numpy scalars/arrays and tuples for YAML."""
    if isinstance(obj, dict):
        return {k: plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_summary(path, summary: dict) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(plain(summary), fh, sort_keys=False,
                       default_flow_style=False)
