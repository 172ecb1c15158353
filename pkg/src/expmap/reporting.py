"""Report serialization: JSON reports and CSV extracts.

Reports are written with sorted keys and canonical float formatting, so a
rerun with identical configuration and seed is byte-identical apart from
the wall-clock field.
"""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def report_payload(report, cfg=None):
    verdict = report.verdict
    return _sanitize({
        "schema": 1,
        "experiment_kind": report.experiment_kind,
        "config": cfg if cfg is not None else report.parameters,
        "parameters": report.parameters,
        "statistics": report.statistics,
        "verdict": None if verdict is None else bool(verdict),
        "wall_clock_s": report.wall_clock_s,
    })


def write_report_json(report, path, cfg=None):
    payload = report_payload(report, cfg)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(c) for c in row])
    return path


def _csv_cell(c):
    if isinstance(c, (np.integer,)):
        return int(c)
    if isinstance(c, (np.floating, float)):
        return repr(float(c))
    return c


def density_rows(system):
    h = system.require_density()
    return zip(system.cell_midpoints, h)


def autocovariance_rows(covs):
    return ((lag, c) for lag, c in enumerate(covs))


def csv_extracts(report):
    """(suffix, header, rows) extracts appropriate for the report kind."""
    arrays = report.arrays
    kind = report.experiment_kind
    out = []
    if kind in ("clt", "erdos_fortet") and "normalized_sums" in arrays:
        vals = arrays["normalized_sums"]
        if "a_values" in arrays:
            rows = zip(arrays["a_values"], vals)
            out.append(("samples", ["a", "normalized_sum"], rows))
        else:
            out.append(("samples", ["normalized_sum"],
                        ((v,) for v in vals)))
    if kind == "lil" and "running_max" in arrays:
        ns = arrays["checkpoints"]
        curve = arrays["running_max"]
        rows = []
        for i, n in enumerate(ns):
            rows.append((int(n), float(np.min(curve[i])),
                         float(np.median(curve[i])), float(np.max(curve[i]))))
        out.append(("curve", ["n", "runmax_min", "runmax_median",
                              "runmax_max"], rows))
        out.append(("finals", ["a", "final_running_max"],
                    zip(arrays["a_values"], arrays["finals"])))
    if kind == "block_lln" and "discrepancies" in arrays:
        out.append(("samples", ["a", "discrepancy", "block_sum_squares"],
                    zip(arrays["a_values"], arrays["discrepancies"],
                        arrays["block_sum_squares"])))
    if kind == "typicality" and "finals" in arrays:
        out.append(("samples", ["a", "max_discrepancy"],
                    zip(arrays["a_values"], arrays["finals"])))
        ns = arrays["checkpoints"]
        curve = arrays["discrepancy_curve"]
        rows = [(int(n), float(np.median(curve[i])), float(np.max(curve[i])))
                for i, n in enumerate(ns)]
        out.append(("curve", ["n", "median_discrepancy", "max_discrepancy"],
                    rows))
    if kind == "variance_growth" and "block_sums" in arrays:
        out.append(("samples", ["a", "windowed_sum"],
                    zip(arrays["a_values"], arrays["block_sums"])))
    return out


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
