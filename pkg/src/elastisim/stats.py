"""Descriptive statistics over response/execution-time samples and file export.

All percentiles in the package go through :func:`percentile` (linear
interpolation between closest ranks, numpy's default method).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.stats import rankdata

from .domain import DomainError

SIG_DIGITS = 6


class InsufficientDataError(ValueError):
    pass


class Summary(NamedTuple):
    mean: float
    median: float
    p95: float
    sd: float


@dataclass(frozen=True)
class SampleSet:
    labels: Mapping = field(default_factory=dict)
    values: tuple = ()
    warmup: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        warm = tuple(bool(w) for w in self.warmup) or (False,) * len(self.values)
        if len(warm) != len(self.values):
            raise ValueError("warmup flags must match values")
        object.__setattr__(self, "warmup", warm)

    @property
    def measured(self) -> list:
        return [v for v, w in zip(self.values, self.warmup) if not w]


def _values(data) -> np.ndarray:
    vals = data.measured if isinstance(data, SampleSet) else list(data)
    return np.asarray(vals, dtype=float)


def percentile(values, q: float) -> float:
    arr = _values(values)
    if arr.size == 0:
        raise InsufficientDataError("percentile of empty sample")
    return float(np.percentile(arr, q, method="linear"))


def summarize(data) -> Summary:
    arr = _values(data)
    if arr.size == 0:
        raise InsufficientDataError("cannot summarize an empty sample")
    sd = float(np.std(arr, ddof=1)) if arr.size >= 2 else float("nan")
    return Summary(math.fsum(arr) / arr.size, percentile(arr, 50), percentile(arr, 95), sd)


def coefficient_of_variation(data) -> float:
    arr = _values(data)
    if arr.size < 2:
        raise InsufficientDataError("cv needs at least two values")
    mean = math.fsum(arr) / arr.size
    if mean == 0:
        raise DomainError("cv undefined for zero mean")
    return float(np.std(arr, ddof=1)) / mean


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = math.fsum(dx * dx)
    syy = math.fsum(dy * dy)
    if sxx == 0 or syy == 0:
        raise DomainError("correlation undefined for zero variance")
    r = math.fsum(dx * dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def correlate(x: Sequence[float], y: Sequence[float], method: str = "pearson") -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length sequences")
    if x.size < 3:
        raise InsufficientDataError("correlation needs at least three pairs")
    if method == "pearson":
        return _pearson(x, y)
    if method == "spearman":
        return _pearson(rankdata(x, method="average"), rankdata(y, method="average"))
    raise ValueError(f"unknown correlation method {method!r}")


# --- export -------------------------------------------------------------------

def fmt(value) -> str:
    """Stable text form: ints as-is, floats with six significant digits."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        return format(float(value), f".{SIG_DIGITS}g")
    return str(value)


def round_sig(value):
    if isinstance(value, float) and math.isfinite(value):
        return float(format(value, f".{SIG_DIGITS}g"))
    return value


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return round_sig(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_csv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_json(path, payload) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def export(report, format: str, path) -> Path:
    """Write ``report`` as CSV (its row table) or JSON (its summary).

    ``report`` provides ``csv_header``, ``csv_rows()`` and ``summary_dict()``.
    """
    if format == "csv":
        return write_csv(path, report.csv_header, report.csv_rows())
    if format == "json":
        return write_json(path, report.summary_dict())
    raise ValueError(f"unknown export format {format!r}")


BENCH_HEADER = ("node", "qos", "demand_ms", "execution", "iteration", "measured_ms", "warmup")
SUMMARY_HEADER = ("node", "qos", "demand_ms", "mean", "median", "p95", "sd", "cv")


def write_benchmark_csv(path, records) -> Path:
    """records: iterable of dicts with the BENCH_HEADER keys."""
    return write_csv(path, BENCH_HEADER, ([r[k] for k in BENCH_HEADER] for r in records))


def read_benchmark_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            out.append(dict(node=r["node"], qos=r["qos"], demand_ms=float(r["demand_ms"]),
                            execution=int(r["execution"]), iteration=int(r["iteration"]),
                            measured_ms=float(r["measured_ms"]),
                            warmup=r.get("warmup", "false") == "true"))
    return out


def group_samples(records) -> list:
    """Group benchmark records into SampleSets keyed by (node, qos, demand)."""
    groups: dict = {}
    for r in records:
        key = (r["node"], r["qos"], float(r["demand_ms"]))
        groups.setdefault(key, []).append(r)
    sets = []
    for (node, qos, demand), rs in sorted(groups.items()):
        sets.append(SampleSet({"node": node, "qos": qos, "demand_ms": demand},
                              [r["measured_ms"] for r in rs],
                              [r.get("warmup", False) for r in rs]))
    return sets


def summary_rows(sample_sets) -> list:
    rows = []
    for s in sample_sets:
        m = summarize(s)
        cv = coefficient_of_variation(s) if len(s.measured) >= 2 else float("nan")
        rows.append((s.labels.get("node", ""), s.labels.get("qos", ""),
                     s.labels.get("demand_ms", ""), m.mean, m.median, m.p95, m.sd, cv))
    return rows
