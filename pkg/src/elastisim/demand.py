"""Calibrated CPU demand: busy-work kernel, calibration tables, and the
stochastic slowdown model used when simulating cloud execution times.
"""

from __future__ import annotations

import csv
import enum
import functools
import io
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import optimize, special

from .domain import DomainError, QoSClass

CALIBRATION_HEADER = ("time_ms", "iterations", "time_per_iteration")
WARMUP_RUNS = 5
RATE_FIT_MIN_MS = 4.0
_MASK = (1 << 64) - 1


class CalibrationUnstableError(RuntimeError):
    pass


class FitDegenerateError(ValueError):
    pass


class Accuracy(str, enum.Enum):
    LOW = "LOW"
    MEDIUM = "MEDIUM"
    HIGH = "HIGH"

    @property
    def repetitions(self) -> int:
        return {"LOW": 1, "MEDIUM": 3, "HIGH": 7}[self.value]


@dataclass(frozen=True)
class CalibrationRow:
    measured_time_ms: float
    iterations: int

    @property
    def time_per_iteration_ms(self) -> float:
        return self.measured_time_ms / self.iterations


@dataclass(frozen=True)
class CalibrationTable:
    rows: tuple
    fitted_rate_ms_per_iter: float
    accuracy: Accuracy = Accuracy.MEDIUM

    def __post_init__(self):
        if not self.rows:
            raise ValueError("calibration table needs at least one row")
        times = [r.measured_time_ms for r in self.rows]
        iters = [r.iterations for r in self.rows]
        if times != sorted(times):
            raise ValueError("rows must be sorted by measured time")
        if any(b <= a for a, b in zip(iters, iters[1:])):
            raise ValueError("iterations must be strictly increasing")
        if self.fitted_rate_ms_per_iter <= 0:
            raise ValueError("fitted rate must be positive")

    @classmethod
    def from_rows(cls, rows: Iterable[CalibrationRow],
                  accuracy: Accuracy = Accuracy.MEDIUM) -> "CalibrationTable":
        rows = tuple(sorted(rows, key=lambda r: r.measured_time_ms))
        return cls(rows, fit_rate(rows), Accuracy(accuracy))

    def ratio_spread(self, min_ms: float = RATE_FIT_MIN_MS) -> float:
        """(max - min) / min of time-per-iteration over rows >= ``min_ms``."""
        ratios = [r.time_per_iteration_ms for r in self.rows if r.measured_time_ms >= min_ms]
        if not ratios:
            return 0.0
        return (max(ratios) - min(ratios)) / min(ratios)

    def to_csv(self, path) -> None:
        Path(path).write_text(self.to_csv_text(), newline="")

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CALIBRATION_HEADER)
        for r in self.rows:
            w.writerow([repr(float(r.measured_time_ms)), r.iterations,
                        f"{r.time_per_iteration_ms:.6e}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path, accuracy: Accuracy = Accuracy.MEDIUM) -> "CalibrationTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader, ()))
            if header != CALIBRATION_HEADER:
                raise ValueError(f"{path}: unexpected header {header}")
            rows = [CalibrationRow(float(t), int(n)) for t, n, _ in reader]
        return cls.from_rows(rows, accuracy)


def fit_rate(rows: Sequence[CalibrationRow]) -> float:
    # short rows carry timer and call overhead, so they are left out when possible
    long_rows = [r for r in rows if r.measured_time_ms >= RATE_FIT_MIN_MS]
    use = long_rows or list(rows)
    return statistics.median(r.time_per_iteration_ms for r in use)


def busy_kernel(iterations: int) -> int:
    """Fibonacci-style accumulation; every step depends on the previous one."""
    a, b = 0, 1
    for _ in range(iterations):
        a, b = b, (a + b) & _MASK
    return a


_sink = 0


def _timed(kernel, n, timer) -> float:
    global _sink
    start = timer()
    _sink ^= kernel(n)
    return (timer() - start) * 1000.0


def calibrate_live(accuracy=Accuracy.MEDIUM, max_target_ms: float = 1024.0,
                   kernel: Callable[[int], int] = busy_kernel,
                   timer: Callable[[], float] = time.perf_counter,
                   retries: int = 3) -> CalibrationTable:
    """Measure the kernel at roughly doubling target times up to ``max_target_ms``."""
    accuracy = Accuracy(accuracy)
    if max_target_ms < 1:
        raise ValueError("max_target_ms must be >= 1")
    for _ in range(WARMUP_RUNS):
        _timed(kernel, 10_000, timer)

    n = 1_000
    while True:
        t = _timed(kernel, n, timer)
        if t >= 0.5 or n > 1 << 40:
            break
        n *= 2
    rate = max(t, 1e-9) / n

    rows: list = []
    target = 1.0
    while True:
        iters = max(1, round(target / rate))
        if rows and iters <= rows[-1].iterations:
            iters = rows[-1].iterations + 1
        for _attempt in range(retries + 1):
            measured = statistics.median(
                _timed(kernel, iters, timer) for _ in range(accuracy.repetitions))
            if not rows or measured > rows[-1].measured_time_ms:
                break
        else:
            raise CalibrationUnstableError(
                f"timing for {iters} iterations ({measured:.3f} ms) did not exceed "
                f"previous row ({rows[-1].measured_time_ms:.3f} ms) after {retries} retries")
        rows.append(CalibrationRow(measured, iters))
        rate = measured / iters
        if target >= max_target_ms or measured >= max_target_ms:
            break
        target *= 2
    return CalibrationTable.from_rows(rows, accuracy)


def iterations_for(demand_ms: float, table: CalibrationTable) -> int:
    if demand_ms < 0:
        raise DomainError("demand_ms must be >= 0")
    return round(demand_ms / table.fitted_rate_ms_per_iter)


def burn_cpu(demand_ms: float, table: CalibrationTable,
             kernel: Callable[[int], int] = busy_kernel,
             timer: Callable[[], float] = time.perf_counter) -> float:
    """Execute the calibrated amount of busy work; returns wall time in ms."""
    return _timed(kernel, iterations_for(demand_ms, table), timer)


# --- stochastic slowdown model ------------------------------------------------

_Z25 = float(special.ndtri(0.25))
_GRID = (np.arange(4096) + 0.5) / 4096


@dataclass(frozen=True)
class SlowdownShape:
    """Two-sided lognormal anchored at its first quartile, on bounded support.

    slowdown(z) = 1 + scale * (exp(sigma * z) - exp(sigma * z25)) for a
    standard normal z, so slowdown = 1 exactly at the 25th percentile. The
    support is cut to [lower, upper]; the cut keeps a quarter of the mass on
    each side of the anchor in its original proportion.
    """

    sigma: float = 1.0
    lower: float = 0.6
    upper: float = 1.5

    def __post_init__(self):
        if self.sigma <= 0:
            raise DomainError("sigma must be > 0")
        if not 0 < self.lower < 1 < self.upper:
            raise DomainError("need 0 < lower < 1 < upper")

    def _cut(self, scale: float):
        s = self.sigma
        b = math.exp(s * _Z25)
        arg_lo = (self.lower - 1) / scale + b
        p_lo = float(special.ndtr(math.log(arg_lo) / s)) if arg_lo > 0 else 0.0
        p_hi = float(special.ndtr(math.log((self.upper - 1) / scale + b) / s))
        return b, p_lo, p_hi

    def quantile(self, u, scale: float):
        """Vectorised quantile function of the slowdown at a given scale."""
        u = np.asarray(u, dtype=float)
        if scale == 0:
            return np.ones_like(u)
        b, p_lo, p_hi = self._cut(scale)
        p = np.where(u < 0.25,
                     p_lo + (u / 0.25) * (0.25 - p_lo),
                     0.25 + ((u - 0.25) / 0.75) * (p_hi - 0.25))
        z = special.ndtri(p)
        out = 1 + scale * (np.exp(self.sigma * z) - b)
        return np.clip(out, self.lower, self.upper)

    def quantile_scalar(self, u: float, cv: float) -> float:
        """Same as :meth:`quantile` for one uniform, parameterised by cv."""
        if cv == 0:
            return 1.0
        scale, b, p_lo, p_hi = _scalar_params(self, round(float(cv), 9))
        if u < 0.25:
            p = p_lo + (u / 0.25) * (0.25 - p_lo)
        else:
            p = 0.25 + ((u - 0.25) / 0.75) * (p_hi - 0.25)
        p = min(max(p, 1e-300), 1 - 1e-16)
        out = 1 + scale * (math.exp(self.sigma * _STD_NORMAL.inv_cdf(p)) - b)
        return min(max(out, self.lower), self.upper)

    def cv_at(self, scale: float) -> float:
        q = self.quantile(_GRID, scale)
        return float(q.std() / q.mean())

    def max_cv(self) -> float:
        return _max_cv(self)

    def scale_for_cv(self, cv: float) -> float:
        return _scale_for_cv(self, round(float(cv), 9))


_MAX_SCALE = 1e3
_STD_NORMAL = statistics.NormalDist()


@functools.lru_cache(maxsize=4096)
def _scalar_params(shape: SlowdownShape, cv: float):
    scale = _scale_for_cv(shape, cv)
    return (scale, *shape._cut(scale))


@functools.lru_cache(maxsize=64)
def _max_cv(shape: SlowdownShape) -> float:
    return shape.cv_at(_MAX_SCALE)


@functools.lru_cache(maxsize=4096)
def _scale_for_cv(shape: SlowdownShape, cv: float) -> float:
    if cv < 0:
        raise DomainError("cv must be >= 0")
    if cv == 0:
        return 0.0
    top = _max_cv(shape)
    if cv >= top:
        raise DomainError(f"cv {cv} not reachable within [{shape.lower}, {shape.upper}] "
                          f"(max {top:.4f})")
    return optimize.brentq(lambda a: shape.cv_at(a) - cv, 0.0, _MAX_SCALE,
                           xtol=1e-12, rtol=1e-10)


@dataclass(frozen=True)
class VariabilityModel:
    cv_intercept: float
    cv_slope_per_pod: float
    qos_adjustment: Mapping = field(default_factory=lambda: {q: 1.0 for q in QoSClass})
    shape: SlowdownShape = field(default_factory=SlowdownShape)

    def __post_init__(self):
        if any(v < 0 for v in self.qos_adjustment.values()):
            raise DomainError("qos adjustments must be >= 0")

    def cv_for(self, pods_on_node: int, qos: QoSClass) -> float:
        base = max(0.0, self.cv_intercept + self.cv_slope_per_pod * pods_on_node)
        cv = base * self.qos_adjustment.get(QoSClass(qos), 1.0)
        # keep within what the bounded support can express
        return min(cv, 0.999 * self.shape.max_cv())

    def with_(self, **kw) -> "VariabilityModel":
        fields = dict(cv_intercept=self.cv_intercept, cv_slope_per_pod=self.cv_slope_per_pod,
                      qos_adjustment=self.qos_adjustment, shape=self.shape)
        fields.update(kw)
        return VariabilityModel(**fields)


def sample_actual_ms(nominal_ms: float, pods_on_node: int, qos: QoSClass,
                     model: VariabilityModel, rng) -> float:
    """Draw one actual execution time for a nominal CPU demand.

    ``rng`` is a ``random.Random``; exactly one uniform is consumed per call.
    """
    if nominal_ms <= 0:
        raise DomainError("nominal_ms must be > 0")
    u = rng.random()
    cv = model.cv_for(pods_on_node, qos)
    if cv == 0:
        return float(nominal_ms)
    return nominal_ms * model.shape.quantile_scalar(u, cv)


def fit_variability(samples: Sequence, base: Optional[VariabilityModel] = None
                    ) -> VariabilityModel:
    """Least-squares line through (pods on node, cv) observations."""
    pts = [(float(x), float(y)) for x, y in samples]
    if len(pts) < 2 or len({x for x, _ in pts}) < 2:
        raise FitDegenerateError("need at least two distinct occupancy values")
    xs = [x for x, _ in pts]
    ys = [y for _, y in pts]
    mx = math.fsum(xs) / len(xs)
    my = math.fsum(ys) / len(ys)
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    sxy = math.fsum((x - mx) * (y - my) for x, y in pts)
    slope = sxy / sxx
    intercept = my - slope * mx
    if base is None:
        return VariabilityModel(intercept, slope)
    return base.with_(cv_intercept=intercept, cv_slope_per_pod=slope)


def fit_shape_to_quantiles(nominal_ms: float, median_ms: float, p95_ms: float,
                           lower: float = 0.6, upper: float = 1.5):
    """Find (cv, sigma) whose slowdown reproduces a reported median and p95.

    The first quartile is pinned to the nominal demand by construction, so
    two quantiles determine the two free parameters.
    """
    target = np.array([median_ms, p95_ms]) / nominal_ms

    def resid(x):
        shape = SlowdownShape(x[1], lower, upper)
        q = shape.quantile([0.5, 0.95], x[0])
        return q - target

    best = None
    for x0 in ([0.5, 0.5], [0.2, 1.0], [1.0, 1.5]):
        r = optimize.least_squares(resid, x0, bounds=([1e-6, 0.05], [_MAX_SCALE, 5.0]),
                                   xtol=1e-14, ftol=1e-14, gtol=1e-14)
        if best is None or r.cost < best.cost:
            best = r
    scale, sigma = best.x
    shape = SlowdownShape(float(sigma), lower, upper)
    return shape.cv_at(scale), shape


# Table rows: demand 50 ms, best-effort, pooled over all seven nodes.
PAPER_DEMAND50_BEST_EFFORT = dict(nominal_ms=50.0, mean=52.58131, median=52.248,
                                  p95=66.5653, sd=8.965577)
# Mean pods per node over the seven benchmark nodes (77 / 7).
PAPER_REFERENCE_PODS = 11
# Frozen output of fit_shape_to_quantiles on the row above.
PAPER_REFERENCE_CV = 0.1040916
PAPER_SHAPE_SIGMA = 1.0371691
# Occupancy slope chosen so the 17-pod node sees twice the cv of the 7-pod node.
_SLOPE = PAPER_REFERENCE_CV / 14.0

PROFILES = {
    "paper-bwcloud": VariabilityModel(
        cv_intercept=3 * _SLOPE,
        cv_slope_per_pod=_SLOPE,
        shape=SlowdownShape(PAPER_SHAPE_SIGMA, 0.6, 1.5),
    ),
    "none": VariabilityModel(0.0, 0.0),
}

# Calibration run reported for the cloud cluster, usable as a fixture.
REFERENCE_CALIBRATION_ROWS = (
    CalibrationRow(1.00, 537389),
    CalibrationRow(2.00, 1172345),
    CalibrationRow(4.00, 2539921),
    CalibrationRow(7.97, 5062500),
    CalibrationRow(15.85, 10060004),
    CalibrationRow(25.73, 16319999),
    CalibrationRow(63.44, 40159726),
    CalibrationRow(126.68, 79983883),
    CalibrationRow(234.10, 148379031),
    CalibrationRow(541.72, 316609902),
    CalibrationRow(1026.21, 630079016),
)


def profile(name: str) -> VariabilityModel:
    try:
        return PROFILES[name]
    except KeyError:
        raise KeyError(f"unknown variability profile {name!r}; "
                       f"known: {sorted(PROFILES)}") from None
