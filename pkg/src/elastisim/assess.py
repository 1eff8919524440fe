"""SLO checks and binary-search capacity assessment over device counts."""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

from . import stats
from .config import ScenarioConfig, SloConfig
from .stats import InsufficientDataError

SloSpec = SloConfig

TRIAL_HEADER = ("devices", "p95_ms", "pass", "seed")


class AssessmentError(RuntimeError):
    def __init__(self, message, trials=()):
        super().__init__(message)
        self.trials = list(trials)


def meets_slo(samples: Sequence[float], slo: SloSpec = SloSpec()):
    """Return ``(passed, achieved)``; the boundary value itself passes."""
    if len(samples) == 0:
        raise InsufficientDataError("no response-time samples")
    value = stats.percentile(samples, slo.percentile)
    return value <= slo.threshold_ms, value


@dataclass(frozen=True)
class Trial:
    devices: int
    p95_ms: float
    passed: bool
    seed: Optional[int] = None


@dataclass
class CapacityResult:
    max_devices: int
    trials: List[Trial] = field(default_factory=list)
    hi_pass: bool = False
    lo_fail: bool = False
    name: str = ""

    # a verdict is one entry per probed device count (the median seed)
    @property
    def verdicts(self) -> Dict[int, bool]:
        out: Dict[int, list] = {}
        for t in self.trials:
            out.setdefault(t.devices, []).append(t.passed)
        return {d: sum(v) * 2 > len(v) for d, v in out.items()}

    @property
    def probes(self) -> int:
        return len(self.verdicts)

    csv_header = TRIAL_HEADER

    def csv_rows(self):
        return [(t.devices, t.p95_ms, "true" if t.passed else "false",
                 "" if t.seed is None else t.seed) for t in self.trials]

    def summary_dict(self) -> dict:
        curve = {}
        for t in self.trials:
            curve.setdefault(t.devices, []).append(t.p95_ms)
        return {
            "name": self.name,
            "max_devices": self.max_devices,
            "hi_pass": self.hi_pass,
            "lo_fail": self.lo_fail,
            "probes": self.probes,
            "curve": [{"devices": d, "p95_ms": statistics.median(v),
                       "pass": self.verdicts[d]} for d, v in sorted(curve.items())],
        }


# A trial runner maps a device count to a list of (seed, samples) pairs, or
# to a plain list of samples when the runner is deterministic.
TrialRunner = Callable[[int], object]


def _judge(devices: int, outcome, slo: SloSpec) -> List[Trial]:
    if outcome and isinstance(outcome[0], tuple):
        runs = outcome
    else:
        runs = [(None, outcome)]
    return [Trial(devices, *meets_slo(samples, slo)[::-1], seed=seed)
            for seed, samples in runs]


def _median_verdict(trials: Sequence[Trial]) -> bool:
    # passes iff the median trial passes, i.e. a strict majority of seeds pass
    return sum(t.passed for t in trials) * 2 > len(trials)


def max_probes(lo: int, hi: int, step: int) -> int:
    return math.ceil(math.log2(max(2, (hi - lo) / step))) + 2


def find_capacity(lo: int, hi: int, step: int, runner: TrialRunner,
                  slo: SloSpec = SloSpec(), name: str = "") -> CapacityResult:
    """Largest multiple of ``step`` in [lo, hi] whose trial passes.

    Assumes pass/fail is monotone in device count. ``lo`` and ``hi`` are
    snapped inward onto the step grid.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    if not lo < hi:
        raise ValueError("need lo < hi")
    g_lo = math.ceil(lo / step)
    g_hi = math.floor(hi / step)
    if g_lo > g_hi:
        raise ValueError(f"no multiple of {step} in [{lo}, {hi}]")
    res = CapacityResult(max_devices=g_lo * step, name=name)

    def probe(k: int) -> bool:
        devices = k * step
        try:
            outcome = runner(devices)
        except Exception as exc:
            raise AssessmentError(f"trial at {devices} devices failed: {exc}",
                                  res.trials) from exc
        trials = _judge(devices, outcome, slo)
        res.trials.extend(trials)
        return _median_verdict(trials)

    if probe(g_hi):
        res.max_devices = g_hi * step
        res.hi_pass = True
        return res
    if g_lo == g_hi or not probe(g_lo):
        res.max_devices = g_lo * step
        res.lo_fail = True
        return res
    good, bad = g_lo, g_hi
    while bad - good > 1:
        mid = (good + bad) // 2
        if probe(mid):
            good = mid
        else:
            bad = mid
    res.max_devices = good * step
    return res


def _run_one(args):
    from .simcore import run
    config, devices, seed = args
    report = run(config.with_devices(devices).with_seed(seed), record_metrics=False)
    return report.slo_samples()


def simulation_runner(config: ScenarioConfig, seeds: Sequence[int], jobs: int = 1,
                      pool=None) -> TrialRunner:
    """Trial runner that simulates ``config`` once per seed at each device count."""
    seeds = list(seeds)

    def runner(devices: int):
        work = [(config, devices, s) for s in seeds]
        if pool is not None:
            outs = list(pool.map(_run_one, work))
        elif jobs > 1 and len(work) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                outs = list(ex.map(_run_one, work))
        else:
            outs = [_run_one(w) for w in work]
        return list(zip(seeds, outs))

    return runner


def assess_configurations(scenarios: Dict[str, ScenarioConfig], lo: int, hi: int, step: int,
                          seeds: Sequence[int] = (0, 1, 2), slo: Optional[SloSpec] = None,
                          jobs: int = 1) -> Dict[str, CapacityResult]:
    out = {}
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for name, cfg in scenarios.items():
            runner = simulation_runner(cfg, seeds, jobs, pool)
            out[name] = find_capacity(lo, hi, step, runner, slo or cfg.slo, name=name)
    finally:
        if pool is not None:
            pool.shutdown()
    return out


def comparison_rows(results: Dict[str, CapacityResult]) -> list:
    """Flat rows ``(config, devices, p95_ms, pass, seed)`` for plotting."""
    rows = []
    for name, res in results.items():
        for r in res.csv_rows():
            rows.append((name,) + tuple(r))
    return rows
