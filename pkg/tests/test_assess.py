import random

import pytest

from oracles import linear_scan
from scenarios import scenario
from elastisim.assess import (AssessmentError, SloSpec, _median_verdict, Trial,
                              find_capacity, max_probes, meets_slo, simulation_runner)
from elastisim.stats import InsufficientDataError


def test_meets_slo_examples():
    assert meets_slo([100] * 100) == (True, 100)
    ok, v = meets_slo([1001] * 100)
    assert not ok and v == 1001
    assert meets_slo([1000] * 20)[0]  # boundary passes
    ok, _ = meets_slo([10] * 94 + [5000] * 6)
    assert not ok
    with pytest.raises(InsufficientDataError):
        meets_slo([])


def test_meets_slo_custom_percentile():
    slo = SloSpec(percentile=50, threshold_ms=20)
    assert meets_slo([10, 20, 30], slo) == (True, 20)


def _const_runner(threshold, calls=None):
    def run(devices):
        if calls is not None:
            calls.append(devices)
        return [500.0 if devices <= threshold else 2000.0]
    return run


def test_always_pass_and_always_fail():
    r = find_capacity(100, 1000, 100, _const_runner(10**6))
    assert r.hi_pass and r.max_devices == 1000 and r.probes == 1
    r = find_capacity(100, 1000, 100, _const_runner(0))
    assert r.lo_fail and r.max_devices == 100 and r.probes == 2


def test_matches_linear_scan_on_random_thresholds():
    rng = random.Random(3)
    for _ in range(300):
        step = rng.choice([1, 10, 50, 100])
        lo = rng.randint(0, 20) * step
        hi = lo + rng.randint(1, 200) * step
        thr = rng.randint(lo, hi)
        calls = []
        res = find_capacity(lo, hi, step, _const_runner(thr, calls))
        expect = linear_scan(lo, hi, step, lambda d: d <= thr)
        if expect is None:
            assert res.lo_fail
        else:
            assert res.max_devices == expect
        assert len(calls) <= max_probes(lo, hi, step)
        assert len(set(calls)) == len(calls)


def test_grid_snapping_and_bad_ranges():
    r = find_capacity(150, 1050, 100, _const_runner(640))
    assert r.max_devices == 600
    with pytest.raises(ValueError):
        find_capacity(100, 100, 100, _const_runner(1))
    with pytest.raises(ValueError):
        find_capacity(110, 190, 100, _const_runner(1))
    with pytest.raises(ValueError):
        find_capacity(0, 100, 0, _const_runner(1))


def test_median_verdict_over_seeds():
    def run(devices):
        # seed 2 is unlucky everywhere; seeds 0 and 1 pass up to 500
        return [(s, [900.0 if devices <= 500 and s != 2 else 1500.0]) for s in range(3)]
    r = find_capacity(100, 1000, 100, run)
    assert r.max_devices == 500
    assert len(r.trials) == 3 * r.probes
    assert _median_verdict([Trial(1, 0, True), Trial(1, 0, False)]) is False
    assert _median_verdict([Trial(1, 0, True)] * 2 + [Trial(1, 0, False)]) is True


def test_error_keeps_partial_trials():
    def run(devices):
        if devices < 1000:
            raise RuntimeError("boom")
        return [5000.0]
    with pytest.raises(AssessmentError) as info:
        find_capacity(100, 1000, 100, run)
    assert [t.devices for t in info.value.trials] == [1000]


def test_summary_and_rows():
    r = find_capacity(100, 400, 100, _const_runner(250), name="x")
    s = r.summary_dict()
    assert s["name"] == "x" and s["max_devices"] == 200
    assert [c["devices"] for c in s["curve"]] == sorted(r.verdicts)
    assert r.csv_rows()[0][2] in ("true", "false")


def test_simulation_runner_is_seeded():
    cfg = scenario(workload={"devices": 5, "ramp_up_s": 2, "send_period_s": 5,
                             "duration_s": 20}, horizon_s=20, variability="paper-bwcloud")
    runner = simulation_runner(cfg, seeds=[0, 1])
    a = runner(10)
    assert [s for s, _ in a] == [0, 1]
    assert a == runner(10)
    assert a[0][1] != a[1][1]
