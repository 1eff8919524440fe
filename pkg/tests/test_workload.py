import random

import pytest

from elastisim.workload import (
    LoadProfile,
    PayloadRange,
    expected_send_count,
    generate_arrivals,
    profile_presets,
    read_arrivals_csv,
    write_arrivals_csv,
)


def test_one_device_three_sends():
    p = LoadProfile(devices=1, ramp_up_s=0, send_period_s=60, duration_s=180)
    arr = list(generate_arrivals(p, random.Random(1)))
    assert [a.t_ms for a in arr] == [0, 60_000, 120_000]
    assert len(arr) == expected_send_count(p, [0.0]) == 3
    ramped = list(generate_arrivals(p.replace(ramp_up_s=5), random.Random(1)))
    assert len(ramped) == 3


def test_starts_spread_over_ramp():
    p = LoadProfile(devices=500, ramp_up_s=5, send_period_s=60, duration_s=50)
    arr = list(generate_arrivals(p, random.Random(2)))
    assert len(arr) == 500
    assert all(0 <= a.t_ms <= 5000 for a in arr)
    assert max(a.t_ms for a in arr) > 4500 and min(a.t_ms for a in arr) < 500


def test_ordered_and_deterministic():
    p = LoadProfile(devices=50, ramp_up_s=10, send_period_s=7, jitter_s=3,
                    payload_bytes=PayloadRange(10, 20), duration_s=60)
    a = list(generate_arrivals(p, random.Random(9)))
    b = list(generate_arrivals(p, random.Random(9)))
    assert a == b
    assert [x.t_ms for x in a] == sorted(x.t_ms for x in a)
    assert all(10 <= x.payload_bytes <= 20 for x in a)
    assert all(x.t_ms >= 0 for x in a)


def test_zero_devices():
    assert list(generate_arrivals(LoadProfile(devices=0), random.Random(0))) == []


def test_validation():
    with pytest.raises(ValueError):
        LoadProfile(devices=-1)
    with pytest.raises(ValueError):
        LoadProfile(send_period_s=0)
    with pytest.raises(ValueError):
        LoadProfile(payload_bytes=PayloadRange(5, 1))


def test_presets():
    pre = profile_presets()
    assert set(pre) == {"homologation", "fleet", "scalability"}
    assert pre["fleet"].devices > pre["homologation"].devices
    assert pre["homologation"].mean_payload > pre["fleet"].mean_payload
    assert pre["scalability"].ramp_up_s == 5 and pre["scalability"].send_period_s == 60


def test_csv_round_trip(tmp_path):
    p = LoadProfile(devices=5, ramp_up_s=1, send_period_s=2, duration_s=6)
    arr = list(generate_arrivals(p, random.Random(3)))
    path = tmp_path / "a.csv"
    write_arrivals_csv(arr, path)
    back = read_arrivals_csv(path)
    assert [(a.device_id, a.payload_bytes) for a in back] == \
        [(a.device_id, a.payload_bytes) for a in arr]
    assert all(abs(x.t_ms - y.t_ms) < 1e-3 for x, y in zip(arr, back))
