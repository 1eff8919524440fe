"""Open workload of devices that connect over a ramp window and send periodically."""

from __future__ import annotations

import csv
import heapq
import math
import random
from dataclasses import dataclass, fields
from typing import Iterator, NamedTuple, Union


class Arrival(NamedTuple):
    device_id: int
    t_ms: float
    payload_bytes: int


@dataclass(frozen=True)
class PayloadRange:
    """Uniform integer payload size in [low, high]."""

    low: int
    high: int

    def draw(self, rng) -> int:
        return rng.randint(self.low, self.high)

    @property
    def mean(self) -> float:
        return (self.low + self.high) / 2


@dataclass(frozen=True)
class LoadProfile:
    devices: int = 0
    ramp_up_s: float = 5.0
    send_period_s: float = 60.0
    payload_bytes: Union[int, PayloadRange] = 1024
    jitter_s: float = 0.0
    duration_s: float = 180.0

    def __post_init__(self):
        if self.devices < 0:
            raise ValueError("devices must be >= 0")
        if self.ramp_up_s < 0:
            raise ValueError("ramp_up_s must be >= 0")
        if self.send_period_s <= 0:
            raise ValueError("send_period_s must be > 0")
        if self.jitter_s < 0:
            raise ValueError("jitter_s must be >= 0")
        if self.duration_s < 0:
            raise ValueError("duration_s must be >= 0")
        if isinstance(self.payload_bytes, PayloadRange):
            if not 0 <= self.payload_bytes.low <= self.payload_bytes.high:
                raise ValueError("payload range must satisfy 0 <= low <= high")
        elif self.payload_bytes < 0:
            raise ValueError("payload_bytes must be >= 0")

    def replace(self, **kw) -> "LoadProfile":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(kw)
        return LoadProfile(**vals)

    @property
    def mean_payload(self) -> float:
        p = self.payload_bytes
        return p.mean if isinstance(p, PayloadRange) else float(p)


def _device_stream(device: int, start_s: float, profile: LoadProfile,
                   rng: random.Random) -> Iterator[Arrival]:
    k = 0
    period, jitter, end = profile.send_period_s, profile.jitter_s, profile.duration_s
    while True:
        t = start_s + k * period
        if t >= end:
            return
        if jitter:
            t = max(0.0, t + rng.uniform(-jitter, jitter))
        p = profile.payload_bytes
        size = p.draw(rng) if isinstance(p, PayloadRange) else int(p)
        # the run covers [0, duration); a send at the horizon never happens
        if t < end:
            yield Arrival(device, t * 1000.0, size)
        k += 1


def generate_arrivals(profile: LoadProfile, rng: random.Random) -> Iterator[Arrival]:
    """Time-ordered stream of sends for every device in the profile.

    Each device gets its own child generator seeded from ``rng`` so that the
    stream of one device does not depend on how many others there are.
    """
    starts = [rng.uniform(0.0, profile.ramp_up_s) if profile.ramp_up_s else 0.0
              for _ in range(profile.devices)]
    seeds = [rng.getrandbits(64) for _ in range(profile.devices)]
    streams = []
    for dev, (start, seed) in enumerate(zip(starts, seeds)):
        dev_rng = random.Random(seed)
        # a device's sends can be reordered by jitter; sort each one locally
        sends = sorted(_device_stream(dev, start, profile, dev_rng), key=lambda a: a.t_ms)
        streams.append(sends)
    return heapq.merge(*streams, key=lambda a: (a.t_ms, a.device_id))


def expected_send_count(profile: LoadProfile, starts_s) -> int:
    """Sends for jitter-free devices with the given start offsets."""
    total = 0
    for s in starts_s:
        if s < profile.duration_s:
            total += math.ceil((profile.duration_s - s) / profile.send_period_s)
    return total


def profile_presets() -> dict:
    return {
        # few test vehicles, many signals at high frequency, started together
        "homologation": LoadProfile(devices=20, ramp_up_s=1.0, send_period_s=5.0,
                                    payload_bytes=256 * 1024, jitter_s=0.5,
                                    duration_s=300.0),
        # a large fleet reporting a handful of signals, connecting at random
        "fleet": LoadProfile(devices=2000, ramp_up_s=60.0, send_period_s=60.0,
                             payload_bytes=2 * 1024, jitter_s=5.0, duration_s=300.0),
        # settings of the scalability runs on the demonstrator
        "scalability": LoadProfile(devices=1000, ramp_up_s=5.0, send_period_s=60.0,
                                   payload_bytes=1024, jitter_s=0.0, duration_s=130.0),
    }


def write_arrivals_csv(arrivals, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["device_id", "t_ms", "payload_bytes"])
        for a in arrivals:
            w.writerow([a.device_id, f"{a.t_ms:.3f}", a.payload_bytes])


def read_arrivals_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [Arrival(int(r["device_id"]), float(r["t_ms"]), int(r["payload_bytes"]))
                for r in reader]
