"""Discrete-event simulation of the remote-measuring pipeline.

CPU is modelled as a fluid: each node hands out CPU rates to the pods that
have runnable work, using the cgroup fair-share allocation. Rates stay
constant between events (arrivals, completions, quota exhaustion, period
boundaries) and are recomputed whenever the runnable set of a node changes.
A pod that exhausts its quota is throttled until the next period boundary.
"""

from __future__ import annotations

import csv
import heapq
import itertools
import json
import logging
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from . import stats
from .autoscale import (
    ScalingEvent,
    apply_actions,
    hpa_step,
    node_policy_step,
    place_pod,
)
from .cfs import (
    SYSTEM_LEAF,
    PlacementError,
    allocate_fluid,
    build_node_hierarchy,
    reserve_dedicated_cpus,
)
from .cluster import ClusterState, PlacedPod
from .config import STAGES, ConfigError, DeploymentConfig, ScenarioConfig
from .demand import sample_actual_ms
from .domain import MILLICORES_PER_VCPU, Message, MetricSample, NodeSpec, PodSpec
from .workload import generate_arrivals

log = logging.getLogger(__name__)

_EPS = 1e-7

# event kinds; the numeric value only matters for readability of traces
ARRIVAL, NODE, TIMER, DELIVER, TICK, CONTROL, PROVISION = range(7)


class NotReady(LookupError):
    """The requested span of a message has not completed yet."""


def measure_response_time(msg: Message, span: str = "ingress") -> float:
    stage = STAGES[0] if span == "ingress" else STAGES[-1]
    if span not in ("ingress", "end_to_end"):
        raise ValueError(f"unknown span {span!r}")
    end = msg.completed(stage)
    if end is None:
        raise NotReady(f"message {msg.id} has not completed {stage}")
    return end - msg.created_at


class _Job:
    __slots__ = ("msg", "dep", "enqueue", "start", "remaining", "phase", "pod", "cancelled")

    def __init__(self, msg, dep, enqueue):
        self.msg = msg
        self.dep = dep
        self.enqueue = enqueue
        self.start = None
        self.remaining = 0.0
        self.phase = None
        self.pod = None
        self.cancelled = False


class _PodRun:
    __slots__ = ("placed", "dep", "node", "jobs", "cpu_jobs", "rate", "quota_ms",
                 "period_used", "throttled", "reserved", "hist", "cum_used")

    def __init__(self, placed: PlacedPod, dep: DeploymentConfig, period_ms: float,
                 hist_len: int):
        self.placed = placed
        self.dep = dep
        self.node = placed.node
        self.jobs: list = []
        self.cpu_jobs: list = []
        self.rate = 0.0
        lim = placed.spec.resources.cpu_limit
        self.quota_ms = lim / MILLICORES_PER_VCPU * period_ms if lim else None
        self.period_used = 0.0
        self.throttled = False
        self.reserved = 0
        self.hist: deque = deque(maxlen=hist_len)
        self.cum_used = 0.0

    @property
    def id(self) -> str:
        return self.placed.spec.id


class _NodeRun:
    __slots__ = ("spec", "pods", "last_t", "version", "period_used", "bg_rate",
                 "shared_vcpus", "hist")

    def __init__(self, spec: NodeSpec, hist_len: int):
        self.spec = spec
        self.pods: List[_PodRun] = []
        self.last_t = 0.0
        self.version = 0
        self.period_used = 0.0
        self.bg_rate = 0.0
        self.shared_vcpus = spec.vcpus
        self.hist: deque = deque(maxlen=hist_len)


class ResponseSample(tuple):
    __slots__ = ()
    _fields = ("msg_id", "created_ms", "completed_ms", "response_ms")

    def __new__(cls, msg_id, created_ms, completed_ms, response_ms):
        return tuple.__new__(cls, (msg_id, created_ms, completed_ms, response_ms))

    msg_id = property(lambda s: s[0])
    created_ms = property(lambda s: s[1])
    completed_ms = property(lambda s: s[2])
    response_ms = property(lambda s: s[3])


@dataclass
class RunReport:
    seed: int
    span: str
    horizon_ms: float
    warmup_ms: float
    samples: list = field(default_factory=list)
    scaling_events: list = field(default_factory=list)
    metrics: list = field(default_factory=list)
    generated: int = 0
    completed: int = 0
    in_flight: int = 0
    dropped: int = 0
    pipeline_completed: int = 0
    scenario: str = ""
    # (msg_id, created_ms, age_at_horizon_ms) for messages still inside the span
    censored: list = field(default_factory=list)
    messages: list = field(default_factory=list, repr=False, compare=False)

    csv_header = ("msg_id", "created_ms", "completed_ms", "response_ms")

    def csv_rows(self):
        return sorted(self.samples, key=lambda s: s[0])

    def response_times(self, include_warmup: bool = False) -> list:
        return [s[3] for s in sorted(self.samples, key=lambda s: s[0])
                if include_warmup or s[1] >= self.warmup_ms]

    def slo_samples(self) -> list:
        """Measured response times plus a lower bound for unfinished messages.

        A message still in flight at the horizon has taken at least its age,
        so counting it keeps overload from hiding behind survivorship.
        """
        return self.response_times() + [age for _, created, age in sorted(self.censored)
                                         if created >= self.warmup_ms]

    def summary_dict(self) -> dict:
        rts = self.response_times()
        pct = {}
        if rts:
            s = stats.summarize(rts)
            pct = {"mean": s.mean, "p50": s.median, "p95": s.p95,
                   "p99": stats.percentile(rts, 99), "max": max(rts)}
        util = {}
        for m in self.metrics:
            if m.name == "node_millicores":
                util.setdefault(dict(m.labels)["node"], []).append(m.value)
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "span": self.span,
            "horizon_ms": self.horizon_ms,
            "warmup_ms": self.warmup_ms,
            "counts": {"generated": self.generated, "completed": self.completed,
                       "in_flight": self.in_flight, "dropped": self.dropped,
                       "pipeline_completed": self.pipeline_completed,
                       "measured": len(rts), "censored": len(self.censored)},
            "response_ms": pct,
            "slo_p95_ms": stats.percentile(self.slo_samples(), 95) if self.slo_samples() else None,
            "mean_node_millicores": {k: sum(v) / len(v) for k, v in sorted(util.items())},
            "scaling_events": [json.loads(e.to_json()) for e in self.scaling_events],
            "censored": [list(c) for c in sorted(self.censored)],
        }

    # -- file round trip ------------------------------------------------------
    def write(self, out_dir, prefix: str = "run") -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "samples": stats.export(self, "csv", out / f"{prefix}_samples.csv"),
            "summary": stats.export(self, "json", out / f"{prefix}_summary.json"),
            "metrics": stats.write_csv(out / f"{prefix}_metrics.csv",
                                       ("time_ms", "name", "labels", "value"),
                                       ((m.time, m.name, _labels(m.labels), m.value)
                                        for m in self.metrics)),
        }
        ev = out / f"{prefix}_events.jsonl"
        ev.write_text("".join(e.to_json() + "\n" for e in self.scaling_events))
        paths["events"] = ev
        return paths

    @classmethod
    def read(cls, out_dir, prefix: str = "run") -> "RunReport":
        out = Path(out_dir)
        summary = json.loads((out / f"{prefix}_summary.json").read_text())
        with open(out / f"{prefix}_samples.csv", newline="") as fh:
            samples = [ResponseSample(int(r["msg_id"]), float(r["created_ms"]),
                                      float(r["completed_ms"]), float(r["response_ms"]))
                       for r in csv.DictReader(fh)]
        metrics = []
        mpath = out / f"{prefix}_metrics.csv"
        if mpath.exists():
            with open(mpath, newline="") as fh:
                for r in csv.DictReader(fh):
                    metrics.append(MetricSample(float(r["time_ms"]), r["name"],
                                                float(r["value"]), _parse_labels(r["labels"])))
        events = []
        epath = out / f"{prefix}_events.jsonl"
        if epath.exists():
            for line in epath.read_text().splitlines():
                d = json.loads(line)
                events.append(ScalingEvent(d["time_ms"], d["policy"], d["action"],
                                           d.get("deployment"), d.get("node"),
                                           d.get("replicas_after"), d.get("nodes_after"),
                                           d.get("detail", "")))
        c = summary["counts"]
        return cls(seed=summary["seed"], span=summary["span"],
                   horizon_ms=summary["horizon_ms"], warmup_ms=summary["warmup_ms"],
                   samples=samples, scaling_events=events, metrics=metrics,
                   generated=c["generated"], completed=c["completed"],
                   in_flight=c["in_flight"], dropped=c["dropped"],
                   pipeline_completed=c["pipeline_completed"], scenario=summary["scenario"],
                   censored=[tuple(x) for x in summary.get("censored", [])])


def _labels(labels) -> str:
    return ";".join(f"{k}={v}" for k, v in labels)


def _parse_labels(text: str) -> tuple:
    if not text:
        return ()
    return tuple(tuple(kv.split("=", 1)) for kv in text.split(";"))


class Simulation:
    """One run of a scenario. Use :func:`run` unless you need to poke at state."""

    def __init__(self, config: ScenarioConfig, record_metrics: bool = True):
        self.cfg = config
        self.period_ms = config.period_us / 1000.0
        self.horizon_ms = config.horizon_s * 1000.0
        self.now = 0.0
        self.record_metrics = record_metrics
        self._heap: list = []
        self._seq = itertools.count()
        self._msg_ids = itertools.count()
        base = config.seed * 1_000_003
        self.workload_rng = random.Random(base + 1)
        self.demand_rng = random.Random(base + 2)

        self.deps: Dict[str, DeploymentConfig] = {d.name: d for d in config.deployments}
        by_stage = {d.stage: d.name for d in config.deployments}
        self.pipeline = [by_stage[s] for s in STAGES]
        self.queues: Dict[str, deque] = {d: deque() for d in self.pipeline}
        self._pod_counter = {d: itertools.count() for d in self.pipeline}

        window = max(1, round(config.policy.window_s * 1000 / self.period_ms))
        self._hist_len = window
        topo = config.topology
        self.state = ClusterState(nodes={n.name: n for n in topo.nodes},
                                  broker_node=topo.broker_node, db_node=topo.db_node,
                                  app_deployments=tuple(self.pipeline),
                                  node_template=topo.node_template or _template_from(topo))
        self.nodes: Dict[str, _NodeRun] = {
            n: _NodeRun(self.state.nodes[n], window) for n in self.state.app_nodes}
        self.pods: Dict[str, _PodRun] = {}
        self._dirty: set = set()

        self.report = RunReport(seed=config.seed, span=config.span,
                                horizon_ms=self.horizon_ms,
                                warmup_ms=config.warmup_fraction * self.horizon_ms,
                                scenario=config.name)
        self._place_initial()
        for n in self.nodes.values():
            self._refresh_reservations(n)
            self._recompute(n)

    # -- setup ----------------------------------------------------------------
    def _new_pod_spec(self, dep_name: str, state: ClusterState = None) -> PodSpec:
        dep = self.deps[dep_name]
        k = next(self._pod_counter[dep_name])
        return PodSpec(f"{dep_name}-{k}", dep_name, dep.resources, dep.dedicated_cpu_eligible)

    def _place_initial(self):
        for dep in self.cfg.deployments:
            for _ in range(dep.replicas):
                spec = self._new_pod_spec(dep.name)
                try:
                    node = place_pod(spec, self.state)
                except PlacementError as exc:
                    raise ConfigError([f"$.deployments.{dep.name}: {exc}"]) from exc
                self._attach(self.state.bind(spec, node))

    def _attach(self, placed: PlacedPod) -> _PodRun:
        pr = _PodRun(placed, self.deps[placed.spec.deployment], self.period_ms, self._hist_len)
        self.pods[pr.id] = pr
        self.nodes[pr.node].pods.append(pr)
        return pr

    def _refresh_reservations(self, node: _NodeRun):
        specs = [p.placed.spec for p in node.pods]
        try:
            reserved, shared_us = reserve_dedicated_cpus(
                specs, node.spec, self.cfg.topology.static_policy, self.cfg.period_us)
        except PlacementError as exc:
            if self.now == 0 and not self.report.scaling_events:
                raise ConfigError([f"$.topology: {exc}"]) from exc
            # drop the newest reservation request rather than the pod
            reserved, shared_us = reserve_dedicated_cpus(
                [s for s in specs if s.id != exc.pod_id], node.spec,
                self.cfg.topology.static_policy, self.cfg.period_us)
        for p in node.pods:
            p.reserved = reserved.get(p.id, 0)
        node.shared_vcpus = shared_us / self.cfg.period_us

    # -- event plumbing -------------------------------------------------------
    def _push(self, t: float, kind: int, data=None):
        heapq.heappush(self._heap, (t, next(self._seq), kind, data))

    def run(self) -> RunReport:
        arrivals = generate_arrivals(self.cfg.workload, self.workload_rng)
        self._arrivals = iter(arrivals)
        self._next_arrival()
        self._push(self.period_ms, TICK)
        pol = self.cfg.policy
        if pol.kind == "node":
            self._push(pol.node.control_period_s * 1000, CONTROL)
        elif pol.kind == "hpa" and pol.hpa:
            self._push(min(h.sync_period_s for h in pol.hpa.values()) * 1000, CONTROL)
        self.run_until(self.horizon_ms)
        return self.finish()

    def run_until(self, t_end: float):
        heap = self._heap
        while heap and heap[0][0] <= t_end:
            t, _, kind, data = heapq.heappop(heap)
            self.now = t
            if kind == ARRIVAL:
                self._on_arrival(data)
            elif kind == NODE:
                name, version = data
                node = self.nodes.get(name)
                if node is not None and node.version == version:
                    self._settle(node)
            elif kind == TIMER:
                self._on_timer(data)
            elif kind == DELIVER:
                msg, idx, enq = data
                self._enqueue(msg, idx, enq)
            elif kind == TICK:
                self._on_tick()
            elif kind == CONTROL:
                self._on_control()
            elif kind == PROVISION:
                self._apply(data, "node")
            self._flush()
        self.now = max(self.now, t_end)

    def step_period(self) -> float:
        """Advance simulated time by one scheduling period; returns the new time."""
        target = (int(self.now / self.period_ms + _EPS) + 1) * self.period_ms
        if not any(k == TICK for _, _, k, _ in self._heap):
            self._push(target, TICK)
        self.run_until(target)
        return self.now

    def finish(self) -> RunReport:
        rep = self.report
        rep.in_flight = rep.generated - rep.completed - rep.dropped
        stage = STAGES[0] if self.cfg.span == "ingress" else STAGES[-1]
        rep.censored = [(m.id, m.created_at, self.horizon_ms - m.created_at)
                        for m in rep.messages if m.completed(stage) is None]
        return rep

    # -- workload -------------------------------------------------------------
    def _next_arrival(self):
        a = next(self._arrivals, None)
        if a is not None and a.t_ms < self.horizon_ms:
            self._push(a.t_ms, ARRIVAL, a)

    def _on_arrival(self, a):
        msg = Message(next(self._msg_ids), self.now, a.payload_bytes, a.device_id)
        self.report.generated += 1
        self.report.messages.append(msg)
        self._enqueue(msg, 0, self.now)
        self._next_arrival()

    def inject(self, payload_bytes: int = 0, device: int = 0) -> Message:
        """Create a message at the current time, bypassing the workload."""
        msg = Message(next(self._msg_ids), self.now, payload_bytes, device)
        self.report.generated += 1
        self.report.messages.append(msg)
        self._enqueue(msg, 0, self.now)
        self._flush()
        return msg

    # -- queues and workers ---------------------------------------------------
    def _enqueue(self, msg: Message, idx: int, enqueue_t: float, front: bool = False):
        dep = self.pipeline[idx]
        q = self.queues[dep]
        job = _Job(msg, idx, enqueue_t)
        if front:
            q.appendleft(job)
        else:
            cap = self.cfg.queue_capacity
            if cap is not None and len(q) >= cap:
                q.popleft()
                self.report.dropped += 1
            q.append(job)
        self._dispatch(dep)

    def _dispatch(self, dep: str):
        q = self.queues[dep]
        while q:
            free = [p for p in self.pods.values()
                    if p.dep.name == dep and len(p.jobs) < p.dep.workers]
            if not free:
                return
            pod = min(free, key=lambda p: (len(p.jobs), p.placed.seq))
            self._start(q.popleft(), pod)

    def _start(self, job: _Job, pod: _PodRun):
        node = self.nodes[pod.node]
        self._advance(node, self.now)
        job.pod = pod
        job.start = self.now
        pod.jobs.append(job)
        if pod.dep.db_interaction == "read" and self.cfg.db_read_ms > 0:
            job.phase = "read"
            self._push(self.now + self.cfg.db_read_ms, TIMER, job)
        else:
            self._begin_cpu(job)

    def _begin_cpu(self, job: _Job):
        pod = job.pod
        node = self.nodes[pod.node]
        nominal = pod.dep.nominal_ms(job.msg.payload_bytes)
        if nominal <= 0:
            self._after_cpu(job)
            return
        pods_on_node = len(node.pods) + node.spec.background_pods
        job.remaining = sample_actual_ms(nominal, pods_on_node, pod.placed.spec.qos,
                                         self.cfg.variability, self.demand_rng)
        job.phase = "cpu"
        pod.cpu_jobs.append(job)
        self._dirty.add(node.spec.name)

    def _after_cpu(self, job: _Job):
        if job.pod.dep.db_interaction == "write" and self.cfg.db_write_ms > 0:
            job.phase = "write"
            self._push(self.now + self.cfg.db_write_ms, TIMER, job)
        else:
            self._finish(job)

    def _on_timer(self, job: _Job):
        if job.cancelled:
            return
        if job.phase == "read":
            self._advance(self.nodes[job.pod.node], self.now)
            self._begin_cpu(job)
        else:
            self._finish(job)

    def _finish(self, job: _Job):
        pod = job.pod
        pod.jobs.remove(job)
        msg = job.msg
        stage = STAGES[job.dep]
        msg.record(stage, job.enqueue, job.start, self.now)
        span_stage = STAGES[0] if self.cfg.span == "ingress" else STAGES[-1]
        if stage == span_stage:
            self.report.completed += 1
            self.report.samples.append(
                ResponseSample(msg.id, msg.created_at, self.now, self.now - msg.created_at))
        if job.dep + 1 < len(STAGES):
            delay = self.cfg.broker_delay_ms
            if delay > 0:
                self._push(self.now + delay, DELIVER, (msg, job.dep + 1, self.now))
            else:
                self._enqueue(msg, job.dep + 1, self.now)
        else:
            self.report.pipeline_completed += 1
        self._dispatch(pod.dep.name)

    # -- CPU fluid ------------------------------------------------------------
    def _advance(self, node: _NodeRun, t: float):
        dt = t - node.last_t
        if dt <= 0:
            return
        for pod in node.pods:
            if pod.rate > 0 and pod.cpu_jobs:
                per_job = pod.rate / len(pod.cpu_jobs) * dt
                for job in pod.cpu_jobs:
                    job.remaining -= per_job
                used = pod.rate * dt
                pod.period_used += used
                pod.cum_used += used
                node.period_used += used
        node.period_used += node.bg_rate * dt
        node.last_t = t
        self._dirty.add(node.spec.name)

    def _settle(self, node: _NodeRun):
        """Advance ``node`` to now and act on completions and quota exhaustion."""
        self._advance(node, self.now)
        done = []
        for pod in node.pods:
            if pod.quota_ms is not None and pod.period_used >= pod.quota_ms - _EPS:
                pod.throttled = True
            for job in pod.cpu_jobs:
                if job.remaining <= _EPS:
                    done.append(job)
        for job in done:
            job.pod.cpu_jobs.remove(job)
            job.remaining = 0.0
        for job in done:
            self._after_cpu(job)
        self._dirty.add(node.spec.name)

    def _recompute(self, node: _NodeRun):
        period_us = self.cfg.period_us
        bg_cpus = node.spec.background_millicores / MILLICORES_PER_VCPU
        shared, demand_total = [], bg_cpus
        for pod in node.pods:
            n = len(pod.cpu_jobs)
            if pod.throttled or n == 0:
                pod.rate = 0.0
            elif pod.reserved:
                pod.rate = float(min(n, pod.reserved))
            else:
                shared.append(pod)
                demand_total += n
        if demand_total <= node.shared_vcpus + 1e-12:
            for pod in shared:
                pod.rate = float(len(pod.cpu_jobs))
            node.bg_rate = bg_cpus
        else:
            root = build_node_hierarchy(
                [p.placed.spec for p in shared],
                {p.id: len(p.cpu_jobs) * period_us for p in shared},
                period_us, background_us=bg_cpus * period_us, with_quota=False)
            grants = allocate_fluid(root, node.shared_vcpus * period_us)
            for pod in shared:
                pod.rate = grants.get(pod.id, 0.0) / period_us
            node.bg_rate = grants.get(SYSTEM_LEAF, 0.0) / period_us
        # next internal event on this node
        nxt = None
        for pod in node.pods:
            if pod.rate <= 0:
                continue
            per_job = pod.rate / len(pod.cpu_jobs)
            for job in pod.cpu_jobs:
                t = job.remaining / per_job
                if nxt is None or t < nxt:
                    nxt = t
            if pod.quota_ms is not None:
                t = (pod.quota_ms - pod.period_used) / pod.rate
                if nxt is None or t < nxt:
                    nxt = t
        node.version += 1
        if nxt is not None:
            self._push(self.now + max(nxt, 0.0), NODE, (node.spec.name, node.version))

    def _flush(self):
        while self._dirty:
            names = sorted(self._dirty)
            self._dirty.clear()
            for name in names:
                node = self.nodes.get(name)
                if node is not None:
                    self._recompute(node)

    # -- periodic bookkeeping -------------------------------------------------
    def _on_tick(self):
        t = self.now
        for node in self.nodes.values():
            self._settle(node)
        for name, node in self.nodes.items():
            mc = node.period_used / self.period_ms * MILLICORES_PER_VCPU
            node.hist.append(mc)
            if self.record_metrics:
                self.report.metrics.append(
                    MetricSample(t, "node_millicores", mc, (("node", name),)))
            node.period_used = 0.0
            for pod in node.pods:
                pod.hist.append(pod.period_used / self.period_ms * MILLICORES_PER_VCPU)
                pod.period_used = 0.0
                pod.throttled = False
            self._dirty.add(name)
        if self.record_metrics:
            for dep in self.pipeline:
                self.report.metrics.append(
                    MetricSample(t, "queue_depth", float(len(self.queues[dep])),
                                 (("stage", self.deps[dep].stage),)))
        nxt = t + self.period_ms
        if nxt <= self.horizon_ms + _EPS:
            self._push(nxt, TICK)

    def node_utilization(self) -> float:
        """Average fraction of app-node capacity used over the trailing window."""
        fracs = []
        for node in self.nodes.values():
            if node.hist:
                avg = sum(node.hist) / len(node.hist)
                fracs.append(min(1.0, avg / node.spec.capacity_millicores))
        return sum(fracs) / len(fracs) if fracs else 0.0

    def deployment_utilization(self) -> dict:
        """Average pod CPU use relative to request, per deployment."""
        out = {}
        for dep in self.pipeline:
            vals = []
            for p in self.pods.values():
                req = p.placed.spec.resources.effective_cpu_request
                if p.dep.name == dep and p.hist and req > 0:
                    vals.append(sum(p.hist) / len(p.hist) / req)
            if vals:
                out[dep] = sum(vals) / len(vals)
        return out

    def _on_control(self):
        pol = self.cfg.policy
        if pol.kind == "node":
            actions = node_policy_step(self.state, self.node_utilization(), pol.node)
            period = pol.node.control_period_s
            if actions:
                delay = pol.provisioning_delay_s * 1000
                if delay > 0:
                    self._push(self.now + delay, PROVISION, actions)
                else:
                    self._apply(actions, "node")
        else:
            actions = hpa_step(self.state, self.deployment_utilization(), pol.hpa)
            period = min(h.sync_period_s for h in pol.hpa.values())
            if actions:
                self._apply(actions, "hpa")
        if self.record_metrics:
            for dep, n in self.state.deployments.items():
                self.report.metrics.append(
                    MetricSample(self.now, "replicas", float(n), (("deployment", dep),)))
        self._push(self.now + period * 1000, CONTROL)

    def _apply(self, actions, policy: str):
        for node in self.nodes.values():
            self._settle(node)
        res = apply_actions(self.state, actions, self._new_pod_spec, self.now, policy)
        self.report.scaling_events.extend(res.events)
        for name in res.nodes_added:
            self.nodes[name] = _NodeRun(self.state.nodes[name], self._hist_len)
            self.nodes[name].last_t = self.now
        requeue = []
        for placed in res.removed:
            pr = self.pods.pop(placed.spec.id, None)
            if pr is None:
                continue
            node = self.nodes.get(pr.node)
            if node is not None:
                node.pods.remove(pr)
                self._dirty.add(pr.node)
            for job in pr.jobs:
                job.cancelled = True
                requeue.append(job)
        for name in res.nodes_removed:
            self.nodes.pop(name, None)
        for placed in res.added:
            self._attach(placed)
        for name in {p.node for p in res.added} | {p.node for p in res.removed}:
            if name in self.nodes:
                self._refresh_reservations(self.nodes[name])
                self._dirty.add(name)
        # interrupted work restarts from scratch at the head of its queue
        for job in sorted(requeue, key=lambda j: (j.enqueue, j.msg.id), reverse=True):
            self._enqueue(job.msg, job.dep, job.enqueue, front=True)
        for dep in self.pipeline:
            self._dispatch(dep)


def _template_from(topo) -> Optional[NodeSpec]:
    dedicated = {topo.broker_node, topo.db_node}
    for n in topo.nodes:
        if n.name not in dedicated:
            return n
    return None


def run(scenario: ScenarioConfig, record_metrics: bool = True) -> RunReport:
    return Simulation(scenario, record_metrics).run()
