"""Autoscaling policies and filter-and-score pod placement.

Policies are pure: they look at a ClusterState plus metrics and return a list
of actions. :func:`apply_actions` carries the actions out.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

from .cfs import PlacementError
from .cluster import ClusterState, PlacedPod, PodFactory
from .domain import DomainError, PodSpec


@dataclass(frozen=True)
class HpaPolicy:
    metric: str = "cpu_utilization"
    desired: float = 0.7
    min_replicas: int = 1
    max_replicas: int = 10
    sync_period_s: float = 15.0
    tolerance: float = 0.1

    def __post_init__(self):
        if not 1 <= self.min_replicas <= self.max_replicas:
            raise ValueError("need 1 <= min_replicas <= max_replicas")
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        if self.desired <= 0:
            raise ValueError("desired metric value must be > 0")


@dataclass(frozen=True)
class NodePolicy:
    upper_threshold: float = 0.8
    lower_threshold: float = 0.2
    min_nodes: int = 1
    max_nodes: int = 4
    control_period_s: float = 30.0

    def __post_init__(self):
        for v in (self.upper_threshold, self.lower_threshold):
            if not 0 <= v <= 1:
                raise ValueError("thresholds must lie in [0, 1]")
        if not self.lower_threshold < self.upper_threshold:
            raise ValueError("lower_threshold must be < upper_threshold")
        if not 1 <= self.min_nodes <= self.max_nodes:
            raise ValueError("need 1 <= min_nodes <= max_nodes")


@dataclass(frozen=True)
class AddNode:
    name: str


@dataclass(frozen=True)
class RemoveNode:
    name: str


@dataclass(frozen=True)
class ScaleOut:
    deployment: str
    count: int = 1


@dataclass(frozen=True)
class ScaleIn:
    deployment: str
    count: int = 1
    # drain pods from this node first
    prefer_node: Optional[str] = None


@dataclass(frozen=True)
class ScalingEvent:
    time_ms: float
    policy: str
    action: str
    deployment: Optional[str] = None
    node: Optional[str] = None
    replicas_after: Optional[int] = None
    nodes_after: Optional[int] = None
    detail: str = ""

    def to_json(self) -> str:
        d = {"time_ms": self.time_ms, "policy": self.policy, "action": self.action}
        if self.deployment is not None:
            d["deployment"] = self.deployment
        if self.node is not None:
            d["node"] = self.node
        d["replicas_after"] = self.replicas_after
        d["nodes_after"] = self.nodes_after
        if self.detail:
            d["detail"] = self.detail
        return json.dumps(d, sort_keys=False)


_FLOAT_SLACK = 1e-9


def hpa_desired_replicas(current: int, metric_current: float, metric_desired: float,
                         tolerance: float = 0.1, min_replicas: int = 1,
                         max_replicas: Optional[int] = None) -> int:
    if metric_desired <= 0:
        raise DomainError("metric_desired must be > 0")
    if current < 1:
        raise DomainError("current replicas must be >= 1")
    ratio = metric_current / metric_desired
    # _FLOAT_SLACK keeps decimal inputs such as 1.1 from landing on the wrong side
    if abs(ratio - 1.0) <= tolerance + _FLOAT_SLACK:
        return current
    desired = math.ceil(current * ratio - _FLOAT_SLACK)
    desired = max(min_replicas, desired)
    if max_replicas is not None:
        desired = min(max_replicas, desired)
    return desired


def node_policy_step(state: ClusterState, avg_utilization: float,
                     policy: NodePolicy) -> list:
    """One iteration of the node-proportional control loop."""
    if not 0 <= avg_utilization <= 1:
        raise DomainError("avg_utilization must lie in [0, 1]")
    nodes = len(state.app_nodes)
    if avg_utilization > policy.upper_threshold and nodes < policy.max_nodes:
        return [AddNode(state.next_node_name())] + [
            ScaleOut(d) for d in state.app_deployments]
    if avg_utilization < policy.lower_threshold and nodes > policy.min_nodes:
        victim = state.newest_app_node()
        return [ScaleIn(d, prefer_node=victim) for d in state.app_deployments] + [
            RemoveNode(victim)]
    return []


def place_pod(pod: PodSpec, state: ClusterState) -> str:
    """Filter nodes that fit the request, score by least requested ratio."""
    req = pod.resources.effective_cpu_request
    best = None
    for name in sorted(state.app_nodes):
        node = state.nodes[name]
        alloc = node.capacity_millicores
        used = state.requested_mc(name)
        if alloc - used < req:
            continue
        score = (used + req) / alloc
        if best is None or score < best[0]:
            best = (score, name)
    if best is None:
        raise PlacementError(f"no node can host pod {pod.id} ({req} mc)", pod_id=pod.id)
    return best[1]


def hpa_step(state: ClusterState, metrics: Mapping[str, float],
             policies: Mapping[str, HpaPolicy]) -> list:
    actions = []
    for dep in sorted(policies):
        pol = policies[dep]
        if dep not in metrics:
            continue
        current = state.replicas(dep)
        if current < 1:
            continue
        want = hpa_desired_replicas(current, metrics[dep], pol.desired, pol.tolerance,
                                    pol.min_replicas, pol.max_replicas)
        if want > current:
            actions.append(ScaleOut(dep, want - current))
        elif want < current:
            actions.append(ScaleIn(dep, current - want))
    return actions


@dataclass
class ApplyResult:
    events: List[ScalingEvent] = field(default_factory=list)
    added: List[PlacedPod] = field(default_factory=list)
    removed: List[PlacedPod] = field(default_factory=list)
    nodes_added: List[str] = field(default_factory=list)
    nodes_removed: List[str] = field(default_factory=list)


def apply_actions(state: ClusterState, actions, pod_factory: PodFactory,
                  time_ms: float = 0.0, policy: str = "") -> ApplyResult:
    """Mutate ``state``; placement failures drop the action and log an event."""
    res = ApplyResult()

    def log(action, **kw):
        res.events.append(ScalingEvent(time_ms, policy, action,
                                       nodes_after=len(state.app_nodes), **kw))

    for act in actions:
        if isinstance(act, AddNode):
            if state.node_template is None:
                log("add_node_failed", node=act.name, detail="no node template")
                continue
            t = state.node_template
            state.add_node(type(t)(act.name, t.vcpus, t.background_millicores,
                                   t.background_pods))
            res.nodes_added.append(act.name)
            log("add_node", node=act.name)
        elif isinstance(act, RemoveNode):
            if act.name is None or act.name not in state.nodes:
                continue
            evicted = state.remove_node(act.name)
            res.removed.extend(evicted)
            res.nodes_removed.append(act.name)
            log("remove_node", node=act.name)
        elif isinstance(act, ScaleOut):
            for _ in range(act.count):
                pod = pod_factory(act.deployment, state)
                try:
                    node = place_pod(pod, state)
                except PlacementError as exc:
                    log("scale_out_failed", deployment=act.deployment,
                        replicas_after=state.replicas(act.deployment), detail=str(exc))
                    break
                res.added.append(state.bind(pod, node))
                log("scale_out", deployment=act.deployment, node=node,
                    replicas_after=state.replicas(act.deployment))
        elif isinstance(act, ScaleIn):
            for _ in range(act.count):
                victim = None
                if act.prefer_node is not None:
                    on_node = [p for p in state.pods_on(act.prefer_node)
                               if p.spec.deployment == act.deployment]
                    victim = on_node[-1] if on_node else None
                victim = victim or state.newest_pod(act.deployment)
                if victim is None or state.replicas(act.deployment) <= 1:
                    break
                state.unbind(victim.spec.id)
                res.removed.append(victim)
                log("scale_in", deployment=act.deployment, node=victim.node,
                    replicas_after=state.replicas(act.deployment))
        else:
            raise TypeError(f"unknown action {act!r}")
    return res
