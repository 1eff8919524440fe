"""Mutable cluster bookkeeping: nodes, placed pods, replica counts."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from .cfs import PlacementError
from .domain import NodeSpec, PodSpec


@dataclass
class PlacedPod:
    spec: PodSpec
    node: str
    seq: int


@dataclass
class ClusterState:
    nodes: Dict[str, NodeSpec] = field(default_factory=dict)
    pods: Dict[str, PlacedPod] = field(default_factory=dict)
    broker_node: Optional[str] = None
    db_node: Optional[str] = None
    app_deployments: tuple = ()
    # template for nodes added by the node-based policy
    node_template: Optional[NodeSpec] = None
    _seq: itertools.count = field(default_factory=itertools.count, repr=False)
    _node_seq: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in self.nodes:
            self._node_seq.setdefault(name, next(self._seq))

    # -- queries --------------------------------------------------------------
    @property
    def dedicated_nodes(self) -> set:
        return {n for n in (self.broker_node, self.db_node) if n is not None}

    @property
    def app_nodes(self) -> List[str]:
        return [n for n in self.nodes if n not in self.dedicated_nodes]

    def replicas(self, deployment: str) -> int:
        return sum(1 for p in self.pods.values() if p.spec.deployment == deployment)

    @property
    def deployments(self) -> Dict[str, int]:
        out = {d: 0 for d in self.app_deployments}
        for p in self.pods.values():
            out[p.spec.deployment] = out.get(p.spec.deployment, 0) + 1
        return out

    def pods_on(self, node: str) -> List[PlacedPod]:
        return sorted((p for p in self.pods.values() if p.node == node), key=lambda p: p.seq)

    def requested_mc(self, node: str) -> float:
        return sum(p.spec.resources.effective_cpu_request for p in self.pods_on(node))

    def newest_pod(self, deployment: str) -> Optional[PlacedPod]:
        cands = [p for p in self.pods.values() if p.spec.deployment == deployment]
        return max(cands, key=lambda p: p.seq) if cands else None

    def newest_app_node(self) -> Optional[str]:
        apps = self.app_nodes
        return max(apps, key=lambda n: self._node_seq[n]) if apps else None

    def next_node_name(self, prefix: str = "app-node") -> str:
        for k in itertools.count(len(self.app_nodes) + 1):
            name = f"{prefix}-{k:02d}"
            if name not in self.nodes:
                return name
        raise AssertionError("unreachable")

    # -- mutation -------------------------------------------------------------
    def add_node(self, spec: NodeSpec) -> None:
        if spec.name in self.nodes:
            raise ValueError(f"duplicate node {spec.name}")
        self.nodes[spec.name] = spec
        self._node_seq[spec.name] = next(self._seq)

    def remove_node(self, name: str) -> List[PlacedPod]:
        """Remove a node and return the pods that were evicted from it."""
        evicted = self.pods_on(name)
        for p in evicted:
            del self.pods[p.spec.id]
        del self.nodes[name]
        return evicted

    def bind(self, pod: PodSpec, node: str) -> PlacedPod:
        if pod.id in self.pods:
            raise ValueError(f"duplicate pod id {pod.id}")
        if node not in self.nodes:
            raise PlacementError(f"unknown node {node}", pod_id=pod.id)
        placed = PlacedPod(pod, node, next(self._seq))
        self.pods[pod.id] = placed
        return placed

    def unbind(self, pod_id: str) -> PlacedPod:
        return self.pods.pop(pod_id)


PodFactory = Callable[[str, ClusterState], PodSpec]
