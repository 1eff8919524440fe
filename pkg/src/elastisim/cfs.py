"""Hierarchical fair-share CPU allocation for one node and one scheduling period.

The model is fluid: a period's capacity is split top-down, each level
distributing its parent's grant among runnable children in proportion to
cpu.shares, never exceeding a child's quota or its aggregate demand, and
handing surplus from satisfied children to the rest (work conserving).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .domain import (
    MILLICORES_PER_VCPU,
    MIN_SHARES,
    NodeSpec,
    PodSpec,
    QoSClass,
    shares_from_request,
)

DEFAULT_PERIOD_US = 100_000

TIER_NAMES = {
    QoSClass.GUARANTEED: "guaranteed",
    QoSClass.BURSTABLE: "burstable",
    QoSClass.BEST_EFFORT: "besteffort",
}
GUARANTEED_TIER_SHARES = 4096
BEST_EFFORT_TIER_SHARES = MIN_SHARES
SYSTEM_LEAF = "system"


class StructureError(ValueError):
    """Malformed cgroup tree."""


class PlacementError(RuntimeError):
    def __init__(self, message, pod_id=None):
        super().__init__(message)
        self.pod_id = pod_id


@dataclass(frozen=True)
class CgroupNode:
    name: str
    shares: int = 1024
    quota_us: Optional[float] = None
    period_us: int = DEFAULT_PERIOD_US
    children: tuple = ()
    runnable_demand_us: float = 0

    def __post_init__(self):
        if self.shares < MIN_SHARES:
            raise StructureError(f"{self.name}: shares must be >= {MIN_SHARES}")
        if self.period_us <= 0:
            raise StructureError(f"{self.name}: period_us must be > 0")
        if self.quota_us is not None and self.quota_us <= 0:
            raise StructureError(f"{self.name}: quota_us must be > 0")
        if self.runnable_demand_us < 0:
            raise StructureError(f"{self.name}: negative demand")
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self):
        if self.is_leaf:
            yield self
        for child in self.children:
            yield from child.leaves()


@dataclass(frozen=True)
class AllocationResult:
    grants: dict
    total_used_us: int
    capacity_us: int
    # grant of every node in the tree, internal nodes included
    node_grants: dict = field(default_factory=dict)

    @property
    def idle_us(self) -> int:
        return self.capacity_us - self.total_used_us


def water_fill(grant, weights: Sequence, caps: Sequence):
    """Split ``grant`` proportionally to ``weights`` subject to per-child caps.

    ``caps`` entries may be None for unbounded children. Works for any
    numeric type closed under division (Fraction for exact results, float
    for speed). Returns allocations in input order.
    """
    n = len(weights)
    alloc = [0] * n
    active = [i for i in range(n) if caps[i] is None or caps[i] > 0]
    remaining = grant
    while active and remaining > 0:
        total_w = sum(weights[i] for i in active)
        level = remaining / total_w
        capped = [i for i in active
                  if caps[i] is not None and caps[i] <= level * weights[i]]
        if not capped:
            for i in active:
                alloc[i] = level * weights[i]
            return alloc
        for i in capped:
            alloc[i] = caps[i]
            remaining -= caps[i]
        capped_set = set(capped)
        active = [i for i in active if i not in capped_set]
    return alloc


def largest_remainder(values: Sequence[Fraction], total: int) -> list:
    """Round exact values to integers summing to ``total``.

    Ties on the remainder go to the earlier entry.
    """
    floors = [math.floor(v) for v in values]
    short = total - sum(floors)
    order = sorted(range(len(values)), key=lambda i: (-(values[i] - floors[i]), i))
    for i in order[:short]:
        floors[i] += 1
    return floors


def _validate(root: CgroupNode) -> None:
    seen_leaves = set()
    path = set()

    def visit(node):
        if id(node) in path:
            raise StructureError(f"cycle through {node.name}")
        path.add(id(node))
        if node.is_leaf:
            if node.name in seen_leaves:
                raise StructureError(f"duplicate leaf name {node.name}")
            seen_leaves.add(node.name)
        for child in node.children:
            visit(child)
        path.discard(id(node))

    visit(root)


def _to_exact(x) -> Optional[Fraction]:
    if x is None or x == math.inf:
        return None
    return Fraction(x)


def _exact_cap(node: CgroupNode, memo: dict) -> Optional[Fraction]:
    if id(node) in memo:
        return memo[id(node)]
    if node.is_leaf:
        cap = _to_exact(node.runnable_demand_us)
    else:
        caps = [_exact_cap(c, memo) for c in node.children]
        cap = None if any(c is None for c in caps) else sum(caps, Fraction(0))
    quota = _to_exact(node.quota_us)
    if quota is not None:
        cap = quota if cap is None else min(cap, quota)
    memo[id(node)] = cap
    return cap


def allocate_period(root: CgroupNode, capacity_us: int) -> AllocationResult:
    """Integer-microsecond grants for one period of ``capacity_us`` CPU time."""
    _validate(root)
    capacity_us = int(capacity_us)
    if capacity_us < 0:
        raise ValueError("capacity_us must be >= 0")
    memo: dict = {}
    root_cap = _exact_cap(root, memo)
    root_grant = capacity_us if root_cap is None else min(capacity_us, math.floor(root_cap))
    grants: dict = {}
    node_grants: dict = {}

    def descend(node: CgroupNode, grant: int):
        node_grants[node.name] = grant
        if node.is_leaf:
            grants[node.name] = grant
            return
        caps = [memo[id(c)] for c in node.children]
        exact = water_fill(Fraction(grant), [c.shares for c in node.children], caps)
        rounded = largest_remainder(exact, math.floor(sum(exact, Fraction(0))))
        for child, g in zip(node.children, rounded):
            descend(child, g)

    descend(root, root_grant)
    return AllocationResult(grants, sum(grants.values()), capacity_us, node_grants)


def allocate_fluid(root: CgroupNode, capacity: float) -> dict:
    """Float variant of :func:`allocate_period` without rounding.

    Returns leaf name -> granted amount. Used on the simulator's hot path.
    """
    caps: dict = {}

    def cap_of(node):
        if node.is_leaf:
            c = node.runnable_demand_us
        else:
            c = sum(cap_of(ch) for ch in node.children)
        if node.quota_us is not None:
            c = min(c, node.quota_us)
        caps[id(node)] = c
        return c

    top = min(capacity, cap_of(root))
    out: dict = {}

    def descend(node, grant):
        if node.is_leaf:
            out[node.name] = grant
            return
        kids = node.children
        alloc = water_fill(grant, [k.shares for k in kids],
                           [None if caps[id(k)] == math.inf else caps[id(k)] for k in kids])
        for k, g in zip(kids, alloc):
            descend(k, g)

    descend(root, top)
    return out


def reserve_dedicated_cpus(pods: Iterable[PodSpec], node: NodeSpec,
                           static_policy: bool = True,
                           period_us: int = DEFAULT_PERIOD_US):
    """Pin eligible Guaranteed pods with whole-vCPU requests to exclusive CPUs.

    Returns ``(reserved, shared_capacity_us)`` where ``reserved`` maps pod id
    to dedicated vCPU count. Raises PlacementError for the first pod whose
    reservation does not fit in the remaining vCPUs.
    """
    reserved: dict = {}
    if not static_policy:
        return reserved, node.vcpus * period_us
    free = node.vcpus
    for pod in pods:
        req = pod.resources.cpu_request
        if not (pod.dedicated_cpu_eligible and pod.qos is QoSClass.GUARANTEED):
            continue
        if req is None or req <= 0 or req % MILLICORES_PER_VCPU:
            continue
        want = int(req // MILLICORES_PER_VCPU)
        if want > free:
            raise PlacementError(
                f"pod {pod.id} needs {want} dedicated vCPUs, node {node.name} has {free} left",
                pod_id=pod.id)
        reserved[pod.id] = want
        free -= want
    return reserved, free * period_us


def build_node_hierarchy(pods: Iterable[PodSpec],
                         demands: Optional[Mapping[str, float]] = None,
                         period_us: int = DEFAULT_PERIOD_US,
                         background_us: float = 0,
                         with_quota: bool = True) -> CgroupNode:
    """Kubelet-style layout: root -> QoS tiers -> one leaf per pod.

    ``background_us`` adds a ``system`` leaf beside the tiers for load that is
    not managed by the kubelet. ``with_quota=False`` leaves quotas off the
    leaves, for callers that enforce them by throttling instead.
    """
    demands = demands or {}
    tiers = {q: [] for q in TIER_NAMES}
    for pod in pods:
        qos = pod.qos
        res = pod.resources
        if qos is QoSClass.BEST_EFFORT:
            shares = MIN_SHARES
        else:
            shares = shares_from_request(res.effective_cpu_request)
        quota = None
        if with_quota and res.cpu_limit is not None and res.cpu_limit > 0:
            quota = res.cpu_limit * period_us / MILLICORES_PER_VCPU
        tiers[qos].append(CgroupNode(pod.id, shares=shares, quota_us=quota,
                                     period_us=period_us,
                                     runnable_demand_us=demands.get(pod.id, 0)))
    burstable_shares = max(MIN_SHARES, sum(c.shares for c in tiers[QoSClass.BURSTABLE]))
    tier_shares = {
        QoSClass.GUARANTEED: GUARANTEED_TIER_SHARES,
        QoSClass.BURSTABLE: burstable_shares,
        QoSClass.BEST_EFFORT: BEST_EFFORT_TIER_SHARES,
    }
    children = [CgroupNode(TIER_NAMES[q], shares=tier_shares[q], period_us=period_us,
                           children=tuple(tiers[q]))
                for q in (QoSClass.GUARANTEED, QoSClass.BURSTABLE, QoSClass.BEST_EFFORT)]
    if background_us > 0:
        children.append(CgroupNode(SYSTEM_LEAF, period_us=period_us,
                                   runnable_demand_us=background_us))
    return CgroupNode("root", period_us=period_us, children=tuple(children))
