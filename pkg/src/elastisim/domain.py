"""Core vocabulary shared by the simulator: resources, pods, nodes, messages."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

MILLICORES_PER_VCPU = 1000
DEFAULT_SHARES = 1024
MIN_SHARES = 2


class DomainError(ValueError):
    """Raised when an argument lies outside an operation's domain."""


class QoSClass(str, enum.Enum):
    GUARANTEED = "Guaranteed"
    BURSTABLE = "Burstable"
    BEST_EFFORT = "BestEffort"


@dataclass(frozen=True)
class ResourceSpec:
    """Container requests/limits. CPU in millicores, memory in bytes."""

    cpu_request: Optional[float] = None
    cpu_limit: Optional[float] = None
    mem_request: Optional[int] = None
    mem_limit: Optional[int] = None

    def __post_init__(self):
        if self.cpu_request is not None and self.cpu_request < 0:
            raise DomainError("cpu_request must be >= 0")
        if self.cpu_limit is not None:
            if self.cpu_limit < 0:
                raise DomainError("cpu_limit must be >= 0")
            if self.cpu_request is not None and self.cpu_limit < self.cpu_request:
                raise DomainError("cpu_limit must be >= cpu_request")
        if (self.mem_limit is not None and self.mem_request is not None
                and self.mem_limit < self.mem_request):
            raise DomainError("mem_limit must be >= mem_request")

    @property
    def effective_cpu_request(self) -> float:
        # kubernetes defaults a missing request to the limit
        if self.cpu_request is not None:
            return self.cpu_request
        if self.cpu_limit is not None:
            return self.cpu_limit
        return 0.0


@dataclass(frozen=True)
class PodSpec:
    id: str
    deployment: str
    resources: ResourceSpec = field(default_factory=ResourceSpec)
    dedicated_cpu_eligible: bool = False

    @property
    def qos(self) -> QoSClass:
        return qos_class_of(self.resources)


@dataclass(frozen=True)
class NodeSpec:
    name: str
    vcpus: int = 4
    background_millicores: float = 0.0
    # pods not modelled individually (platform daemons, other tenants)
    background_pods: int = 0

    def __post_init__(self):
        if self.vcpus < 1:
            raise DomainError(f"node {self.name}: vcpus must be >= 1")
        if not 0 <= self.background_millicores < self.vcpus * MILLICORES_PER_VCPU:
            raise DomainError(
                f"node {self.name}: background_millicores must be in [0, vcpus*1000)")
        if self.background_pods < 0:
            raise DomainError(f"node {self.name}: background_pods must be >= 0")

    @property
    def capacity_millicores(self) -> int:
        return self.vcpus * MILLICORES_PER_VCPU


@dataclass(frozen=True)
class StageTimestamp:
    stage: str
    enqueue: float
    start: float
    end: float


@dataclass
class Message:
    """One device upload travelling through the pipeline.

    Mutable only while in flight; the simulator appends a StageTimestamp
    as each stage finishes.
    """

    id: int
    created_at: float
    payload_bytes: int
    source_device: int
    stage_timestamps: list = field(default_factory=list)

    def record(self, stage: str, enqueue: float, start: float, end: float) -> None:
        last = self.stage_timestamps[-1].end if self.stage_timestamps else self.created_at
        if not last <= enqueue <= start <= end:
            raise ValueError(
                f"message {self.id}: non-monotone timestamps for stage {stage}")
        self.stage_timestamps.append(StageTimestamp(stage, enqueue, start, end))

    def completed(self, stage: str) -> Optional[float]:
        for ts in self.stage_timestamps:
            if ts.stage == stage:
                return ts.end
        return None


@dataclass(frozen=True)
class MetricSample:
    time: float
    name: str
    value: float
    labels: tuple = ()


def qos_class_of(resources: ResourceSpec) -> QoSClass:
    r = resources
    if (r.cpu_request is None and r.cpu_limit is None
            and r.mem_request is None and r.mem_limit is None):
        return QoSClass.BEST_EFFORT
    cpu_ok = r.cpu_limit is not None and r.cpu_request == r.cpu_limit
    mem_ok = r.mem_limit is not None and r.mem_request == r.mem_limit
    if cpu_ok and mem_ok:
        return QoSClass.GUARANTEED
    return QoSClass.BURSTABLE


def millicores_to_fraction(mc: float, vcpus: int) -> float:
    if vcpus < 1:
        raise DomainError("vcpus must be >= 1")
    if mc < 0:
        raise DomainError("millicores must be >= 0")
    return min(1.0, mc / (vcpus * MILLICORES_PER_VCPU))


def shares_from_request(cpu_request: Optional[float]) -> int:
    """cgroup cpu.shares for a CPU request, using the kubelet conversion."""
    if cpu_request is None:
        return MIN_SHARES
    if cpu_request < 0:
        raise DomainError("cpu_request must be >= 0")
    return max(MIN_SHARES, round(cpu_request * DEFAULT_SHARES / MILLICORES_PER_VCPU))
