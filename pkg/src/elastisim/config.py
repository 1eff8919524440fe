"""Scenario configuration: JSON documents validated into dataclasses."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional

from . import demand as demand_mod
from .autoscale import HpaPolicy, NodePolicy
from .demand import SlowdownShape, VariabilityModel
from .domain import NodeSpec, QoSClass, ResourceSpec
from .workload import LoadProfile, PayloadRange, profile_presets

SCHEMA_VERSION = 1
STAGES = ("device-comm", "data-provider", "data-processing")
DB_INTERACTIONS = ("none", "write", "read")
SPANS = ("ingress", "end_to_end")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class DeploymentConfig:
    name: str
    stage: str
    replicas: int = 1
    resources: ResourceSpec = field(default_factory=lambda: ResourceSpec(cpu_request=500))
    workers: int = 1
    base_ms: float = 50.0
    bytes_coefficient: float = 0.0
    db_interaction: str = "none"
    dedicated_cpu_eligible: bool = False

    def nominal_ms(self, payload_bytes: int) -> float:
        return self.base_ms + self.bytes_coefficient * payload_bytes


@dataclass(frozen=True)
class Topology:
    nodes: tuple
    broker_node: Optional[str] = None
    db_node: Optional[str] = None
    static_policy: bool = False
    node_template: Optional[NodeSpec] = None


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "none"
    node: NodePolicy = field(default_factory=NodePolicy)
    hpa: Dict[str, HpaPolicy] = field(default_factory=dict)
    window_s: float = 60.0
    provisioning_delay_s: float = 0.0


@dataclass(frozen=True)
class SloConfig:
    percentile: float = 95.0
    threshold_ms: float = 1000.0
    span: str = "ingress"

    def __post_init__(self):
        if not 0 < self.percentile < 100:
            raise ValueError("percentile must lie in (0, 100)")
        if self.threshold_ms <= 0:
            raise ValueError("threshold_ms must be > 0")
        if self.span not in SPANS:
            raise ValueError(f"span must be one of {SPANS}")


@dataclass(frozen=True)
class ScenarioConfig:
    topology: Topology
    deployments: tuple
    workload: LoadProfile
    variability: VariabilityModel = field(default_factory=lambda: demand_mod.profile("none"))
    variability_profile: str = "none"
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    slo: SloConfig = field(default_factory=SloConfig)
    seed: int = 0
    horizon_s: float = 180.0
    period_us: int = 100_000
    span: str = "ingress"
    broker_delay_ms: float = 0.0
    db_write_ms: float = 0.0
    db_read_ms: float = 0.0
    queue_capacity: Optional[int] = None
    warmup_fraction: float = 0.1
    name: str = "scenario"

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)

    def with_devices(self, devices: int) -> "ScenarioConfig":
        return replace(self, workload=self.workload.replace(devices=devices))

    def deployment(self, name: str) -> DeploymentConfig:
        for d in self.deployments:
            if d.name == name:
                return d
        raise KeyError(name)


# --- loading ------------------------------------------------------------------

class _Reader:
    """Collects problems with their JSON paths instead of stopping at the first."""

    def __init__(self):
        self.problems: List[str] = []

    def err(self, path, msg):
        self.problems.append(f"{path}: {msg}")

    def get(self, obj, key, path, typ=None, required=False, default=None):
        if not isinstance(obj, dict):
            self.err(path, "expected an object")
            return default
        if key not in obj:
            if required:
                self.err(f"{path}.{key}", "missing required field")
            return default
        val = obj[key]
        if typ is not None and val is not None:
            ok = isinstance(val, typ) and not (typ in (int, float, (int, float))
                                                and isinstance(val, bool))
            if not ok:
                self.err(f"{path}.{key}", f"expected {getattr(typ, '__name__', typ)}")
                return default
        return val

    def build(self, path, fn, *a, **kw):
        try:
            return fn(*a, **kw)
        except (ValueError, TypeError) as exc:
            self.err(path, str(exc))
            return None


NUM = (int, float)


def _resources(r: _Reader, obj, path) -> Optional[ResourceSpec]:
    if obj is None:
        return ResourceSpec()
    return r.build(path, ResourceSpec,
                   cpu_request=r.get(obj, "cpu_request", path, NUM),
                   cpu_limit=r.get(obj, "cpu_limit", path, NUM),
                   mem_request=r.get(obj, "mem_request", path, int),
                   mem_limit=r.get(obj, "mem_limit", path, int))


def _node(r: _Reader, obj, path) -> Optional[NodeSpec]:
    name = r.get(obj, "name", path, str, required=True)
    if name is None:
        return None
    return r.build(path, NodeSpec, name,
                   r.get(obj, "vcpus", path, int, default=4),
                   r.get(obj, "background_millicores", path, NUM, default=0.0),
                   r.get(obj, "background_pods", path, int, default=0))


def _variability(r: _Reader, obj, path):
    if obj is None:
        return demand_mod.profile("none"), "none"
    if isinstance(obj, str):
        try:
            return demand_mod.profile(obj), obj
        except KeyError as exc:
            r.err(path, str(exc.args[0]))
            return None, obj
    base_name = r.get(obj, "profile", path, str, default="none")
    try:
        base = demand_mod.profile(base_name)
    except KeyError as exc:
        r.err(f"{path}.profile", str(exc.args[0]))
        return None, base_name
    shape = base.shape
    sh = r.get(obj, "shape", path, dict)
    if sh is not None:
        shape = r.build(f"{path}.shape", SlowdownShape,
                        r.get(sh, "sigma", f"{path}.shape", NUM, default=shape.sigma),
                        r.get(sh, "lower", f"{path}.shape", NUM, default=shape.lower),
                        r.get(sh, "upper", f"{path}.shape", NUM, default=shape.upper))
    qadj = dict(base.qos_adjustment)
    for k, v in (r.get(obj, "qos_adjustment", path, dict) or {}).items():
        try:
            qadj[QoSClass(k)] = float(v)
        except ValueError:
            r.err(f"{path}.qos_adjustment.{k}", "unknown QoS class")
    if shape is None:
        return None, base_name
    model = r.build(path, VariabilityModel,
                    r.get(obj, "cv_intercept", path, NUM, default=base.cv_intercept),
                    r.get(obj, "cv_slope_per_pod", path, NUM, default=base.cv_slope_per_pod),
                    qadj, shape)
    return model, base_name


def _workload(r: _Reader, obj, path) -> Optional[LoadProfile]:
    if obj is None:
        r.err(path, "missing required field")
        return None
    if isinstance(obj, str):
        obj = {"preset": obj}
    presets = profile_presets()
    base = LoadProfile()
    preset = r.get(obj, "preset", path, str)
    if preset is not None:
        if preset not in presets:
            r.err(f"{path}.preset", f"unknown preset {preset!r}; known: {sorted(presets)}")
            return None
        base = presets[preset]
    payload = r.get(obj, "payload_bytes", path, (int, dict), default=base.payload_bytes)
    if isinstance(payload, dict):
        payload = r.build(f"{path}.payload_bytes", PayloadRange,
                          r.get(payload, "low", f"{path}.payload_bytes", int, required=True),
                          r.get(payload, "high", f"{path}.payload_bytes", int, required=True))
    return r.build(path, LoadProfile,
                   devices=r.get(obj, "devices", path, int, default=base.devices),
                   ramp_up_s=r.get(obj, "ramp_up_s", path, NUM, default=base.ramp_up_s),
                   send_period_s=r.get(obj, "send_period_s", path, NUM,
                                       default=base.send_period_s),
                   payload_bytes=payload,
                   jitter_s=r.get(obj, "jitter_s", path, NUM, default=base.jitter_s),
                   duration_s=r.get(obj, "duration_s", path, NUM, default=base.duration_s))


def _policy(r: _Reader, obj, path) -> Optional[PolicyConfig]:
    if obj is None:
        return PolicyConfig()
    kind = r.get(obj, "kind", path, str, default="none")
    if kind not in ("none", "hpa", "node"):
        r.err(f"{path}.kind", "must be one of none, hpa, node")
    node = NodePolicy()
    nobj = r.get(obj, "node", path, dict)
    if nobj is not None:
        p = f"{path}.node"
        node = r.build(p, NodePolicy,
                       r.get(nobj, "upper_threshold", p, NUM, default=node.upper_threshold),
                       r.get(nobj, "lower_threshold", p, NUM, default=node.lower_threshold),
                       r.get(nobj, "min_nodes", p, int, default=node.min_nodes),
                       r.get(nobj, "max_nodes", p, int, default=node.max_nodes),
                       r.get(nobj, "control_period_s", p, NUM, default=node.control_period_s))
    hpa = {}
    for dep, hobj in (r.get(obj, "hpa", path, dict) or {}).items():
        p = f"{path}.hpa.{dep}"
        d = HpaPolicy()
        hpa[dep] = r.build(p, HpaPolicy,
                           r.get(hobj, "metric", p, str, default=d.metric),
                           r.get(hobj, "desired", p, NUM, default=d.desired),
                           r.get(hobj, "min_replicas", p, int, default=d.min_replicas),
                           r.get(hobj, "max_replicas", p, int, default=d.max_replicas),
                           r.get(hobj, "sync_period_s", p, NUM, default=d.sync_period_s),
                           r.get(hobj, "tolerance", p, NUM, default=d.tolerance))
    window = r.get(obj, "window_s", path, NUM, default=60.0)
    delay = r.get(obj, "provisioning_delay_s", path, NUM, default=0.0)
    if window is not None and window <= 0:
        r.err(f"{path}.window_s", "must be > 0")
    if delay is not None and delay < 0:
        r.err(f"{path}.provisioning_delay_s", "must be >= 0")
    return PolicyConfig(kind, node, hpa, window, delay)


def parse_config(doc: dict, source: str = "config") -> ScenarioConfig:
    r = _Reader()
    root = "$"
    if not isinstance(doc, dict):
        raise ConfigError([f"{root}: expected an object"])
    ver = r.get(doc, "schema_version", root, int, required=True)
    if ver is not None and ver != SCHEMA_VERSION:
        r.err(f"{root}.schema_version", f"unsupported version {ver} (expected {SCHEMA_VERSION})")

    topo_obj = r.get(doc, "topology", root, dict, required=True)
    topology = None
    if topo_obj is not None:
        tp = f"{root}.topology"
        nodes = []
        node_list = r.get(topo_obj, "nodes", tp, list, required=True) or []
        if topo_obj.get("nodes") is not None and not node_list:
            r.err(f"{tp}.nodes", "at least one node required")
        for i, n in enumerate(node_list):
            spec = _node(r, n, f"{tp}.nodes[{i}]")
            if spec is not None:
                nodes.append(spec)
        names = [n.name for n in nodes]
        if len(set(names)) != len(names):
            r.err(f"{tp}.nodes", "node names must be unique")
        broker = r.get(topo_obj, "broker_node", tp, str)
        db = r.get(topo_obj, "db_node", tp, str)
        for key, val in (("broker_node", broker), ("db_node", db)):
            if val is not None and val not in names:
                r.err(f"{tp}.{key}", f"unknown node {val!r}")
        template = None
        tobj = r.get(topo_obj, "node_template", tp, dict)
        if tobj is not None:
            template = _node(r, dict(tobj, name=tobj.get("name", "template")),
                             f"{tp}.node_template")
        topology = Topology(tuple(nodes), broker, db,
                            bool(r.get(topo_obj, "static_policy", tp, bool, default=False)),
                            template)
        if nodes and not [n for n in names if n not in (broker, db)]:
            r.err(f"{tp}.nodes", "no node left for application pods")

    deps = []
    dep_list = r.get(doc, "deployments", root, list, required=True)
    if dep_list is not None:
        if not dep_list:
            r.err(f"{root}.deployments", "at least one deployment required")
        for i, d in enumerate(dep_list):
            p = f"{root}.deployments[{i}]"
            stage = r.get(d, "stage", p, str, required=True)
            if stage is not None and stage not in STAGES:
                r.err(f"{p}.stage", f"must be one of {STAGES}")
            dbi = r.get(d, "db_interaction", p, str, default="none")
            if dbi not in DB_INTERACTIONS:
                r.err(f"{p}.db_interaction", f"must be one of {DB_INTERACTIONS}")
            replicas = r.get(d, "replicas", p, int, default=1)
            workers = r.get(d, "workers", p, int, default=1)
            if replicas is not None and replicas < 1:
                r.err(f"{p}.replicas", "must be >= 1")
            if workers is not None and workers < 1:
                r.err(f"{p}.workers", "must be >= 1")
            dem = r.get(d, "demand", p, dict, default={}) or {}
            base_ms = r.get(dem, "base_ms", f"{p}.demand", NUM, default=50.0)
            coeff = r.get(dem, "bytes_coefficient", f"{p}.demand", NUM, default=0.0)
            if base_ms is not None and base_ms < 0:
                r.err(f"{p}.demand.base_ms", "must be >= 0")
            if coeff is not None and coeff < 0:
                r.err(f"{p}.demand.bytes_coefficient", "must be >= 0")
            res = _resources(r, r.get(d, "resources", p, dict, default={"cpu_request": 500}),
                             f"{p}.resources")
            deps.append(DeploymentConfig(
                name=r.get(d, "name", p, str, default=stage) or f"dep{i}",
                stage=stage, replicas=replicas or 1, resources=res, workers=workers or 1,
                base_ms=base_ms or 0.0, bytes_coefficient=coeff or 0.0, db_interaction=dbi,
                dedicated_cpu_eligible=bool(r.get(d, "dedicated_cpu_eligible", p, bool,
                                                  default=False))))
        stages = [d.stage for d in deps]
        if dep_list and sorted(s for s in stages if s) != sorted(STAGES):
            r.err(f"{root}.deployments", f"need exactly one deployment per stage {STAGES}")

    workload = _workload(r, doc.get("workload"), f"{root}.workload")
    variability, vname = _variability(r, doc.get("variability"), f"{root}.variability")
    policy = _policy(r, r.get(doc, "policy", root, dict), f"{root}.policy")
    if policy is not None and policy.kind == "hpa":
        for dep in policy.hpa:
            if dep not in [d.name for d in deps]:
                r.err(f"{root}.policy.hpa.{dep}", "unknown deployment")
    sobj = r.get(doc, "slo", root, dict, default={}) or {}
    slo = r.build(f"{root}.slo", SloConfig,
                  r.get(sobj, "percentile", f"{root}.slo", NUM, default=95.0),
                  r.get(sobj, "threshold_ms", f"{root}.slo", NUM, default=1000.0),
                  r.get(sobj, "span", f"{root}.slo", str, default="ingress"))
    delays = r.get(doc, "delays", root, dict, default={}) or {}
    span = r.get(doc, "span", root, str, default=slo.span if slo else "ingress")
    if span not in SPANS:
        r.err(f"{root}.span", f"must be one of {SPANS}")
    horizon = r.get(doc, "horizon_s", root, NUM, default=180.0)
    if horizon is not None and horizon <= 0:
        r.err(f"{root}.horizon_s", "must be > 0")
    period = r.get(doc, "period_us", root, int, default=100_000)
    if period is not None and period <= 0:
        r.err(f"{root}.period_us", "must be > 0")
    qcap = r.get(doc, "queue_capacity", root, int)
    if qcap is not None and qcap < 1:
        r.err(f"{root}.queue_capacity", "must be >= 1")
    warm = r.get(doc, "warmup_fraction", root, NUM, default=0.1)
    if warm is not None and not 0 <= warm < 1:
        r.err(f"{root}.warmup_fraction", "must lie in [0, 1)")
    dvals = {}
    for key in ("broker_ms", "db_write_ms", "db_read_ms"):
        v = r.get(delays, key, f"{root}.delays", NUM, default=0.0)
        if v is not None and v < 0:
            r.err(f"{root}.delays.{key}", "must be >= 0")
        dvals[key] = v or 0.0

    seed = r.get(doc, "seed", root, int, default=0)
    name = r.get(doc, "name", root, str, default=Path(source).stem)
    if r.problems:
        raise ConfigError(r.problems)
    return ScenarioConfig(
        topology=topology, deployments=tuple(deps), workload=workload,
        variability=variability, variability_profile=vname, policy=policy, slo=slo,
        seed=int(seed), horizon_s=float(horizon),
        period_us=period, span=span, broker_delay_ms=dvals["broker_ms"],
        db_write_ms=dvals["db_write_ms"], db_read_ms=dvals["db_read_ms"],
        queue_capacity=qcap, warmup_fraction=float(warm),
        name=name)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON ({exc})"]) from exc
    return parse_config(doc, source=str(path))


def bundled_config_names() -> List[str]:
    return sorted(p.name for p in resources.files("elastisim.configs").iterdir()
                  if p.name.endswith(".json"))


def bundled_config_doc(name: str) -> dict:
    if not name.endswith(".json"):
        name += ".json"
    return json.loads(resources.files("elastisim.configs").joinpath(name).read_text())


def bundled_config(name: str) -> ScenarioConfig:
    return parse_config(bundled_config_doc(name), source=name)


def resolve_config(ref) -> ScenarioConfig:
    """Load a config from a path, falling back to a bundled config name."""
    p = Path(ref)
    if p.exists():
        return load_config(p)
    stem = p.name if p.name.endswith(".json") else p.name + ".json"
    if stem in bundled_config_names():
        return bundled_config(stem)
    return load_config(p)


def doc_copy(doc: dict) -> dict:
    return copy.deepcopy(doc)
