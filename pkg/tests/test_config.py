import json

import pytest

from scenarios import BASE, doc, with_deployment
from elastisim.config import (ConfigError, bundled_config, bundled_config_names, load_config,
                              parse_config, resolve_config)


def _problems(d):
    with pytest.raises(ConfigError) as info:
        parse_config(d)
    return info.value.problems


def test_missing_deployments_names_the_path():
    d = doc()
    del d["deployments"]
    probs = _problems(d)
    assert any(p.startswith("$.deployments") for p in probs)


def test_all_problems_reported_together():
    d = doc(horizon_s=-1, warmup_fraction=2, schema_version=9)
    d = with_deployment(d, 1, replicas=0)
    paths = {p.split(":")[0] for p in _problems(d)}
    assert {"$.horizon_s", "$.warmup_fraction", "$.schema_version",
            "$.deployments[1].replicas"} <= paths


@pytest.mark.parametrize("change,path", [
    ({"workload": {"preset": "nope"}}, "$.workload.preset"),
    ({"variability": "no-such-profile"}, "$.variability"),
    ({"policy": {"kind": "magic"}}, "$.policy.kind"),
    ({"span": "sideways"}, "$.span"),
    ({"delays": {"db_read_ms": -1}}, "$.delays.db_read_ms"),
])
def test_bad_fields(change, path):
    assert any(p.startswith(path) for p in _problems(doc(**change)))


def test_wrong_types_and_bool_is_not_number():
    d = doc(horizon_s="long", seed=True)
    paths = {p.split(":")[0] for p in _problems(d)}
    assert {"$.horizon_s", "$.seed"} <= paths


def test_unknown_broker_and_duplicate_stage():
    d = doc()
    d["topology"]["broker_node"] = "ghost"
    d = with_deployment(d, 1, stage="device-comm")
    probs = _problems(d)
    assert any("$.topology.broker_node" in p for p in probs)
    assert any(p.startswith("$.deployments:") for p in probs)


def test_only_dedicated_nodes_rejected():
    d = doc()
    d["topology"]["nodes"] = d["topology"]["nodes"][:2]
    assert any("application pods" in p for p in _problems(d))


def test_limit_below_request_is_reported():
    d = with_deployment(doc(), 0, resources={"cpu_request": 500, "cpu_limit": 100})
    assert any(p.startswith("$.deployments[0].resources") for p in _problems(d))


def test_hpa_for_unknown_deployment():
    d = doc(policy={"kind": "hpa", "hpa": {"ghost": {"desired": 0.5}}})
    assert any("$.policy.hpa.ghost" in p for p in _problems(d))


def test_defaults_and_seed_override():
    cfg = parse_config(doc())
    assert cfg.slo.threshold_ms == 1000 and cfg.slo.percentile == 95
    assert cfg.with_seed(9).seed == 9 and cfg.seed == 1
    assert cfg.with_devices(77).workload.devices == 77
    assert cfg.deployment("data-processing").db_interaction == "read"


@pytest.mark.parametrize("name", bundled_config_names())
def test_bundled_configs_parse(name):
    cfg = bundled_config(name)
    assert len(cfg.deployments) == 3
    assert resolve_config(name.removesuffix(".json")).name == cfg.name


def test_load_from_file(tmp_path):
    p = tmp_path / "x.json"
    p.write_text(json.dumps(BASE))
    assert load_config(p).name == "tiny"
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        resolve_config(tmp_path / "missing.json")
