import pytest

from scenarios import doc, scenario, with_deployment
from elastisim.config import ConfigError, parse_config
from elastisim.domain import Message
from elastisim.simcore import NotReady, RunReport, Simulation, measure_response_time, run


def _node_mc(report, node="app-node-01"):
    return [m.value for m in report.metrics
            if m.name == "node_millicores" and dict(m.labels)["node"] == node]


def test_zero_devices_only_background():
    d = doc(workload={"devices": 0})
    d["topology"]["nodes"][2]["background_millicores"] = 150
    rep = run(parse_config(d))
    assert rep.samples == [] and rep.generated == 0
    assert all(v == pytest.approx(150) for v in _node_mc(rep))


def test_one_device_three_messages():
    rep = run(scenario())
    assert rep.generated == 3 == rep.completed
    assert rep.in_flight == 0


def test_no_contention_closed_form():
    d = doc(span="end_to_end", delays={"db_read_ms": 7})
    rep = run(parse_config(d))
    rts = [s.response_ms for s in rep.samples]
    assert len(rts) == 3
    for r in rts:
        assert r == pytest.approx(10 + 20 + 30 + 7, abs=1)


def test_ingress_span_and_broker_delay():
    d = doc(delays={"broker_ms": 3, "db_write_ms": 4})
    d = with_deployment(d, 0, db_interaction="write")
    sim = Simulation(parse_config(d))
    rep = sim.run()
    assert [s.response_ms for s in rep.samples] == pytest.approx([14, 14, 14])
    for m in rep.messages:
        e2e = measure_response_time(m, "end_to_end")
        assert e2e == pytest.approx(14 + 3 + 20 + 3 + 30)
        assert e2e >= measure_response_time(m, "ingress")


def test_measure_not_ready():
    m = Message(1, 0.0, 0, 0)
    with pytest.raises(NotReady):
        measure_response_time(m)
    with pytest.raises(ValueError):
        measure_response_time(m, "sideways")


def _single_stage(vcpus=4, replicas=1, resources=None, base_ms=100):
    d = doc(workload={"devices": 0})
    d["topology"]["nodes"][2]["vcpus"] = vcpus
    d = with_deployment(d, 0, replicas=replicas, demand={"base_ms": base_ms},
                        resources=resources if resources is not None else {"cpu_request": 500})
    # downstream stages become negligible so node totals reflect the first stage
    for i in (1, 2):
        d = with_deployment(d, i, demand={"base_ms": 1e-6})
    return Simulation(parse_config(d))


def test_completes_inside_period():
    sim = _single_stage(base_ms=30)
    sim.inject()
    sim.step_period()
    s = sim.report.samples[0]
    assert s.completed_ms == pytest.approx(30)
    assert _node_mc(sim.report) == [pytest.approx(300, abs=0.1)]


def test_two_best_effort_pods_share_one_vcpu():
    sim = _single_stage(vcpus=1, replicas=2, resources={}, base_ms=100)
    sim.inject()
    sim.inject()
    sim.step_period()
    assert sim.report.samples == []
    assert _node_mc(sim.report) == [pytest.approx(1000, abs=0.1)]
    sim.step_period()
    assert [s.completed_ms for s in sim.report.samples] == pytest.approx([200, 200])


def test_quota_throttles_guaranteed_pod():
    res = {"cpu_request": 500, "cpu_limit": 500, "mem_request": 1, "mem_limit": 1}
    sim = _single_stage(resources=res, base_ms=120)
    sim.inject()
    for _ in range(3):
        sim.step_period()
    assert sim.report.samples[0].completed_ms == pytest.approx(220)
    assert _node_mc(sim.report) == pytest.approx([500, 500, 200], abs=0.1)


def test_fifo_with_one_replica():
    sim = _single_stage(base_ms=10)
    msgs = [sim.inject(device=i) for i in range(5)]
    sim.step_period()
    starts = [m.stage_timestamps[0].start for m in msgs]
    assert starts == sorted(starts) == pytest.approx([0, 10, 20, 30, 40])


def test_conservation_causality_and_bounds():
    d = doc(workload={"devices": 300, "ramp_up_s": 5, "send_period_s": 20, "duration_s": 60},
            horizon_s=60, variability="paper-bwcloud", queue_capacity=40)
    rep = run(parse_config(d))
    assert rep.generated == rep.completed + rep.in_flight + rep.dropped
    assert rep.dropped > 0
    for m in rep.messages:
        last = m.created_at
        for ts in m.stage_timestamps:
            assert last <= ts.enqueue <= ts.start <= ts.end
            last = ts.end
    assert max(_node_mc(rep)) <= 4000 + 1e-6


def test_same_seed_same_report_and_seed_changes_it():
    cfg = scenario(workload={"devices": 40, "ramp_up_s": 5, "send_period_s": 10,
                             "duration_s": 40}, horizon_s=40, variability="paper-bwcloud")
    a, b = run(cfg), run(cfg)
    assert a.samples == b.samples and a.metrics == b.metrics
    c = run(cfg.with_seed(2))
    assert c.samples != a.samples


def test_unsatisfiable_topology():
    d = doc()
    d = with_deployment(d, 0, resources={"cpu_request": 5000})
    with pytest.raises(ConfigError):
        Simulation(parse_config(d))


def test_node_policy_scales_out_and_in():
    d = doc(workload={"devices": 400, "ramp_up_s": 10, "send_period_s": 5, "duration_s": 60},
            horizon_s=200,
            policy={"kind": "node", "window_s": 10,
                    "node": {"upper_threshold": 0.3, "lower_threshold": 0.05,
                             "control_period_s": 10}})
    d["topology"]["node_template"] = {"vcpus": 4}
    for dep in d["deployments"]:
        dep["demand"] = {"base_ms": 40}
    rep = run(parse_config(d))
    actions = [e.action for e in rep.scaling_events]
    assert "add_node" in actions and "remove_node" in actions
    assert rep.generated == rep.completed + rep.in_flight + rep.dropped
    for e in rep.scaling_events:
        assert 1 <= e.nodes_after <= 4


def test_hpa_policy_adds_replicas():
    d = doc(workload={"devices": 300, "ramp_up_s": 5, "send_period_s": 5, "duration_s": 60},
            horizon_s=60,
            policy={"kind": "hpa", "window_s": 15,
                    "hpa": {"device-comm": {"desired": 0.5, "max_replicas": 5,
                                            "sync_period_s": 15}}})
    d = with_deployment(d, 0, demand={"base_ms": 30})
    rep = run(parse_config(d))
    outs = [e for e in rep.scaling_events if e.action == "scale_out"]
    assert outs and all(e.deployment == "device-comm" for e in outs)
    assert max(e.replicas_after for e in outs) <= 5


def test_censored_messages_count_against_slo():
    d = doc(workload={"devices": 200, "ramp_up_s": 0, "send_period_s": 60, "duration_s": 10},
            horizon_s=10, warmup_fraction=0)
    d = with_deployment(d, 0, demand={"base_ms": 200})
    rep = run(parse_config(d))
    assert rep.in_flight > 0 and len(rep.censored) == rep.in_flight
    assert len(rep.slo_samples()) == rep.generated
    assert max(rep.slo_samples()) == pytest.approx(10_000)


def test_report_round_trip(tmp_path):
    cfg = scenario(workload={"devices": 30, "ramp_up_s": 5, "send_period_s": 10,
                             "duration_s": 30}, horizon_s=30)
    rep = run(cfg)
    rep.write(tmp_path)
    back = RunReport.read(tmp_path)
    assert back.summary_dict() == RunReport.read(tmp_path).summary_dict()
    assert back.generated == rep.generated
    assert [s.msg_id for s in back.samples] == [s.msg_id for s in rep.csv_rows()]
    back.write(tmp_path / "again")
    for name in ("run_samples.csv", "run_summary.json", "run_metrics.csv", "run_events.jsonl"):
        assert (tmp_path / name).read_bytes() == (tmp_path / "again" / name).read_bytes()
