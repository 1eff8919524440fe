"""Figures written next to the CSV/JSON outputs. Uses the non-interactive backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed metadata keeps PNG bytes stable between identical runs
_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def scalability_plot(results: dict, path, threshold_ms: float = 1000.0) -> Path:
    """p95 response time per device count, one line per configuration."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for name, res in results.items():
        curve = res.summary_dict()["curve"]
        xs = [c["devices"] for c in curve]
        ys = [c["p95_ms"] for c in curve]
        ax.plot(xs, ys, marker="o", label=f"{name} (max {res.max_devices})")
    ax.axhline(threshold_ms, color="red", linestyle="--", label=f"SLO {threshold_ms:g} ms")
    ax.set_xlabel("devices")
    ax.set_ylabel("p95 response time [ms]")
    ax.set_yscale("log")
    ax.legend()
    return _save(fig, path)


def utilization_plot(report, path) -> Path:
    series: dict = {}
    for m in report.metrics:
        if m.name == "node_millicores":
            series.setdefault(dict(m.labels)["node"], []).append((m.time / 1000, m.value))
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    for node, pts in sorted(series.items()):
        ax.plot([p[0] for p in pts], [p[1] for p in pts], linewidth=0.8, label=node)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("node CPU [millicores]")
    if series:
        ax.legend(fontsize="small")
    return _save(fig, path)


def response_plot(report, path) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    xs = [s.created_ms / 1000 for s in report.samples]
    ys = [s.response_ms for s in report.samples]
    ax.scatter(xs, ys, s=2)
    ax.axvline(report.warmup_ms / 1000, color="grey", linestyle=":", label="warm-up end")
    ax.set_xlabel("created [s]")
    ax.set_ylabel("response time [ms]")
    ax.legend()
    return _save(fig, path)


def cv_plot(points, path) -> Path:
    """``points``: iterable of (pods_on_node, mean_millicores, cv, label)."""
    points = list(points)
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8.0, 3.4), sharey=True)
    for pods, mc, cv, label in points:
        a1.scatter(mc, cv)
        a1.annotate(label, (mc, cv), fontsize="x-small")
        a2.scatter(pods, cv)
    a1.set_xlabel("background CPU [millicores]")
    a2.set_xlabel("pods on node")
    a1.set_ylabel("CV")
    return _save(fig, path)


def bench_plot(sample_sets, path) -> Path:
    """Box plot of measured/nominal per demand level."""
    labels, data = [], []
    for s in sample_sets:
        d = float(s.labels["demand_ms"])
        labels.append(f"{s.labels.get('node', '')}\n{s.labels.get('qos', '')}\n{d:g} ms")
        data.append([v / d for v in s.measured])
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(data)), 3.6))
    if data:
        ax.boxplot(data)
        ax.set_xticks(range(1, len(labels) + 1), labels, fontsize="x-small")
    ax.axhline(1.0, color="grey", linestyle=":")
    ax.set_ylabel("measured / nominal")
    return _save(fig, path)
