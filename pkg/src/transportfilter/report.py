"""Artifact emission: delimited outputs and the MSE figure."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .filtering import MetricsLog
from .scenario import ScenarioConfig, resolve
from .simulate import TruthData


def _fmt(value: float) -> str:
    # repr gives the shortest round-trip decimal, keeping files byte-stable.
    return repr(float(value))


def write_metrics_csv(metrics: MetricsLog, path) -> None:
    """Fixed header: step,time,agent,mse,mean_0..mean_{n-1},std_0..std_{n-1}."""
    n = metrics.state_dim
    header = (
        ["step", "time", "agent", "mse"]
        + [f"mean_{i}" for i in range(n)]
        + [f"std_{i}" for i in range(n)]
    )
    lines = [",".join(header)]
    for row in metrics.rows:
        fields = [str(row.step), _fmt(row.time), row.agent, _fmt(row.mse)]
        fields += [_fmt(v) for v in row.mean]
        fields += [_fmt(v) for v in row.std]
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_truth_csv(truth: TruthData, path) -> None:
    n = truth.states.shape[1]
    header = ["step", "time"] + [f"x_{i}" for i in range(n)]
    lines = [",".join(header)]
    for step, (time, state) in enumerate(zip(truth.times, truth.states)):
        fields = [str(step), _fmt(time)] + [_fmt(v) for v in state]
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_resolved_scenario(scenario: ScenarioConfig, path) -> None:
    Path(path).write_text(
        json.dumps(resolve(scenario), indent=2) + "\n", encoding="utf-8"
    )


def render_mse_plot(metrics: MetricsLog, path, title: str | None = None) -> None:
    """One MSE-vs-time series per agent on a log-scale y axis."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for agent_id in metrics.agent_ids:
        times, mses = metrics.agent_series(agent_id)
        ax.plot(times, mses, label=f"agent {agent_id}", linewidth=1.2)
    ax.set_yscale("log")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("MSE")
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
