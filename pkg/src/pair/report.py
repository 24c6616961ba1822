"""Report rendering: a scenario trace as figures on disk.

Writes the envelope stream as newline-delimited JSON next to one PNG per
placed visualization plus a top-down scene map.  Headless by construction
(Agg backend), so it runs anywhere the tests run.
"""

from __future__ import annotations

import json
import math
import os
from typing import Any

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import ContractViolation

__all__ = ["write_trace_jsonl", "render_figures", "render_report"]


def write_trace_jsonl(trace: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for envelope in trace:
            handle.write(json.dumps(envelope, sort_keys=True))
            handle.write("\n")


def _final_snapshot(trace: list[dict]) -> dict | None:
    for envelope in reversed(trace):
        if envelope.get("type") == "snapshot":
            return envelope["payload"]
    return None


def _plot_scene(snapshot_doc: dict, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 6))
    user = snapshot_doc["user"]
    cx, _, cz = user["center"]
    fx, _, fz = user["facing"]
    ax.plot([cx], [cz], marker="o", markersize=10, color="tab:blue")
    ax.annotate("user", (cx, cz), textcoords="offset points", xytext=(8, 8))
    ax.arrow(cx, cz, fx, fz, head_width=0.15, color="tab:blue", length_includes_head=True)
    for anchor in snapshot_doc["anchors"]:
        x, _, z = anchor["position"]
        occupied = anchor.get("occupied_by")
        color = "tab:red" if occupied else "tab:gray"
        ax.plot([x], [z], marker="s", markersize=8, color=color)
        label = anchor["id"] if not occupied else f"{anchor['id']}\n[{occupied}]"
        ax.annotate(label, (x, z), textcoords="offset points", xytext=(8, -12), fontsize=8)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("z (m)")
    ax.set_title("scene, top-down")
    ax.set_aspect("equal")
    ax.grid(True, alpha=0.3)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def _plot_pie(viz_id: str, event: dict, path: str) -> None:
    amounts = [row["amount"] for row in event["data"]]
    labels = [f"{row['category']} ({row['amount']})" for row in event["data"]]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.pie(amounts, labels=labels, startangle=90, counterclock=False,
           autopct=lambda pct: f"{pct:.1f}%")
    ax.set_title(f"{viz_id} @ {event['position']}")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def _plot_card(viz_id: str, event: dict, path: str) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.axis("off")
    row = event["data"][0] if event["data"] else {}
    lines = [f"{key}: {value}" for key, value in sorted(row.items())]
    body = "\n".join(lines) if lines else "(empty)"
    ax.text(0.5, 0.6, body, ha="center", va="center", fontsize=11, wrap=True)
    ax.text(0.5, 0.05, f"{viz_id} @ {event['position']}", ha="center", fontsize=9,
            color="gray")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def render_figures(trace: list[dict], out_dir: str) -> list[str]:
    """PNGs for the final snapshot in the trace; returns the paths written."""
    snapshot_doc = _final_snapshot(trace)
    if snapshot_doc is None:
        raise ContractViolation("trace contains no snapshot to render")
    written: list[str] = []
    scene_path = os.path.join(out_dir, "scene_topdown.png")
    _plot_scene(snapshot_doc, scene_path)
    written.append(scene_path)
    for viz_id, placed in sorted(snapshot_doc.get("visualizations", {}).items()):
        event = placed["event"]
        figure_path = os.path.join(out_dir, f"{viz_id}.png")
        if event["visualization_type"] == "pie_chart":
            _plot_pie(viz_id, event, figure_path)
        else:
            _plot_card(viz_id, event, figure_path)
        written.append(figure_path)
    return written


def render_report(trace: list[dict], out_dir: str) -> list[str]:
    """The delimited envelope stream plus its figures, together in out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(out_dir, "trace.jsonl")
    write_trace_jsonl(trace, trace_path)
    return [trace_path] + render_figures(trace, out_dir)
