"""Figure rendering for run reports and analysis tables.

Figures are written as PNG files next to the delimited outputs. Rendering
is optional at the CLI (--figures); everything here is safe to run
headless.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from . import analysis  # noqa: E402
from .engine import Stats, fmt_addr, fmt_link  # noqa: E402
from .topology import Topology  # noqa: E402


def run_figures(stats: Stats, topology: Topology, out_dir: str) -> list:
    """Setup-latency and link-utilization figures for one run."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    established = [
        a for a in stats.attempts if a.setup_cycles is not None and a.outcome != "duplicate"
    ]
    fig, ax = plt.subplots(figsize=(8, 4))
    if established:
        labels = [f"{fmt_addr(a.src)}→{fmt_addr(a.dst)}" for a in established]
        ax.bar(range(len(established)), [a.setup_cycles for a in established], color="#3b6ea5")
        ax.set_xticks(range(len(established)))
        ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    else:
        ax.text(0.5, 0.5, "no established connections", ha="center", va="center")
    ax.set_ylabel("setup latency (cycles)")
    ax.set_title("Connection setup latency")
    fig.tight_layout()
    path = os.path.join(out_dir, "setup_latency.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(8, 4))
    cycles = max(stats.cycles_run, 1)
    links = sorted(stats.link_busy, key=fmt_link)
    if links:
        util = [stats.link_busy[lid] / (cycles * topology.k) for lid in links]
        ax.bar(range(len(links)), util, color="#a8323e")
        ax.set_xticks(range(len(links)))
        ax.set_xticklabels([fmt_link(lid) for lid in links], rotation=45, ha="right", fontsize=8)
        ax.set_ylim(0, 1)
    else:
        ax.text(0.5, 0.5, "link accounting disabled", ha="center", va="center")
    ax.set_ylabel("busy segment-cycles / capacity")
    ax.set_title("Link utilization")
    fig.tight_layout()
    path = os.path.join(out_dir, "link_utilization.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


def analyze_figures(rows, out_dir: str, mesh_sides=(2, 3, 4)) -> list:
    """Bound growth and mesh segment-demand figures.

    ``rows`` are (n, closed_form, oracle, latency_bound, ok) tuples as
    printed by the analyze command.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ns = [r[0] for r in rows]
    ax1.plot(ns, [r[1] for r in rows], "-", color="#3b6ea5", label="closed form")
    ax1.plot(ns, [r[2] for r in rows], "o", color="#a8323e", ms=4, label="oracle")
    ax1.set_xlabel("PEs (n)")
    ax1.set_ylabel("peak pending commands")
    ax1.legend()
    ax2.plot(ns, [r[3] for r in rows], "-", color="#3b6ea5")
    ax2.set_xlabel("PEs (n)")
    ax2.set_ylabel("residence ceiling (cycles)")
    fig.suptitle("Worst-case command load and processing-time ceiling")
    fig.tight_layout()
    path = os.path.join(out_dir, "command_bounds.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    sides = list(mesh_sides)
    demand = [analysis.segment_demand_2d(s).max_link_load for s in sides]
    ax.plot(sides, demand, "o-", color="#3b6ea5", label="all-pairs max link load")
    scale = demand[0] / (sides[0] ** 2)
    ax.plot(sides, [scale * s * s for s in sides], "--", color="#888888", label="~N^2 guide")
    ax.set_xlabel("mesh side (N)")
    ax.set_ylabel("segments needed on busiest link")
    ax.set_xticks(sides)
    ax.legend()
    ax.set_title("Mesh segment demand")
    fig.tight_layout()
    path = os.path.join(out_dir, "mesh_demand.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written
