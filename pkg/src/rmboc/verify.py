"""Randomized protocol-safety campaign and adversarial load scenarios.

The campaign replays many small randomized scenarios (random requests,
teardowns, refusals and reconfiguration windows over 1D lines and small
meshes, with FIFO depths from 1 up to the worst-case bound) with the
per-cycle audit enabled, and aggregates five properties:

  * segment exclusivity: no cycle in which one (link, segment) slot is
    claimed by two connections;
  * leak freedom: at quiescence every bound segment belongs to a live
    circuit;
  * duplicate suppression: no crosspoint ever holds two entries for one
    (source, destination) pair, also under retransmission;
  * determinism: re-running a sampled scenario reproduces its trace
    byte for byte;
  * mesh path legality: exhaustive shape checks of the 2D routing policy.

Scenario generation is seeded, so a campaign is reproducible end to end.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from . import analysis, routing2d
from .engine import (
    DestroyEvent,
    ReconfigureEvent,
    RefuseEvent,
    RequestEvent,
    RunConfig,
    SendEvent,
    run,
)
from .topology import Port, build_1d, build_2d


def adversarial_burst(n: int):
    """All ordered pairs request at cycle 0 on an n-PE line.

    Links carry enough segments for every pair crossing them (the busiest
    link sees 2*j*(n-j) circuits), so the burst exercises pure command
    contention without allocation failures, and FIFOs are sized at the
    worst-case simultaneous command count so nothing is dropped.
    """
    depth = analysis.max_total_comm(n)
    k = max(2 * j * (n - j) for j in range(1, n))
    t = build_1d(n, k, 16)
    events = [
        RequestEvent(0, s, d)
        for s in range(1, n + 1)
        for d in range(1, n + 1)
        if s != d
    ]
    config = RunConfig(
        fifo_depth=depth,
        collect_residence=True,
        trace_enabled=False,
        collect_link_busy=False,
    )
    return t, events, config


def streaming_soak(words: int, w: int = 24):
    """Two PEs exchanging coordinate/color word pairs in both directions."""
    t = build_1d(2, 2, w)
    events = [RequestEvent(0, 1, 2), RequestEvent(0, 2, 1)]
    start = 200  # both circuits are up well before this
    for i in range(words):
        events.append(SendEvent(start + i, 1, 2, i & 0xFFF))
        events.append(SendEvent(start + i, 2, 1, (i * 7 + 3) & 0xFFFFFF))
    config = RunConfig(
        trace_enabled=False, collect_link_busy=False, max_cycles=start + words + 1000
    )
    return t, events, config


@dataclass
class PropertyResult:
    name: str
    ok: bool
    detail: str


@dataclass
class CampaignReport:
    scenarios: int
    seed: int
    results: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def lines(self) -> list:
        out = [f"verify: {self.scenarios} scenarios, seed {self.seed}"]
        for r in self.results:
            out.append(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.detail}")
        return out


def _random_scenario(rng: random.Random, fifo_depth=None):
    """One randomized topology + event list + config."""
    if rng.random() < 0.7:
        n = rng.randint(2, 8)
        t = build_1d(n, rng.randint(1, 4), 16)
    else:
        t = build_2d(rng.randint(2, 4), rng.randint(1, 4), 16)
    pes = list(t.pe_addresses())
    events = []
    requested = []
    for _ in range(rng.randint(1, 8)):
        src, dst = rng.sample(pes, 2)
        at = rng.randint(0, 120)
        events.append(RequestEvent(at, src, dst))
        requested.append((at, src, dst))
    for at, src, dst in requested:
        if rng.random() < 0.5:
            events.append(DestroyEvent(at + rng.randint(1, 400), src, dst))
    for _ in range(rng.randint(0, 2)):
        events.append(ReconfigureEvent(rng.randint(0, 150), rng.choice(pes), rng.randint(5, 40)))
    if rng.random() < 0.25:
        events.append(RefuseEvent(rng.randint(0, 60), rng.choice(pes), True))
    n_eq = t.n if t.kind == "1d" else t.n * t.n
    depth = fifo_depth if fifo_depth is not None else rng.choice(
        [1, 2, 4, analysis.max_total_comm(n_eq)]
    )
    config = RunConfig(
        fifo_depth=depth,
        retry_limit=None,  # retry until delivered so cleanup always completes
        max_cycles=60_000,
        audit=True,
        trace_enabled=False,
        collect_link_busy=False,
        seed=rng.randint(0, 2**31),
    )
    return t, events, config


def _check_mesh_paths(max_side: int = 6) -> PropertyResult:
    """Exhaustive legality audit of the 2D policy for all pairs, N <= max_side."""
    checked = 0
    for side in range(2, max_side + 1):
        t = build_2d(side, 1, 1)
        pes = list(t.pe_addresses())
        for src in pes:
            for dst in pes:
                if src == dst:
                    continue
                plan = routing2d.plan_path(t, src, dst)
                checked += 1
                want = abs(dst[0] - src[0]) + abs(dst[1] - src[1])
                if len(plan.hops) != want:
                    return PropertyResult(
                        "mesh_path_legality", False, f"{src}->{dst} length {len(plan.hops)}"
                    )
                pos = src
                turns = 0
                orient = plan.hops[0].orientation
                for hop in plan.hops:
                    if hop.addr != pos:
                        return PropertyResult(
                            "mesh_path_legality", False, f"{src}->{dst} non-adjacent hop"
                        )
                    if hop.port is Port.DOWN and hop.addr[1] != dst[1]:
                        return PropertyResult(
                            "mesh_path_legality", False,
                            f"{src}->{dst} descends outside destination column",
                        )
                    if hop.orientation is not orient:
                        turns += 1
                        orient = hop.orientation
                    dr, dc = routing2d._MOVES[hop.port]
                    pos = (pos[0] + dr, pos[1] + dc)
                if pos != dst or turns > 1:
                    return PropertyResult(
                        "mesh_path_legality", False, f"{src}->{dst} pos={pos} turns={turns}"
                    )
    return PropertyResult("mesh_path_legality", True, f"{checked} pairs, sides 2..{max_side}")


def run_campaign(scenarios: int = 1000, seed: int = 0, fifo_depth=None,
                 determinism_samples: int = 3) -> CampaignReport:
    rng = random.Random(seed)
    report = CampaignReport(scenarios=scenarios, seed=seed)

    exclusivity = 0
    duplicates = 0
    leaks = 0
    stuck = 0
    mismatches = 0
    for i in range(scenarios):
        t, events, config = _random_scenario(rng, fifo_depth)
        result = run(t, events, config)
        for _, kind, _ in result.audit.violations:
            if kind == "segment_exclusivity":
                exclusivity += 1
            else:
                duplicates += 1
        leaks += len(result.audit.leaked)
        if not result.quiescent:
            stuck += 1
        if i < determinism_samples:
            traced = replace(config, trace_enabled=True)
            first = run(t, events, traced)
            again = run(t, events, traced)
            if again.trace != first.trace or again.stats.to_csv() != first.stats.to_csv():
                mismatches += 1

    report.results.append(
        PropertyResult("segment_exclusivity", exclusivity == 0, f"{exclusivity} violations")
    )
    report.results.append(
        PropertyResult(
            "duplicate_suppression", duplicates == 0, f"{duplicates} table/binding conflicts"
        )
    )
    report.results.append(
        PropertyResult(
            "leak_freedom", leaks == 0 and stuck == 0,
            f"{leaks} leaked segments, {stuck} non-quiescent runs",
        )
    )
    report.results.append(
        PropertyResult(
            "determinism", mismatches == 0,
            f"{determinism_samples} scenarios replayed, {mismatches} mismatches",
        )
    )
    report.results.append(_check_mesh_paths())
    return report
