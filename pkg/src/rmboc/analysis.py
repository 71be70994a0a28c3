"""Closed-form command-load bounds, brute-force oracles, and bound checking.

The closed forms describe the worst case of a 1D fabric under an all-pairs
burst: how many commands can be pending at one crosspoint across its three
input directions (max_total_comm) and the resulting per-crosspoint
processing-time ceiling (worst_case_latency). The oracle recomputes the
command count by enumerating every ordered PE pair and walking its path,
with no use of the closed form, so the two can be checked against each
other; check_bound then compares measured simulator residence times with
the ceiling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidParameter
from .topology import Port, build_2d
from .routing2d import plan_path

ORACLE_LIMIT = 128


def _check_n(n: int) -> None:
    if n < 2:
        raise InvalidParameter(f"need at least 2 PEs, got n={n}")


@dataclass(frozen=True)
class CommandLoadProfile:
    """Per-direction worst-case simultaneous command counts at crosspoint j."""

    n: int
    j: int
    left: int
    right: int
    pe: int

    @property
    def total(self) -> int:
        return self.left + self.right + self.pe


def direction_maxima(n: int, j: int) -> CommandLoadProfile:
    """Worst-case pending commands per input direction at position ``j``.

    From the right: every PE right of j sending to every PE at or left of
    j. From the left: every PE left of j sending to every PE at or right of
    j. From the attached PE: one command to each other PE.
    """
    _check_n(n)
    if not 1 <= j <= n:
        raise InvalidParameter(f"position j={j} outside [1, {n}]")
    return CommandLoadProfile(
        n=n,
        j=j,
        left=(j - 1) * (n - j + 1),
        right=(n - j) * j,
        pe=n - 1,
    )


def max_total_comm(n: int) -> int:
    """Peak simultaneous command count over all crosspoint positions.

    Closed form ceil((n^2 + 2n - 4) / 2); the ceiling is exact integer
    arithmetic.
    """
    _check_n(n)
    return (n * n + 2 * n - 4 + 1) // 2


def worst_case_latency(n: int) -> int:
    """Ceiling on one command's residence at one crosspoint, in cycles.

    Every command ahead of it costs one pipeline issue slot (4 cycles) and
    its own second stage costs 4 more.
    """
    _check_n(n)
    return (max_total_comm(n) - 1) * 4 + 4


def oracle_max_total_comm(n: int) -> int:
    """Brute-force recomputation of max_total_comm.

    Enumerates every ordered (source, destination) pair, walks the
    crosspoints its command traverses, classifies the input direction at
    each, and takes the maximum per-crosspoint total. Deliberately avoids
    the closed form.
    """
    _check_n(n)
    if n > ORACLE_LIMIT:
        raise InvalidParameter(f"oracle limited to n <= {ORACLE_LIMIT}")
    left = [0] * (n + 1)
    right = [0] * (n + 1)
    pe = [0] * (n + 1)
    for s in range(1, n + 1):
        for d in range(1, n + 1):
            if d == s:
                continue
            lo, hi = (s, d) if s < d else (d, s)
            for j in range(lo, hi + 1):
                if s == j:
                    pe[j] += 1
                elif s > j:
                    right[j] += 1
                else:
                    left[j] += 1
    return max(left[j] + right[j] + pe[j] for j in range(1, n + 1))


def oracle_argmax(n: int) -> list[int]:
    """Positions that attain the oracle maximum."""
    _check_n(n)
    totals = [direction_maxima(n, j).total for j in range(1, n + 1)]
    best = max(totals)
    return [j for j, t in enumerate(totals, start=1) if t == best]


@dataclass
class BoundReport:
    """Outcome of checking measured residences against the ceiling."""

    n: int
    bound: int
    preconditions_ok: bool
    observed_max: int = 0
    violations: list = field(default_factory=list)  # (uid, cp_id, residence)
    multi_episode_uids: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.preconditions_ok and not self.violations and not self.multi_episode_uids


def check_bound(residences, n: int, fifo_depth: int, drops: int = 0) -> BoundReport:
    """Verify per-crosspoint residences from a run against the ceiling.

    ``residences`` is an iterable of (uid, cp_id, enqueued_at, completed_at)
    records; residence is measured from side-FIFO entry to output write.
    The ceiling only holds when the FIFOs were deep enough that nothing was
    dropped, so shallower runs are reported as precondition failures rather
    than bound violations. Also flags commands that spent more than one
    idle-latency worth of cycles (8) at more than one crosspoint, which the
    single-burst load profile says cannot happen.
    """
    bound = worst_case_latency(n)
    report = BoundReport(n=n, bound=bound, preconditions_ok=True)
    if fifo_depth < max_total_comm(n) or drops > 0:
        report.preconditions_ok = False
        return report
    slow_visits: dict = {}
    for uid, cp_id, enq, done in residences:
        residence = done - enq
        report.observed_max = max(report.observed_max, residence)
        if residence > bound:
            report.violations.append((uid, cp_id, residence))
        if residence > 8:
            slow_visits.setdefault(uid, []).append((cp_id, residence))
    report.multi_episode_uids = sorted(
        uid for uid, visits in slow_visits.items() if len(visits) > 1
    )
    return report


@dataclass(frozen=True)
class MeshDemand:
    """Segment demand of an all-pairs workload on an N x N mesh."""

    side: int
    per_link: dict
    max_link_load: int
    pair_count: int


def segment_demand_2d(side: int) -> MeshDemand:
    """Per-link segment count needed to carry every ordered pair at once.

    Routes every ordered PE pair with the mesh policy and counts paths per
    link; the maximum is the k a fully-connected mesh would need. Used to
    audit that per-link demand grows about quadratically in N (N^3 total
    across a dimension's N rows or columns).
    """
    t = build_2d(side, 1, 1)
    loads = {lid: 0 for lid in t.links}
    pes = list(t.pe_addresses())
    pairs = 0
    for src in pes:
        for dst in pes:
            if src == dst:
                continue
            pairs += 1
            for hop in plan_path(t, src, dst).hops:
                r, c = hop.addr
                if hop.port is Port.RIGHT:
                    loads[("h", r, c)] += 1
                elif hop.port is Port.LEFT:
                    loads[("h", r, c - 1)] += 1
                elif hop.port is Port.DOWN:
                    loads[("v", r, c)] += 1
                else:
                    loads[("v", r - 1, c)] += 1
    return MeshDemand(side, loads, max(loads.values()), pairs)
