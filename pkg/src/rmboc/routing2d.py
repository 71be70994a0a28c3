"""2D path policy: climb first, move sideways, descend only in the goal column.

Routes prefer the upward channel: when the destination sits on a higher
level (smaller row) the route climbs in the source column and then moves
horizontally along the destination row. When the destination sits lower,
the route first moves horizontally along the source row and only takes the
downward channel once it is in the destination column. Every route
therefore has at most one orientation change, performed by the PE at the
turn point, which relays commands between its row and column crosspoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

from .errors import InvalidAddress
from .topology import Address, Orientation, Port, Topology

# Returned by next_hop_2d when the command must cross to the PE's
# other-orientation crosspoint before it can keep moving.
RELAY = "relay"


class Hop(NamedTuple):
    addr: tuple
    orientation: Orientation
    port: Port


@dataclass(frozen=True)
class PathPlan:
    source: tuple
    destination: tuple
    hops: tuple  # movement hops only; PE delivery at the end is implicit
    turn: Optional[tuple]  # PE that relays between orientations, if any

    def __len__(self) -> int:
        return len(self.hops)


def start_orientation(src: tuple, dst: tuple) -> Orientation:
    """Which crosspoint of the source PE a command for ``dst`` enters first."""
    dr = dst[0] - src[0]
    dc = dst[1] - src[1]
    if dr < 0:
        return Orientation.COL
    if dr > 0:
        return Orientation.COL if dc == 0 else Orientation.ROW
    return Orientation.ROW


def next_hop_2d(self_addr: tuple, orientation: Orientation, target: tuple):
    """Local forwarding decision of one crosspoint.

    Returns a movement Port, Port.PE when the target PE is attached here,
    or RELAY when the command must switch orientation at this position.
    """
    r, c = self_addr
    tr, tc = target
    if orientation is Orientation.COL:
        if tr < r:
            return Port.UP
        if tr > r:
            # Descend only in the destination column.
            return Port.DOWN if tc == c else RELAY
        return Port.PE if tc == c else RELAY
    if tc > c:
        return Port.RIGHT
    if tc < c:
        return Port.LEFT
    return Port.PE if tr == r else RELAY


_MOVES = {
    Port.UP: (-1, 0),
    Port.DOWN: (1, 0),
    Port.LEFT: (0, -1),
    Port.RIGHT: (0, 1),
}


def plan_path(t: Topology, src: Address, dst: Address) -> PathPlan:
    """Full hop list from source PE to destination PE.

    Iterates the local decision rule, so by construction the plan and
    next_hop_2d agree; tests check the plan's shape properties instead.
    """
    if t.kind != "2d":
        raise InvalidAddress("plan_path needs a 2D topology")
    t.check_address(src)
    t.check_address(dst)
    if src == dst:
        raise InvalidAddress(f"degenerate route {src} -> {dst}")

    addr = src
    orient = start_orientation(src, dst)
    hops = []
    turn = None
    # A legal route is at most |dr| + |dc| movements plus one relay.
    for _ in range(2 * t.n + 2):
        decision = next_hop_2d(addr, orient, dst)
        if decision is Port.PE:
            return PathPlan(src, dst, tuple(hops), turn)
        if decision is RELAY:
            if turn is not None:
                raise InvalidAddress(f"route {src} -> {dst} would turn twice")
            turn = addr
            orient = orient.other()
            continue
        hops.append(Hop(addr, orient, decision))
        dr, dc = _MOVES[decision]
        addr = (addr[0] + dr, addr[1] + dc)
    raise InvalidAddress(f"route {src} -> {dst} did not terminate")
