"""Static network structure: processing elements, crosspoints, segmented links.

A 1D fabric is a line of n crosspoints (addresses 1..n, one PE each, no
wrap-around). A 2D fabric is an N x N mesh in which every PE owns two
crosspoints, one on its row network and one on its column network; row 0
is the topmost ("highest") level. Every link carries k parallel bus
segments; segment index 0 denotes the highest bus and allocation always
prefers the lowest free index.

The Topology object is immutable after construction. Mutable segment
binding state lives in SegmentPool, which a simulation run instantiates
per topology.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Union

from .errors import InvalidAddress, InvalidParameter, NoFreeSegment


class Port(str, Enum):
    """Crosspoint port names.

    1D and row crosspoints use LEFT/RIGHT/PE; column crosspoints use
    UP/DOWN/PE.
    """

    LEFT = "left"
    RIGHT = "right"
    UP = "up"
    DOWN = "down"
    PE = "pe"

    def __str__(self) -> str:
        return self.value


class Orientation(str, Enum):
    ROW = "row"
    COL = "col"

    def other(self) -> "Orientation":
        return Orientation.COL if self is Orientation.ROW else Orientation.ROW

    def __str__(self) -> str:
        return self.value


# 1D addresses are ints in [1, n]; 2D addresses are (row, col) in [0, N)^2.
Address = Union[int, tuple]
# Crosspoint ids: int j for 1D; (Orientation, row, col) for 2D.
CpId = Union[int, tuple]
# Link ids: ("h", j) joins 1D crosspoints j and j+1; ("h", r, c) joins row
# crosspoints (r,c)-(r,c+1); ("v", r, c) joins column crosspoints (r,c)-(r+1,c).
LinkId = tuple

ROTATION_ROW = (Port.LEFT, Port.RIGHT, Port.PE)
ROTATION_COL = (Port.UP, Port.DOWN, Port.PE)


@dataclass(frozen=True)
class Link:
    """One inter-crosspoint link carrying k independent bus segments."""

    link_id: LinkId
    orientation: Orientation
    endpoints: tuple  # pair of lattice-adjacent CpIds
    k: int


@dataclass(frozen=True)
class Topology:
    kind: str  # "1d" | "2d"
    n: int  # line length for 1D, mesh side for 2D
    k: int
    w: int
    links: dict  # LinkId -> Link

    # -- addresses ----------------------------------------------------

    def pe_addresses(self) -> Iterator[Address]:
        if self.kind == "1d":
            yield from range(1, self.n + 1)
        else:
            for r in range(self.n):
                for c in range(self.n):
                    yield (r, c)

    def valid_address(self, a: Address) -> bool:
        if self.kind == "1d":
            return isinstance(a, int) and 1 <= a <= self.n
        return (
            isinstance(a, tuple)
            and len(a) == 2
            and all(isinstance(x, int) and 0 <= x < self.n for x in a)
        )

    def check_address(self, a: Address) -> None:
        if not self.valid_address(a):
            raise InvalidAddress(f"address {a!r} not in topology")

    # -- crosspoints ---------------------------------------------------

    def crosspoint_ids(self) -> list[CpId]:
        if self.kind == "1d":
            return list(range(1, self.n + 1))
        ids = []
        for orient in (Orientation.ROW, Orientation.COL):
            for r in range(self.n):
                for c in range(self.n):
                    ids.append((orient, r, c))
        return ids

    def pe_crosspoint(self, a: Address, orientation: Orientation) -> CpId:
        """The crosspoint attaching PE ``a`` on the given orientation."""
        self.check_address(a)
        if self.kind == "1d":
            return a
        return (orientation, a[0], a[1])

    def cp_address(self, cp: CpId) -> Address:
        return cp if self.kind == "1d" else (cp[1], cp[2])

    def cp_orientation(self, cp: CpId) -> Orientation:
        return Orientation.ROW if self.kind == "1d" else cp[0]

    def cp_rotation(self, cp: CpId) -> tuple:
        return ROTATION_ROW if self.cp_orientation(cp) is Orientation.ROW else ROTATION_COL

    # -- adjacency -----------------------------------------------------

    def port_link(self, cp: CpId, port: Port) -> Optional[LinkId]:
        """Link reached through ``port``, or None at a boundary / PE port."""
        if port is Port.PE:
            return None
        if self.kind == "1d":
            j = cp
            if port is Port.LEFT and j > 1:
                return ("h", j - 1)
            if port is Port.RIGHT and j < self.n:
                return ("h", j)
            return None
        orient, r, c = cp
        if orient is Orientation.ROW:
            if port is Port.LEFT and c > 0:
                return ("h", r, c - 1)
            if port is Port.RIGHT and c < self.n - 1:
                return ("h", r, c)
        else:
            if port is Port.UP and r > 0:
                return ("v", r - 1, c)
            if port is Port.DOWN and r < self.n - 1:
                return ("v", r, c)
        return None

    def neighbor_cp(self, cp: CpId, port: Port) -> Optional[CpId]:
        """Adjacent crosspoint across ``port``, or None at a boundary."""
        if self.port_link(cp, port) is None:
            return None
        if self.kind == "1d":
            return cp - 1 if port is Port.LEFT else cp + 1
        orient, r, c = cp
        if port is Port.LEFT:
            return (orient, r, c - 1)
        if port is Port.RIGHT:
            return (orient, r, c + 1)
        if port is Port.UP:
            return (orient, r - 1, c)
        return (orient, r + 1, c)

    def opposite_port(self, port: Port) -> Port:
        return {
            Port.LEFT: Port.RIGHT,
            Port.RIGHT: Port.LEFT,
            Port.UP: Port.DOWN,
            Port.DOWN: Port.UP,
        }[port]


def build_1d(n: int, k: int, w: int) -> Topology:
    """A line of ``n`` crosspoints joined by n-1 links of ``k`` segments."""
    if n < 2:
        raise InvalidParameter(f"1D fabric needs at least 2 PEs, got n={n}")
    if k < 1:
        raise InvalidParameter(f"need at least 1 segment per link, got k={k}")
    if w < 1:
        raise InvalidParameter(f"data width must be positive, got w={w}")
    links = {}
    for j in range(1, n):
        lid = ("h", j)
        links[lid] = Link(lid, Orientation.ROW, (j, j + 1), k)
    return Topology("1d", n, k, w, links)


def build_2d(side: int, k: int, w: int) -> Topology:
    """An N x N mesh with one row and one column crosspoint per PE."""
    if side < 2:
        raise InvalidParameter(f"mesh side must be at least 2, got N={side}")
    if k < 1:
        raise InvalidParameter(f"need at least 1 segment per link, got k={k}")
    if w < 1:
        raise InvalidParameter(f"data width must be positive, got w={w}")
    links = {}
    for r in range(side):
        for c in range(side - 1):
            lid = ("h", r, c)
            links[lid] = Link(
                lid, Orientation.ROW, ((Orientation.ROW, r, c), (Orientation.ROW, r, c + 1)), k
            )
    for r in range(side - 1):
        for c in range(side):
            lid = ("v", r, c)
            links[lid] = Link(
                lid, Orientation.COL, ((Orientation.COL, r, c), (Orientation.COL, r + 1, c)), k
            )
    return Topology("2d", side, k, w, links)


_DIRECTION_DELTAS = {
    Port.LEFT: (0, -1),
    Port.RIGHT: (0, 1),
    Port.UP: (-1, 0),
    Port.DOWN: (1, 0),
}


def neighbor(t: Topology, a: Address, d: Port) -> Optional[Address]:
    """Adjacent PE address in direction ``d``, or None at the boundary."""
    t.check_address(a)
    if t.kind == "1d":
        if d is Port.LEFT and a > 1:
            return a - 1
        if d is Port.RIGHT and a < t.n:
            return a + 1
        return None
    dr, dc = _DIRECTION_DELTAS[d]
    b = (a[0] + dr, a[1] + dc)
    return b if t.valid_address(b) else None


class SegmentPool:
    """Authoritative segment-binding state for every link of a topology.

    Both endpoint crosspoints of a link observe the same binding state, so
    a claim made while a REPLY is still propagating is immediately visible
    on the opposite side. A slot is free or bound to exactly one connection
    identifier (an ordered (source, destination) pair); opposite directions
    of a PE pair are distinct connections and never share a slot.
    """

    def __init__(self, topology: Topology):
        self._slots: dict = {lid: [None] * topology.k for lid in topology.links}
        self._busy: dict = {lid: 0 for lid in topology.links}

    def free_segments(self, link_id: LinkId) -> list[int]:
        return [i for i, conn in enumerate(self._slots[link_id]) if conn is None]

    def bind(self, link_id: LinkId, seg: int, conn: tuple) -> None:
        slots = self._slots[link_id]
        if slots[seg] is not None:
            raise NoFreeSegment(f"segment {seg} on {link_id} already bound to {slots[seg]}")
        slots[seg] = conn
        self._busy[link_id] += 1

    def release(self, link_id: LinkId, seg: int, conn: tuple) -> bool:
        """Free a slot only if it is still bound to ``conn``.

        The conditional makes teardown sweeps idempotent and keeps a
        retransmitted or second-endpoint release from clobbering a slot
        that has since been reallocated.
        """
        slots = self._slots[link_id]
        if slots[seg] == conn:
            slots[seg] = None
            self._busy[link_id] -= 1
            return True
        return False

    def binding(self, link_id: LinkId, seg: int):
        return self._slots[link_id][seg]

    def busy_count(self, link_id: LinkId) -> int:
        return self._busy[link_id]

    def bound_slots(self) -> list[tuple]:
        """All (link_id, segment, connection) bindings, in link order."""
        out = []
        for lid, slots in self._slots.items():
            for i, conn in enumerate(slots):
                if conn is not None:
                    out.append((lid, i, conn))
        return out

    def total_bound(self) -> int:
        return sum(self._busy.values())

    def total_slots(self) -> int:
        return sum(len(s) for s in self._slots.values())
