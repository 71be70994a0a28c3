"""Crosspoint controller logic: command semantics and channel bookkeeping.

Connection setup is two-phase. A REQUEST travels to the destination without
touching any state; only the REPLY, retracing the route back toward the
source, claims one segment per link and programs the crossbar hop by hop.
The REPLY carries the index of the segment the previous hop picked
(downstream_segment) so adjacent crosspoints agree on the wiring without
negotiation. DESTROY sweeps the path toward the destination freeing
entries, CANCEL and CONFIRM are pure pass-through notifications.

Hardening rules for lossy operation: a crosspoint holds at most one channel
entry per (source, destination), so a duplicate REPLY after retransmission
reuses the existing entry instead of allocating twice, and DESTROY is an
idempotent no-op where no entry exists.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Iterable, Optional

from . import routing2d
from .errors import NoFreeSegment
from .topology import CpId, Port, SegmentPool, Topology


class CommandKind(str, Enum):
    REQUEST = "request"
    REPLY = "reply"
    CANCEL = "cancel"
    DESTROY = "destroy"
    CONFIRM = "confirm"

    def __str__(self) -> str:
        return self.value


# REQUEST and DESTROY travel toward the destination; the rest toward the source.
_TOWARD_DESTINATION = (CommandKind.REQUEST, CommandKind.DESTROY)

ENTRY_ALLOCATED = "allocated"
ENTRY_ACTIVE = "active"


@dataclass(frozen=True)
class Command:
    """One protocol message. ``uid`` identifies the journey across hops."""

    kind: CommandKind
    source: object
    destination: object
    downstream_segment: Optional[int] = None
    uid: int = 0
    reason: Optional[str] = None  # CANCEL cause: refused | no_segment | relay_full
    ack: Optional[int] = None  # CONFIRM only: uid of the DESTROY it answers

    def __post_init__(self):
        if self.source == self.destination:
            raise ValueError("command source and destination must differ")

    @property
    def conn(self) -> tuple:
        return (self.source, self.destination)

    def steering_target(self):
        return self.destination if self.kind in _TOWARD_DESTINATION else self.source


@dataclass
class ChannelEntry:
    source: object
    destination: object
    in_port: Port
    in_segment: Optional[int]
    out_port: Port
    out_segment: Optional[int]
    state: str = ENTRY_ALLOCATED

    @property
    def conn(self) -> tuple:
        return (self.source, self.destination)


class ChannelTable:
    """Per-crosspoint configuration registers, keyed by connection.

    Keying by (source, destination) enforces the at-most-one-entry rule by
    construction.
    """

    def __init__(self):
        self._entries: dict = {}

    def get(self, source, destination) -> Optional[ChannelEntry]:
        return self._entries.get((source, destination))

    def add(self, entry: ChannelEntry) -> None:
        key = entry.conn
        if key in self._entries:
            raise ValueError(f"duplicate channel entry for {key}")
        self._entries[key] = entry

    def remove(self, source, destination) -> Optional[ChannelEntry]:
        return self._entries.pop((source, destination), None)

    def entries(self) -> list[ChannelEntry]:
        return list(self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)

    def snapshot(self) -> tuple:
        """Hashable view used by tests to assert a handler changed nothing."""
        return tuple(
            (e.source, e.destination, e.in_port, e.in_segment, e.out_port, e.out_segment, e.state)
            for e in self._entries.values()
        )


def decide_direction_1d(self_idx: int, target: int) -> Port:
    """1D steering: toward the PE when equal, else toward the target index."""
    if target == self_idx:
        return Port.PE
    return Port.RIGHT if target > self_idx else Port.LEFT


def allocate_segment(free: Iterable[int]) -> int:
    """Pick the highest bus, i.e. the smallest free index.

    The caller removes the returned index from its free view.
    """
    try:
        return min(free)
    except ValueError:
        raise NoFreeSegment("no free segment on link") from None


@dataclass(frozen=True)
class Forward:
    """Write the command into the facing side FIFO of the neighbor across ``port``."""

    port: Port
    command: Command


@dataclass(frozen=True)
class Deliver:
    """Hand the command to the attached PE."""

    command: Command


class Controller:
    """The control half of one crosspoint.

    Pure state machine over this crosspoint's channel table plus the shared
    segment pool; the cycle engine invokes it single-threaded.
    """

    def __init__(
        self,
        topology: Topology,
        cp_id: CpId,
        pool: SegmentPool,
        next_uid: Callable[[], int] = lambda: 0,
    ):
        self.topology = topology
        self.cp_id = cp_id
        self.address = topology.cp_address(cp_id)
        self.orientation = topology.cp_orientation(cp_id)
        self.pool = pool
        self.next_uid = next_uid
        self.table = ChannelTable()

    # -- steering -------------------------------------------------------

    def steer(self, target) -> Port:
        """Output port toward ``target``; PE covers both delivery and relay."""
        if self.topology.kind == "1d":
            return decide_direction_1d(self.address, target)
        decision = routing2d.next_hop_2d(self.address, self.orientation, target)
        return Port.PE if decision is routing2d.RELAY else decision

    def _link(self, port: Port):
        return self.topology.port_link(self.cp_id, port)

    # -- handlers ---------------------------------------------------------

    def handle(self, cmd: Command, arrival_port: Port) -> list:
        handler = {
            CommandKind.REQUEST: self.handle_request,
            CommandKind.REPLY: self.handle_reply,
            CommandKind.CANCEL: self.handle_cancel,
            CommandKind.DESTROY: self.handle_destroy,
            CommandKind.CONFIRM: self.handle_confirm,
        }[cmd.kind]
        return handler(cmd, arrival_port)

    def handle_request(self, cmd: Command, arrival_port: Port) -> list:
        """Pass-through toward the destination; no channel state is touched.

        A retransmitted REQUEST whose pair already has an entry still passes
        unchanged; duplicate suppression happens at REPLY allocation.
        """
        port = self.steer(cmd.destination)
        if port is Port.PE:
            return [Deliver(cmd)]
        return [Forward(port, cmd)]

    def handle_reply(self, cmd: Command, arrival_port: Port) -> list:
        """Claim a segment toward the source and program the crossbar.

        On a duplicate (an entry for the pair already exists) the entry is
        reused and the REPLY forwarded with its recorded segment, so a
        retransmitted setup never allocates twice. On exhaustion the partial
        path is torn down: DESTROY back toward the destination, CANCEL on
        toward the source.
        """
        existing = self.table.get(cmd.source, cmd.destination)
        if existing is not None:
            if existing.out_port is Port.PE:
                return [Deliver(replace(cmd, downstream_segment=None))]
            return [Forward(existing.out_port, replace(cmd, downstream_segment=existing.out_segment))]

        out_port = self.steer(cmd.source)
        if out_port is Port.PE:
            # Source reached (or the route turns here): bind the PE port.
            state = ENTRY_ACTIVE if self.address == cmd.source else ENTRY_ALLOCATED
            self.table.add(
                ChannelEntry(
                    cmd.source,
                    cmd.destination,
                    in_port=arrival_port,
                    in_segment=cmd.downstream_segment,
                    out_port=Port.PE,
                    out_segment=None,
                    state=state,
                )
            )
            return [Deliver(replace(cmd, downstream_segment=None))]

        link = self._link(out_port)
        try:
            seg = allocate_segment(self.pool.free_segments(link))
        except NoFreeSegment:
            return self._teardown_partial(cmd, reason="no_segment")
        self.pool.bind(link, seg, cmd.conn)
        self.table.add(
            ChannelEntry(
                cmd.source,
                cmd.destination,
                in_port=arrival_port,
                in_segment=cmd.downstream_segment,
                out_port=out_port,
                out_segment=seg,
                state=ENTRY_ALLOCATED,
            )
        )
        return [Forward(out_port, replace(cmd, downstream_segment=seg))]

    def _teardown_partial(self, cmd: Command, reason: str) -> list:
        """Allocation failed: free everything behind us, notify the source."""
        destroy = Command(
            CommandKind.DESTROY, cmd.source, cmd.destination, uid=self.next_uid()
        )
        cancel = Command(
            CommandKind.CANCEL, cmd.source, cmd.destination, uid=self.next_uid(), reason=reason
        )
        actions = []
        back = self.steer(cmd.destination)
        actions.append(Deliver(destroy) if back is Port.PE else Forward(back, destroy))
        on = self.steer(cmd.source)
        actions.append(Deliver(cancel) if on is Port.PE else Forward(on, cancel))
        return actions

    def handle_cancel(self, cmd: Command, arrival_port: Port) -> list:
        """Pure pass-through toward the source; configurations untouched."""
        port = self.steer(cmd.source)
        if port is Port.PE:
            return [Deliver(cmd)]
        return [Forward(port, cmd)]

    def handle_destroy(self, cmd: Command, arrival_port: Port) -> list:
        """Free the pair's channel here, then keep sweeping toward the destination.

        Each crosspoint releases the segment it allocated (its out side);
        the in side is released by the neighboring owner when the sweep
        reaches it, so every slot is freed exactly once and the pool always
        mirrors the surviving entries. A DESTROY that finds no entry
        (retransmission, or a sweep that overtook the setup) forwards
        unchanged.
        """
        entry = self.table.remove(cmd.source, cmd.destination)
        if entry is not None:
            link = self._link(entry.out_port)
            if link is not None and entry.out_segment is not None:
                self.pool.release(link, entry.out_segment, cmd.conn)
        port = self.steer(cmd.destination)
        if port is Port.PE:
            return [Deliver(cmd)]
        return [Forward(port, cmd)]

    def handle_confirm(self, cmd: Command, arrival_port: Port) -> list:
        """Pass-through toward the source, which clears its teardown timer."""
        port = self.steer(cmd.source)
        if port is Port.PE:
            return [Deliver(cmd)]
        return [Forward(port, cmd)]
