"""Deterministic cycle-driven simulation of the whole fabric.

Each cycle runs a fixed sequence of phases:

  A. data-word arrivals, scenario events due this cycle, and PE emissions
     scheduled for this cycle (commands land in side FIFOs);
  B. stage-two ticks for every crosspoint in id order; a completion runs
     the controller and its outputs are committed immediately, so they are
     visible to any selector fill later this cycle;
  C. per crosspoint: stage-one tick, stage-two fill, stage-one fill;
  D. PE models: consume deliveries, then fire retransmission timers;
  E. optional per-cycle invariant audit and bookkeeping.

Identical topology, events and configuration therefore produce identical
traces and statistics. Reconfiguration is a window during which a
crosspoint's buffered and in-flight commands are discarded and arrivals
are dropped, while its channel configuration (and any circuits through
it) persists untouched.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from . import analysis, routing2d
from .crosspoint import Crosspoint
from .errors import ConfigError, InvalidAddress, NotConnected
from .protocol import Command, CommandKind, Controller, Forward
from .topology import Address, Orientation, Port, SegmentPool, Topology

# ---------------------------------------------------------------------------
# scenario events


@dataclass(frozen=True)
class RequestEvent:
    at: int
    src: Address
    dst: Address


@dataclass(frozen=True)
class SendEvent:
    at: int
    src: Address
    dst: Address
    word: int


@dataclass(frozen=True)
class DestroyEvent:
    at: int
    src: Address
    dst: Address


@dataclass(frozen=True)
class ReconfigureEvent:
    at: int
    pe: Address
    duration: int


@dataclass(frozen=True)
class RefuseEvent:
    at: int
    pe: Address
    refuse: bool = True


ScenarioEvent = Union[RequestEvent, SendEvent, DestroyEvent, ReconfigureEvent, RefuseEvent]


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    """Knobs of one simulation run.

    ``fifo_depth`` defaults to the worst-case simultaneous command count of
    the topology so that nothing is dropped; ``timeout`` defaults to four
    times the per-crosspoint processing-time ceiling. A ``retry_limit`` of
    None retries forever; retransmission intervals double on each retry.
    """

    fifo_depth: Optional[int] = None
    pe_latency: int = 2
    relay_latency: int = 2
    relay_capacity: Optional[int] = None
    timeout: Optional[int] = None
    retry_limit: Optional[int] = 8
    max_cycles: int = 100_000
    seed: int = 0
    audit: bool = False
    collect_residence: bool = False
    trace_enabled: bool = True
    collect_link_busy: bool = True

    def resolve(self, t: Topology) -> "RunConfig":
        n_eq = t.n if t.kind == "1d" else t.n * t.n
        depth = self.fifo_depth if self.fifo_depth is not None else analysis.max_total_comm(n_eq)
        timeout = (
            self.timeout
            if self.timeout is not None
            else 4 * analysis.worst_case_latency(n_eq)
        )
        cfg = replace(self, fifo_depth=depth, timeout=timeout)
        if cfg.fifo_depth < 1:
            raise ConfigError(f"fifo_depth must be positive, got {cfg.fifo_depth}")
        if cfg.pe_latency < 1 or cfg.relay_latency < 1:
            # PE responses are clocked; a same-cycle response cannot be
            # injected after the cycle's arrivals were already committed.
            raise ConfigError("PE latencies must be at least 1 cycle")
        if cfg.timeout <= 8:
            raise ConfigError("timeout must exceed the 8-cycle hop latency")
        if cfg.retry_limit is not None and cfg.retry_limit < 0:
            raise ConfigError("retry_limit must be None or >= 0")
        if cfg.max_cycles < 1:
            raise ConfigError("max_cycles must be positive")
        if cfg.relay_capacity is not None and cfg.relay_capacity < 0:
            raise ConfigError("relay_capacity must be None or >= 0")
        if t.w > 64:
            raise ConfigError(f"data width limited to 64 bits, got w={t.w}")
        return cfg


# ---------------------------------------------------------------------------
# statistics


@dataclass
class AttemptRecord:
    """One connection attempt, from request to teardown."""

    src: Address
    dst: Address
    requested_at: int
    outcome: str = "pending"
    established_at: Optional[int] = None
    setup_cycles: Optional[int] = None
    retransmissions: int = 0
    cancel_reason: Optional[str] = None
    destroyed_at: Optional[int] = None
    confirmed_at: Optional[int] = None
    teardown_retransmissions: int = 0


@dataclass
class StreamStats:
    sent: int = 0
    delivered: int = 0
    lost: int = 0
    sent_sum: int = 0
    sent_xor: int = 0
    delivered_sum: int = 0
    delivered_xor: int = 0

    @property
    def intact(self) -> bool:
        return (
            self.lost == 0
            and self.sent == self.delivered
            and self.sent_sum == self.delivered_sum
            and self.sent_xor == self.delivered_xor
        )


_COUNTER_KEYS = (
    "commands_processed",
    "established",
    "closed",
    "duplicates",
    "cancels_refused",
    "cancels_no_segment",
    "cancels_relay_full",
    "failed_requests",
    "failed_teardowns",
    "request_retransmissions",
    "destroy_retransmissions",
    "defensive_destroys",
    "drops_full",
    "drops_reconfig",
    "purged",
    "relays",
    "aborted",
    "superseded",
    "rejected_self",
    "destroy_ignored",
    "words_sent",
    "words_delivered",
    "words_lost",
    "max_residence",
)

ATTEMPT_COLUMNS = (
    "src",
    "dst",
    "requested_at",
    "outcome",
    "established_at",
    "setup_cycles",
    "retransmissions",
    "cancel_reason",
    "destroyed_at",
    "confirmed_at",
    "teardown_retransmissions",
)


def fmt_addr(a: Address) -> str:
    return str(a) if isinstance(a, int) else f"{a[0]},{a[1]}"


def fmt_link(lid) -> str:
    return ":".join(str(x) for x in lid)


class Stats:
    """Measured outcomes of one run: per-attempt rows plus a summary block."""

    def __init__(self):
        self.attempts: list[AttemptRecord] = []
        self.counters: dict = {k: 0 for k in _COUNTER_KEYS}
        self.link_busy: dict = {}
        self.streams: dict = {}
        self.cycles_run: int = 0
        self.quiescent_at: Optional[int] = None
        self.seed: int = 0

    def bump(self, key: str, by: int = 1) -> None:
        self.counters[key] += by

    def stream(self, conn) -> StreamStats:
        if conn not in self.streams:
            self.streams[conn] = StreamStats()
        return self.streams[conn]

    def to_csv(self) -> str:
        """Frozen report layout: attempt rows, blank line, metric/value rows."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(ATTEMPT_COLUMNS)
        for a in self.attempts:
            wr.writerow(
                [
                    fmt_addr(a.src),
                    fmt_addr(a.dst),
                    a.requested_at,
                    a.outcome,
                    "" if a.established_at is None else a.established_at,
                    "" if a.setup_cycles is None else a.setup_cycles,
                    a.retransmissions,
                    a.cancel_reason or "",
                    "" if a.destroyed_at is None else a.destroyed_at,
                    "" if a.confirmed_at is None else a.confirmed_at,
                    a.teardown_retransmissions,
                ]
            )
        wr.writerow([])
        wr.writerow(["metric", "value"])
        wr.writerow(["cycles_run", self.cycles_run])
        wr.writerow(["quiescent_at", "" if self.quiescent_at is None else self.quiescent_at])
        wr.writerow(["seed", self.seed])
        for key in _COUNTER_KEYS:
            wr.writerow([key, self.counters[key]])
        for lid in sorted(self.link_busy, key=fmt_link):
            wr.writerow([f"link_busy[{fmt_link(lid)}]", self.link_busy[lid]])
        for conn in sorted(self.streams, key=lambda c: (fmt_addr(c[0]), fmt_addr(c[1]))):
            s = self.streams[conn]
            name = f"stream[{fmt_addr(conn[0])}->{fmt_addr(conn[1])}]"
            wr.writerow([f"{name}.sent", s.sent])
            wr.writerow([f"{name}.delivered", s.delivered])
            wr.writerow([f"{name}.lost", s.lost])
            wr.writerow([f"{name}.intact", int(s.intact)])
        return buf.getvalue()


@dataclass
class AuditReport:
    violations: list = field(default_factory=list)  # (cycle, kind, detail)
    leaked: list = field(default_factory=list)  # (link_id, seg, conn)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.leaked


@dataclass
class RunResult:
    stats: Stats
    trace: list
    residences: list
    audit: AuditReport
    quiescent: bool


# ---------------------------------------------------------------------------
# PE model


@dataclass
class _Pending:
    attempt: AttemptRecord
    issued_at: int
    deadline: int
    retries: int = 0
    # Teardown was requested mid-setup. The attempt keeps retransmitting
    # until a REPLY or CANCEL resolves it, and only then is the path swept:
    # sweeping earlier would let the in-flight REPLY allocate behind the
    # sweep, orphaning segments if it is then dropped.
    abort_requested: bool = False


@dataclass
class _Teardown:
    attempt: Optional[AttemptRecord]
    deadline: int
    retries: int = 0
    expect_ack: int = 0  # uid of the newest DESTROY; stale CONFIRMs are ignored


@dataclass
class _Connection:
    attempt: AttemptRecord
    established_at: int


class PeModel:
    """Behavior of one processing element.

    Issues and answers requests, keeps retransmission timers for requests
    awaiting a REPLY and teardowns awaiting a CONFIRM, and on a mesh relays
    commands between its row and column crosspoints, stitching circuits
    across the turn in its relay table.
    """

    def __init__(self, address: Address, engine: "Engine"):
        self.address = address
        self.engine = engine
        self.inbox: list = []  # (Command, arrival Orientation)
        self.pending: dict = {}  # dst -> _Pending
        self.teardown: dict = {}  # dst -> _Teardown
        self.active_out: dict = {}  # dst -> _Connection
        self.accepted_in: set = set()
        self.refuse = False
        self.relay_stitches: set = set()  # connections turned at this PE

    @property
    def has_timers(self) -> bool:
        return bool(self.pending) or bool(self.teardown)

    # -- deliveries -----------------------------------------------------

    def on_delivery(self, cmd: Command, from_orient: Orientation, cycle: int) -> None:
        me = self.address
        kind = cmd.kind
        mine = cmd.steering_target() == me
        if not mine:
            self._relay(cmd, from_orient, cycle)
            return
        if kind is CommandKind.REQUEST:
            self._answer_request(cmd, cycle)
        elif kind is CommandKind.REPLY:
            self._on_reply(cmd, cycle)
        elif kind is CommandKind.CANCEL:
            self._on_cancel(cmd, cycle)
        elif kind is CommandKind.DESTROY:
            self._on_destroy_delivered(cmd, cycle)
        else:
            self._on_confirm(cmd, cycle)

    def _answer_request(self, cmd: Command, cycle: int) -> None:
        eng = self.engine
        if self.refuse:
            answer = Command(
                CommandKind.CANCEL, cmd.source, cmd.destination,
                uid=eng.next_uid(), reason="refused",
            )
        else:
            self.accepted_in.add(cmd.source)
            answer = Command(
                CommandKind.REPLY, cmd.source, cmd.destination, uid=eng.next_uid()
            )
        eng.schedule_emission(cycle + eng.config.pe_latency, self.address, answer)

    def _on_reply(self, cmd: Command, cycle: int) -> None:
        eng = self.engine
        dst = cmd.destination
        pend = self.pending.pop(dst, None)
        if pend is not None:
            eng.timer_count -= 1
            attempt = pend.attempt
            if pend.abort_requested:
                # The circuit just finished building; now it can be swept
                # without racing the setup.
                attempt.outcome = "aborted"
                eng.stats.bump("aborted")
                eng.trace(cycle, f"pe:{fmt_addr(self.address)}", "aborted", cmd)
                self._guarded_sweep(dst, attempt, cycle)
                return
            attempt.established_at = cycle
            attempt.setup_cycles = cycle - attempt.requested_at
            if dst in self.active_out:
                attempt.outcome = "duplicate"
                eng.stats.bump("duplicates")
            else:
                attempt.outcome = "established"
                self.active_out[dst] = _Connection(attempt, cycle)
                eng.stats.bump("established")
                eng.trace(cycle, f"pe:{fmt_addr(self.address)}", "established", cmd)
                # Any older teardown timer is obsolete: its sweep ran before
                # this circuit was built, and entries it missed have been
                # rewoven into the new circuit by the one-entry-per-pair rule.
                if dst in self.teardown:
                    del self.teardown[dst]
                    eng.timer_count -= 1
            return
        if dst in self.active_out:
            eng.stats.bump("duplicates")
            eng.trace(cycle, f"pe:{fmt_addr(self.address)}", "duplicate_reply", cmd)
            return
        # A REPLY nobody is waiting for: a teardown overtook the setup and
        # segments may have been claimed behind the sweep. Sweep again.
        eng.stats.bump("defensive_destroys")
        eng.trace(cycle, f"pe:{fmt_addr(self.address)}", "defensive_destroy", cmd)
        self._guarded_sweep(dst, None, cycle)

    def _on_cancel(self, cmd: Command, cycle: int) -> None:
        eng = self.engine
        dst = cmd.destination
        pend = self.pending.pop(dst, None)
        reason = cmd.reason or "refused"
        if pend is not None:
            eng.timer_count -= 1
            pend.attempt.outcome = f"cancelled-{reason}"
            pend.attempt.cancel_reason = reason
            eng.stats.bump(f"cancels_{reason}")
            eng.trace(cycle, f"pe:{fmt_addr(self.address)}", f"cancelled_{reason}", cmd)
        if reason == "refused":
            return
        # A no-segment or relay-full CANCEL means a partial circuit was
        # built and the crosspoint-emitted cleanup sweep may itself have
        # been lost; run (or re-arm) a sweep of our own, guarded by the
        # CONFIRM timer, unless the pair is live.
        if dst in self.active_out:
            return
        self._guarded_sweep(dst, pend.attempt if pend is not None else None, cycle)

    def _guarded_sweep(self, dst, attempt, cycle: int) -> None:
        """Issue a DESTROY that the teardown timer retransmits until CONFIRMed.

        If a teardown is already pending it is re-armed with the new sweep's
        uid: the old sweep may predate the allocations being cleaned, so its
        CONFIRM must not be allowed to close the timer.
        """
        eng = self.engine
        destroy = Command(CommandKind.DESTROY, self.address, dst, uid=eng.next_uid())
        eng.schedule_emission(cycle + eng.config.pe_latency, self.address, destroy)
        td = self.teardown.get(dst)
        if td is None:
            self.teardown[dst] = _Teardown(
                attempt, cycle + eng.config.timeout, expect_ack=destroy.uid
            )
            eng.timer_count += 1
        else:
            td.expect_ack = destroy.uid
            if td.attempt is None:
                td.attempt = attempt

    def _on_destroy_delivered(self, cmd: Command, cycle: int) -> None:
        # Always acknowledge, echoing the sweep's uid; a retransmitted
        # sweep must be answered too.
        eng = self.engine
        self.accepted_in.discard(cmd.source)
        confirm = Command(
            CommandKind.CONFIRM, cmd.source, cmd.destination,
            uid=eng.next_uid(), ack=cmd.uid,
        )
        eng.schedule_emission(cycle + eng.config.pe_latency, self.address, confirm)

    def _on_confirm(self, cmd: Command, cycle: int) -> None:
        eng = self.engine
        td = self.teardown.get(cmd.destination)
        if td is None:
            return
        if cmd.ack != td.expect_ack:
            # Acknowledges an older sweep; a newer one is still in flight.
            return
        del self.teardown[cmd.destination]
        eng.timer_count -= 1
        eng.stats.bump("closed")
        if td.attempt is not None:
            td.attempt.confirmed_at = cycle
            if td.attempt.outcome == "established":
                td.attempt.outcome = "closed"
        eng.trace(cycle, f"pe:{fmt_addr(self.address)}", "confirmed", cmd)

    # -- relaying (mesh only) ---------------------------------------------

    def _relay(self, cmd: Command, from_orient: Orientation, cycle: int) -> None:
        eng = self.engine
        conn = cmd.conn
        if cmd.kind is CommandKind.REPLY and conn not in self.relay_stitches:
            cap = eng.config.relay_capacity
            if cap is not None and len(self.relay_stitches) >= cap:
                eng.trace(cycle, f"pe:{fmt_addr(self.address)}", "relay_full", cmd)
                cancel = Command(
                    CommandKind.CANCEL, cmd.source, cmd.destination,
                    uid=eng.next_uid(), reason="relay_full",
                )
                destroy = Command(
                    CommandKind.DESTROY, cmd.source, cmd.destination, uid=eng.next_uid()
                )
                at = cycle + eng.config.pe_latency
                eng.schedule_emission(at, self.address, destroy)
                eng.schedule_emission(at, self.address, cancel)
                return
            self.relay_stitches.add(conn)
        if cmd.kind is CommandKind.DESTROY:
            self.relay_stitches.discard(conn)
        eng.stats.bump("relays")
        eng.trace(cycle, f"pe:{fmt_addr(self.address)}", "relay", cmd)
        other_cp = eng.topology.pe_crosspoint(self.address, from_orient.other())
        relayed = replace(cmd, downstream_segment=None)
        eng.schedule_to_cp(cycle + eng.config.relay_latency, other_cp, relayed)

    # -- timers ------------------------------------------------------------

    def tick_timeouts(self, cycle: int) -> None:
        eng = self.engine
        cfg = eng.config
        for dst, pend in list(self.pending.items()):
            if cycle < pend.deadline:
                continue
            if cfg.retry_limit is not None and pend.retries >= cfg.retry_limit:
                del self.pending[dst]
                eng.timer_count -= 1
                pend.attempt.outcome = "failed-timeout"
                eng.stats.bump("failed_requests")
                eng.trace_event(cycle, f"pe:{fmt_addr(self.address)}", "failed_request",
                                self.address, dst)
                # A late REPLY may still be allocating; sweep whatever it built.
                if dst not in self.active_out:
                    self._guarded_sweep(dst, pend.attempt, cycle)
                continue
            pend.retries += 1
            pend.attempt.retransmissions += 1
            pend.deadline = cycle + cfg.timeout * (2 ** pend.retries)
            eng.stats.bump("request_retransmissions")
            eng.trace_event(cycle, f"pe:{fmt_addr(self.address)}", "retransmit_request",
                            self.address, dst)
            cmd = Command(CommandKind.REQUEST, self.address, dst, uid=eng.next_uid())
            eng.schedule_emission(cycle + 1, self.address, cmd)
        for dst, td in list(self.teardown.items()):
            if cycle < td.deadline:
                continue
            if cfg.retry_limit is not None and td.retries >= cfg.retry_limit:
                del self.teardown[dst]
                eng.timer_count -= 1
                eng.stats.bump("failed_teardowns")
                if td.attempt is not None and td.attempt.outcome == "established":
                    td.attempt.outcome = "failed-teardown"
                eng.trace_event(cycle, f"pe:{fmt_addr(self.address)}", "failed_teardown",
                                self.address, dst)
                continue
            td.retries += 1
            if td.attempt is not None:
                td.attempt.teardown_retransmissions += 1
            td.deadline = cycle + cfg.timeout * (2 ** td.retries)
            eng.stats.bump("destroy_retransmissions")
            eng.trace_event(cycle, f"pe:{fmt_addr(self.address)}", "retransmit_destroy",
                            self.address, dst)
            cmd = Command(CommandKind.DESTROY, self.address, dst, uid=eng.next_uid())
            td.expect_ack = cmd.uid
            eng.schedule_emission(cycle + 1, self.address, cmd)


# ---------------------------------------------------------------------------
# engine


class Engine:
    """One simulation instance; single-threaded and fully deterministic."""

    def __init__(self, topology: Topology, events, config: RunConfig = None):
        self.topology = topology
        self.config = (config or RunConfig()).resolve(topology)
        self._validate_events(events)
        self.events = sorted(events, key=lambda e: e.at)
        self._event_idx = 0

        self.pool = SegmentPool(topology)
        self._uid = 0
        self.crosspoints: dict = {}
        for cp_id in topology.crosspoint_ids():
            ctrl = Controller(topology, cp_id, self.pool, self.next_uid)
            self.crosspoints[cp_id] = Crosspoint(
                cp_id, topology.cp_rotation(cp_id), self.config.fifo_depth, ctrl
            )
        self._cp_list = list(self.crosspoints.values())
        self.pes: dict = {a: PeModel(a, self) for a in topology.pe_addresses()}
        self._pe_list = list(self.pes.values())

        self._scheduled: dict = {}  # cycle -> [(cp_id, Command)]
        self._data: dict = {}  # cycle -> [(conn, word)]
        self.reconfig_until: dict = {}
        self.timer_count = 0
        self.in_network = 0

        self.stats = Stats()
        self.stats.seed = self.config.seed
        self.trace_lines: list = []
        self.residences: list = []
        self.audit_report = AuditReport()
        if self.config.collect_link_busy:
            self.stats.link_busy = {lid: 0 for lid in topology.links}

    # -- helpers ---------------------------------------------------------

    def _validate_events(self, events) -> None:
        t = self.topology
        for ev in events:
            if ev.at < 0:
                raise ConfigError(f"event cycle must be non-negative: {ev}")
            for attr in ("src", "dst", "pe"):
                a = getattr(ev, attr, None)
                if a is not None and not t.valid_address(a):
                    raise InvalidAddress(f"address {a!r} in {ev} not in topology")
            if isinstance(ev, SendEvent) and not 0 <= ev.word < (1 << t.w):
                raise ConfigError(f"word {ev.word:#x} does not fit in {t.w} bits")
            if isinstance(ev, ReconfigureEvent) and ev.duration < 1:
                raise ConfigError(f"reconfiguration duration must be positive: {ev}")

    def next_uid(self) -> int:
        self._uid += 1
        return self._uid

    def trace(self, cycle: int, loc: str, event: str, cmd: Command, seg=None) -> None:
        if self.config.trace_enabled:
            s = "-" if seg is None else seg
            self.trace_lines.append(
                f"cycle={cycle} cp={loc} event={event} "
                f"src={fmt_addr(cmd.source)} dst={fmt_addr(cmd.destination)} seg={s}"
            )

    def trace_event(self, cycle: int, loc: str, event: str, src, dst, seg=None) -> None:
        if self.config.trace_enabled:
            s = "-" if seg is None else seg
            self.trace_lines.append(
                f"cycle={cycle} cp={loc} event={event} "
                f"src={fmt_addr(src)} dst={fmt_addr(dst)} seg={s}"
            )

    def cp_loc(self, cp_id) -> str:
        if self.topology.kind == "1d":
            return str(cp_id)
        return f"{cp_id[0]}:{cp_id[1]},{cp_id[2]}"

    def reconfiguring(self, cp_id, cycle: int) -> bool:
        return cycle < self.reconfig_until.get(cp_id, 0)

    def schedule_emission(self, cycle: int, pe_addr: Address, cmd: Command) -> None:
        """Queue a PE-originated command for injection at ``cycle``."""
        if self.topology.kind == "1d":
            orient = Orientation.ROW
        else:
            orient = routing2d.start_orientation(pe_addr, cmd.steering_target())
        cp_id = self.topology.pe_crosspoint(pe_addr, orient)
        self.schedule_to_cp(cycle, cp_id, cmd)

    def schedule_to_cp(self, cycle: int, cp_id, cmd: Command) -> None:
        self._scheduled.setdefault(cycle, []).append((cp_id, cmd))

    def enqueue_command(self, cp_id, port: Port, cmd: Command, cycle: int) -> None:
        if self.reconfiguring(cp_id, cycle):
            self.stats.bump("drops_reconfig")
            self.trace(cycle, self.cp_loc(cp_id), "drop_reconfig", cmd)
            return
        if self.crosspoints[cp_id].enqueue(port, cmd, cycle):
            self.in_network += 1
        else:
            self.stats.bump("drops_full")
            self.trace(cycle, self.cp_loc(cp_id), "drop_full", cmd)

    # -- route bookkeeping -------------------------------------------------

    def route_of(self, conn) -> tuple:
        """(crosspoints holding channel entries, relay PEs) for a connection."""
        src, dst = conn
        t = self.topology
        if t.kind == "1d":
            lo, hi = (src, dst) if src < dst else (dst, src)
            return [j for j in range(lo, hi + 1)], []
        plan = routing2d.plan_path(t, src, dst)
        cps = [(hop.orientation, hop.addr[0], hop.addr[1]) for hop in plan.hops]
        if plan.turn is not None:
            # The command is delivered to the turn PE by the crosspoint of the
            # orientation it arrived on, which also holds a channel entry.
            arrived = routing2d.start_orientation(src, dst)
            cps.append((arrived, plan.turn[0], plan.turn[1]))
        cps.append((plan.hops[-1].orientation, dst[0], dst[1]))
        relays = [plan.turn] if plan.turn is not None else []
        return cps, relays

    def circuit_intact(self, conn) -> bool:
        cps, relays = self.route_of(conn)
        for cp_id in cps:
            if self.crosspoints[cp_id].controller.table.get(*conn) is None:
                return False
        for pe_addr in relays:
            if conn not in self.pes[pe_addr].relay_stitches:
                return False
        return True

    # -- data path ----------------------------------------------------------

    def transfer_data(self, src: Address, dst: Address, word: int, cycle: int) -> None:
        """Inject one word on an active circuit; it arrives one cycle later."""
        conn = (src, dst)
        stream = self.stats.stream(conn)
        stream.sent += 1
        stream.sent_sum += word
        stream.sent_xor ^= word
        self.stats.bump("words_sent")
        pe = self.pes[src]
        if dst not in pe.active_out:
            stream.lost += 1
            self.stats.bump("words_lost")
            raise NotConnected(f"no active circuit {fmt_addr(src)} -> {fmt_addr(dst)}")
        if self.config.audit and not self.circuit_intact(conn):
            self.audit_report.violations.append(
                (cycle, "broken_circuit", f"{conn} active but entries missing")
            )
        self._data.setdefault(cycle + 1, []).append((conn, word))

    # -- scenario events -----------------------------------------------------

    def _apply_event(self, ev: ScenarioEvent, cycle: int) -> None:
        if isinstance(ev, RequestEvent):
            self._event_request(ev, cycle)
        elif isinstance(ev, SendEvent):
            self.trace_event(cycle, f"pe:{fmt_addr(ev.src)}", "send", ev.src, ev.dst)
            try:
                self.transfer_data(ev.src, ev.dst, ev.word, cycle)
            except NotConnected:
                self.trace_event(cycle, f"pe:{fmt_addr(ev.src)}", "send_fail", ev.src, ev.dst)
        elif isinstance(ev, DestroyEvent):
            self._event_destroy(ev, cycle)
        elif isinstance(ev, ReconfigureEvent):
            self._event_reconfigure(ev, cycle)
        else:
            self.pes[ev.pe].refuse = ev.refuse

    def _event_request(self, ev: RequestEvent, cycle: int) -> None:
        pe = self.pes[ev.src]
        attempt = AttemptRecord(ev.src, ev.dst, cycle)
        self.stats.attempts.append(attempt)
        if ev.src == ev.dst:
            # Rejected locally; a command never enters the network.
            attempt.outcome = "rejected-self"
            self.stats.bump("rejected_self")
            return
        old = pe.pending.get(ev.dst)
        if old is not None:
            old.attempt.outcome = "superseded"
            self.stats.bump("superseded")
        else:
            self.timer_count += 1
        pe.pending[ev.dst] = _Pending(attempt, cycle, cycle + self.config.timeout)
        cmd = Command(CommandKind.REQUEST, ev.src, ev.dst, uid=self.next_uid())
        self.schedule_emission(cycle, ev.src, cmd)

    def _event_destroy(self, ev: DestroyEvent, cycle: int) -> None:
        pe = self.pes[ev.src]
        conn = pe.active_out.pop(ev.dst, None)
        if conn is not None:
            attempt = conn.attempt
            attempt.destroyed_at = cycle
            if ev.dst not in pe.teardown:
                self.timer_count += 1
            cmd = Command(CommandKind.DESTROY, ev.src, ev.dst, uid=self.next_uid())
            pe.teardown[ev.dst] = _Teardown(
                attempt, cycle + self.config.timeout, expect_ack=cmd.uid
            )
            self.schedule_emission(cycle, ev.src, cmd)
            return
        pend = pe.pending.get(ev.dst)
        if pend is not None:
            # Mid-setup teardown: flag the attempt and sweep once it resolves.
            pend.abort_requested = True
            pend.attempt.destroyed_at = cycle
            self.trace_event(cycle, f"pe:{fmt_addr(ev.src)}", "abort_requested", ev.src, ev.dst)
            return
        self.stats.bump("destroy_ignored")
        self.trace_event(cycle, f"pe:{fmt_addr(ev.src)}", "destroy_ignored", ev.src, ev.dst)

    def _event_reconfigure(self, ev: ReconfigureEvent, cycle: int) -> None:
        if self.topology.kind == "1d":
            cps = [ev.pe]
        else:
            cps = [
                (Orientation.ROW, ev.pe[0], ev.pe[1]),
                (Orientation.COL, ev.pe[0], ev.pe[1]),
            ]
        until = cycle + ev.duration
        for cp_id in cps:
            self.reconfig_until[cp_id] = max(self.reconfig_until.get(cp_id, 0), until)
            lost = self.crosspoints[cp_id].purge()
            self.in_network -= lost
            self.stats.bump("purged", lost)
            self.trace_event(
                cycle, self.cp_loc(cp_id), "reconfigure", ev.pe, ev.pe, seg=ev.duration
            )

    # -- completion handling ---------------------------------------------------

    _COMPLETION_EVENT = {
        CommandKind.REQUEST: "request",
        CommandKind.REPLY: "reply",
        CommandKind.CANCEL: "cancel",
        CommandKind.DESTROY: "destroy",
        CommandKind.CONFIRM: "confirm",
    }

    def _run_completion(self, cp: Crosspoint, done, cycle: int) -> None:
        cmd = done.command
        self.in_network -= 1
        self.stats.bump("commands_processed")
        if self.config.collect_residence:
            self.residences.append((cmd.uid, cp.cp_id, done.enqueued_at, cycle))
        residence = cycle - done.enqueued_at
        if residence > self.stats.counters["max_residence"]:
            self.stats.counters["max_residence"] = residence

        table = cp.controller.table
        had_entry = table.get(cmd.source, cmd.destination) is not None
        actions = cp.controller.handle(cmd, done.in_port)

        if self.config.trace_enabled:
            event = self._COMPLETION_EVENT[cmd.kind]
            seg = None
            if cmd.kind is CommandKind.REPLY:
                entry = table.get(cmd.source, cmd.destination)
                if entry is None:
                    event = "reply_fail"
                else:
                    seg = entry.out_segment
                    if had_entry:
                        event = "reply_reuse"
            elif cmd.kind is CommandKind.DESTROY and not had_entry:
                event = "destroy_noop"
            self.trace(cycle, self.cp_loc(cp.cp_id), event, cmd, seg)

        from_orient = self.topology.cp_orientation(cp.cp_id)
        for action in actions:
            if isinstance(action, Forward):
                neighbor = self.topology.neighbor_cp(cp.cp_id, action.port)
                facing = self.topology.opposite_port(action.port)
                self.enqueue_command(neighbor, facing, action.command, cycle)
            else:
                out = action.command
                self.trace(
                    cycle,
                    f"pe:{fmt_addr(self.topology.cp_address(cp.cp_id))}",
                    f"deliver_{out.kind}",
                    out,
                )
                pe = self.pes[self.topology.cp_address(cp.cp_id)]
                pe.inbox.append((out, from_orient))

    # -- audit -------------------------------------------------------------------

    def _audit_cycle(self, cycle: int) -> None:
        # Out-side references are authoritative: the crosspoint that allocated
        # a slot owns it until its DESTROY removes the entry, so at every
        # cycle each bound slot must have exactly one owner entry agreeing
        # with the pool. In-side references are deliberately not compared:
        # they can dangle briefly when a teardown overtakes a setup, which
        # the defensive re-sweep then cleans up.
        owners: dict = {}
        for cp in self._cp_list:
            for e in cp.controller.table.entries():
                link = self.topology.port_link(cp.cp_id, e.out_port)
                if link is None or e.out_segment is None:
                    continue
                key = (link, e.out_segment)
                if key in owners and owners[key] != e.conn:
                    self.audit_report.violations.append(
                        (cycle, "segment_exclusivity",
                         f"{key} claimed by {owners[key]} and {e.conn}")
                    )
                owners[key] = e.conn
                bound = self.pool.binding(link, e.out_segment)
                if bound != e.conn:
                    self.audit_report.violations.append(
                        (cycle, "binding_desync",
                         f"{key} entry {e.conn} but pool holds {bound}")
                    )

    def _final_leak_check(self) -> None:
        active = set()
        for pe in self._pe_list:
            for dst in pe.active_out:
                active.add((pe.address, dst))
        for lid, seg, conn in self.pool.bound_slots():
            if conn not in active:
                self.audit_report.leaked.append((lid, seg, conn))
        for pe in self._pe_list:
            for conn in sorted(pe.relay_stitches, key=str):
                if conn not in active:
                    self.audit_report.leaked.append(("relay", pe.address, conn))

    # -- main loop ------------------------------------------------------------------

    def is_quiescent(self) -> bool:
        return (
            self._event_idx >= len(self.events)
            and not self._scheduled
            and not self._data
            and self.in_network == 0
            and self.timer_count == 0
        )

    def run(self) -> RunResult:
        cfg = self.config
        cycle = 0
        quiescent = False
        while cycle <= cfg.max_cycles:
            # Phase A: arrivals and injections for this cycle.
            for conn, word in self._data.pop(cycle, ()):
                stream = self.stats.stream(conn)
                stream.delivered += 1
                stream.delivered_sum += word
                stream.delivered_xor ^= word
                self.stats.bump("words_delivered")
                self.trace_event(cycle, f"pe:{fmt_addr(conn[1])}", "data", conn[0], conn[1])
            while self._event_idx < len(self.events) and self.events[self._event_idx].at == cycle:
                self._apply_event(self.events[self._event_idx], cycle)
                self._event_idx += 1
            for cp_id, cmd in self._scheduled.pop(cycle, ()):  # PE emissions and relays
                self.enqueue_command(cp_id, Port.PE, cmd, cycle)

            # Phase B: every stage-two tick; completions write outputs now.
            for cp in self._cp_list:
                if cp.occupancy == 0 or self.reconfiguring(cp.cp_id, cycle):
                    continue
                done = cp.tick_stage2()
                if done is not None:
                    self._run_completion(cp, done, cycle)

            # Phase C: move the rest of the pipeline.
            for cp in self._cp_list:
                if cp.occupancy == 0 or self.reconfiguring(cp.cp_id, cycle):
                    continue
                cp.tick_stage1()
                cp.fill_stage2()
                cp.fill_stage1()

            # Phase D: PE reactions, then retransmission timers.
            for pe in self._pe_list:
                if pe.inbox:
                    inbox, pe.inbox = pe.inbox, []
                    for cmd, from_orient in inbox:
                        pe.on_delivery(cmd, from_orient, cycle)
                if pe.has_timers:
                    pe.tick_timeouts(cycle)

            # Phase E: bookkeeping.
            if cfg.collect_link_busy:
                busy = self.stats.link_busy
                for lid, count in self.pool._busy.items():
                    if count:
                        busy[lid] += count
            if cfg.audit:
                self._audit_cycle(cycle)
            if self.is_quiescent():
                quiescent = True
                break
            cycle += 1

        self.stats.cycles_run = min(cycle, cfg.max_cycles)
        self.stats.quiescent_at = cycle if quiescent else None
        self._final_leak_check()
        return RunResult(
            stats=self.stats,
            trace=self.trace_lines,
            residences=self.residences,
            audit=self.audit_report,
            quiescent=quiescent,
        )


def run(topology: Topology, events, config: RunConfig = None) -> RunResult:
    """Build an engine, run it to quiescence or the cycle cap, return results."""
    return Engine(topology, events, config).run()
