"""Plain-text scenario files.

Grammar, one event per line, `#` starts a comment, blank lines ignored.
The first significant line must be the version header `rmboc-scenario v1`.

    at <cycle> request <src> <dst>
    at <cycle> send <src> <dst> <hex-word>
    at <cycle> destroy <src> <dst>
    at <cycle> reconfigure <pe> <duration>
    at <cycle> refuse <pe>
    at <cycle> accept <pe>

Addresses are `j` (1-based) on a line and `r,c` (0-based) on a mesh.
Events are returned sorted by cycle, stable within a cycle by file order.
"""

from __future__ import annotations

from .engine import (
    DestroyEvent,
    ReconfigureEvent,
    RefuseEvent,
    RequestEvent,
    ScenarioEvent,
    SendEvent,
)
from .errors import AddressError, ParseError
from .topology import Topology

HEADER = "rmboc-scenario v1"


def _parse_address(token: str, t: Topology, line_no: int):
    try:
        if t.kind == "1d":
            addr = int(token)
        else:
            r, c = token.split(",")
            addr = (int(r), int(c))
    except ValueError:
        raise ParseError(line_no, f"malformed address {token!r}") from None
    if not t.valid_address(addr):
        raise AddressError(line_no, f"address {token!r} outside the topology")
    return addr


def _parse_int(token: str, what: str, line_no: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise ParseError(line_no, f"malformed {what} {token!r}") from None
    if value < 0:
        raise ParseError(line_no, f"{what} must be non-negative, got {value}")
    return value


def parse_scenario(text: str, t: Topology) -> list[ScenarioEvent]:
    events = []
    header_seen = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not header_seen:
            if line != HEADER:
                raise ParseError(line_no, f"expected header {HEADER!r}, got {line!r}")
            header_seen = True
            continue
        tokens = line.split()
        if len(tokens) < 3 or tokens[0] != "at":
            raise ParseError(line_no, f"expected 'at <cycle> <event> ...', got {line!r}")
        cycle = _parse_int(tokens[1], "cycle", line_no)
        verb = tokens[2]
        args = tokens[3:]
        if verb == "request" and len(args) == 2:
            src = _parse_address(args[0], t, line_no)
            dst = _parse_address(args[1], t, line_no)
            events.append(RequestEvent(cycle, src, dst))
        elif verb == "send" and len(args) == 3:
            src = _parse_address(args[0], t, line_no)
            dst = _parse_address(args[1], t, line_no)
            try:
                word = int(args[2], 16)
            except ValueError:
                raise ParseError(line_no, f"malformed hex word {args[2]!r}") from None
            if not 0 <= word < (1 << t.w):
                raise ParseError(line_no, f"word {args[2]!r} does not fit in {t.w} bits")
            events.append(SendEvent(cycle, src, dst, word))
        elif verb == "destroy" and len(args) == 2:
            src = _parse_address(args[0], t, line_no)
            dst = _parse_address(args[1], t, line_no)
            events.append(DestroyEvent(cycle, src, dst))
        elif verb == "reconfigure" and len(args) == 2:
            pe = _parse_address(args[0], t, line_no)
            duration = _parse_int(args[1], "duration", line_no)
            if duration < 1:
                raise ParseError(line_no, "duration must be positive")
            events.append(ReconfigureEvent(cycle, pe, duration))
        elif verb == "refuse" and len(args) == 1:
            events.append(RefuseEvent(cycle, _parse_address(args[0], t, line_no), True))
        elif verb == "accept" and len(args) == 1:
            events.append(RefuseEvent(cycle, _parse_address(args[0], t, line_no), False))
        else:
            raise ParseError(line_no, f"unknown event {line!r}")
    if not header_seen:
        raise ParseError(1, f"missing header {HEADER!r}")
    return sorted(events, key=lambda e: e.at)


def _fmt_addr(a) -> str:
    return str(a) if isinstance(a, int) else f"{a[0]},{a[1]}"


def format_scenario(events) -> str:
    """Render events back to scenario text; parse(format(x)) == sorted(x)."""
    lines = [HEADER]
    for ev in events:
        if isinstance(ev, RequestEvent):
            lines.append(f"at {ev.at} request {_fmt_addr(ev.src)} {_fmt_addr(ev.dst)}")
        elif isinstance(ev, SendEvent):
            lines.append(f"at {ev.at} send {_fmt_addr(ev.src)} {_fmt_addr(ev.dst)} {ev.word:x}")
        elif isinstance(ev, DestroyEvent):
            lines.append(f"at {ev.at} destroy {_fmt_addr(ev.src)} {_fmt_addr(ev.dst)}")
        elif isinstance(ev, ReconfigureEvent):
            lines.append(f"at {ev.at} reconfigure {_fmt_addr(ev.pe)} {ev.duration}")
        elif isinstance(ev, RefuseEvent):
            verb = "refuse" if ev.refuse else "accept"
            lines.append(f"at {ev.at} {verb} {_fmt_addr(ev.pe)}")
        else:
            raise TypeError(f"unknown event type {ev!r}")
    return "\n".join(lines) + "\n"
