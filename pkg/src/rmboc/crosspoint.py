"""Cycle-accurate crosspoint microarchitecture.

One crosspoint is three bounded side FIFOs, a round-robin selector, an
internal main FIFO and a two-stage controller pipeline. Stage one (selector
read plus main-FIFO write) and stage two (controller read, decision, output
write) each hold a command for exactly four cycles, so an isolated command
is processed in eight cycles and a saturated crosspoint completes one
command every four.

The engine drives the stages in a fixed global phase order per cycle:

  1. all stage-two ticks (completions run the controller and write outputs
     into neighbor side FIFOs in the same cycle),
  2. all stage-one ticks (finished commands drop into the main FIFO),
  3. stage-two fill from the main FIFO,
  4. stage-one fill through the selector.

Outputs written in step 1 are therefore visible to a neighbor's selector in
the same cycle, which is what makes the per-hop latency exactly eight
cycles in both directions.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

from .protocol import Command, Controller
from .topology import Port

STAGE_CYCLES = 4
IDLE_LATENCY = 2 * STAGE_CYCLES


class SideFifo:
    """Bounded command buffer for one direction.

    Writing to a full queue is not an error: the command is dropped and
    counted, and recovery is the source's retransmission timer.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("FIFO depth must be at least 1")
        self.capacity = capacity
        self.drops = 0
        self._q: deque = deque()

    def offer(self, cmd: Command, cycle: int) -> bool:
        if len(self._q) >= self.capacity:
            self.drops += 1
            return False
        self._q.append((cmd, cycle))
        return True

    def pop(self) -> tuple:
        return self._q.popleft()

    def clear(self) -> int:
        n = len(self._q)
        self._q.clear()
        return n

    def __len__(self) -> int:
        return len(self._q)


class Selector:
    """Round-robin pick over the side FIFOs in a fixed rotation order.

    The rotation starts over from the slot after the last served direction
    and only advances when a pick happens.
    """

    def __init__(self, rotation: tuple):
        self.rotation = rotation
        self.last_served = rotation[-1]

    def pick(self, occupied) -> Optional[Port]:
        start = self.rotation.index(self.last_served) + 1
        for i in range(len(self.rotation)):
            port = self.rotation[(start + i) % len(self.rotation)]
            if port in occupied:
                self.last_served = port
                return port
        return None


@dataclass
class _StageSlot:
    command: Command
    in_port: Port
    enqueued_at: int
    remaining: int


@dataclass
class Completion:
    """Stage-two result: the command, where it came from, and its residence."""

    command: Command
    in_port: Port
    enqueued_at: int


class Crosspoint:
    """FIFOs, selector and pipeline state of one network position."""

    def __init__(self, cp_id, rotation: tuple, fifo_depth: int, controller: Controller = None):
        self.cp_id = cp_id
        self.rotation = rotation
        self.controller = controller
        self.fifos = {port: SideFifo(fifo_depth) for port in rotation}
        self.selector = Selector(rotation)
        self.main: deque = deque()
        self.stage1: Optional[_StageSlot] = None
        self.stage2: Optional[_StageSlot] = None
        # Commands currently buffered or in flight inside this crosspoint.
        self.occupancy = 0
        self.completions = 0

    # -- input ----------------------------------------------------------

    def enqueue(self, port: Port, cmd: Command, cycle: int) -> bool:
        accepted = self.fifos[port].offer(cmd, cycle)
        if accepted:
            self.occupancy += 1
        return accepted

    @property
    def drops(self) -> int:
        return sum(f.drops for f in self.fifos.values())

    # -- pipeline phases --------------------------------------------------

    def tick_stage2(self) -> Optional[Completion]:
        slot = self.stage2
        if slot is None:
            return None
        slot.remaining -= 1
        if slot.remaining > 0:
            return None
        self.stage2 = None
        self.occupancy -= 1
        self.completions += 1
        return Completion(slot.command, slot.in_port, slot.enqueued_at)

    def tick_stage1(self) -> None:
        slot = self.stage1
        if slot is None:
            return
        slot.remaining -= 1
        if slot.remaining == 0:
            self.main.append(slot)
            self.stage1 = None

    def fill_stage2(self) -> None:
        if self.stage2 is None and self.main:
            slot = self.main.popleft()
            slot.remaining = STAGE_CYCLES
            self.stage2 = slot

    def fill_stage1(self) -> None:
        if self.stage1 is not None:
            return
        occupied = [p for p in self.rotation if len(self.fifos[p])]
        port = self.selector.pick(occupied)
        if port is None:
            return
        cmd, enq = self.fifos[port].pop()
        self.stage1 = _StageSlot(cmd, port, enq, STAGE_CYCLES)

    def step_cycle(self, handle: Callable = None):
        """Advance every phase of one cycle for this crosspoint alone.

        Convenience for single-crosspoint use; the engine sequences the
        phases globally instead. Returns (completion, actions) where both
        are None/[] when stage two did not finish this cycle.
        """
        done = self.tick_stage2()
        actions = []
        if done is not None:
            if handle is not None:
                actions = handle(done.command, done.in_port)
            elif self.controller is not None:
                actions = self.controller.handle(done.command, done.in_port)
        self.tick_stage1()
        self.fill_stage2()
        self.fill_stage1()
        return done, actions

    # -- fault model -------------------------------------------------------

    def purge(self) -> int:
        """Drop every buffered and in-flight command (reconfiguration loss)."""
        lost = 0
        for f in self.fifos.values():
            lost += f.clear()
        lost += len(self.main)
        self.main.clear()
        if self.stage1 is not None:
            self.stage1 = None
            lost += 1
        if self.stage2 is not None:
            self.stage2 = None
            lost += 1
        self.occupancy = 0
        return lost
