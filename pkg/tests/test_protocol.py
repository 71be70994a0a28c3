import itertools

import pytest
from hypothesis import given, strategies as st

from rmboc.errors import NoFreeSegment
from rmboc.protocol import (
    Command,
    CommandKind,
    Controller,
    Deliver,
    Forward,
    allocate_segment,
    decide_direction_1d,
)
from rmboc.topology import Port, SegmentPool, build_1d


def make_fabric(n=4, k=4):
    """Controllers wired to one shared pool, as the engine does it."""
    t = build_1d(n, k, 16)
    pool = SegmentPool(t)
    counter = itertools.count(1000)
    ctrls = {j: Controller(t, j, pool, lambda: next(counter)) for j in t.crosspoint_ids()}
    return t, pool, ctrls


class TestDirection1d:
    def test_toward_higher_index(self):
        assert decide_direction_1d(2, 4) is Port.RIGHT

    def test_self_is_pe(self):
        assert decide_direction_1d(3, 3) is Port.PE

    def test_toward_lower_index(self):
        assert decide_direction_1d(2, 1) is Port.LEFT


class TestAllocateSegment:
    def test_prefers_highest_bus(self):
        assert allocate_segment({0, 1, 2, 3}) == 0

    def test_single_candidate(self):
        assert allocate_segment({3}) == 3

    def test_exhausted(self):
        with pytest.raises(NoFreeSegment):
            allocate_segment(set())

    @given(st.sets(st.integers(min_value=0, max_value=63), min_size=1))
    def test_always_the_minimum(self, free):
        assert allocate_segment(free) == min(free)


class TestRequest:
    def test_forwarded_without_any_state_change(self):
        _, pool, ctrls = make_fabric()
        cmd = Command(CommandKind.REQUEST, 1, 4)
        before = ctrls[2].table.snapshot()
        actions = ctrls[2].handle_request(cmd, Port.LEFT)
        assert actions == [Forward(Port.RIGHT, cmd)]
        assert ctrls[2].table.snapshot() == before
        assert pool.total_bound() == 0

    def test_delivered_at_destination(self):
        _, _, ctrls = make_fabric()
        cmd = Command(CommandKind.REQUEST, 1, 3)
        assert ctrls[3].handle_request(cmd, Port.LEFT) == [Deliver(cmd)]

    def test_forwarded_left(self):
        _, _, ctrls = make_fabric()
        cmd = Command(CommandKind.REQUEST, 4, 1)
        assert ctrls[2].handle_request(cmd, Port.RIGHT) == [Forward(Port.LEFT, cmd)]

    @given(
        src=st.integers(min_value=1, max_value=4),
        dst=st.integers(min_value=1, max_value=4),
        at=st.integers(min_value=1, max_value=4),
    )
    def test_purity_everywhere(self, src, dst, at):
        if src == dst:
            return
        _, pool, ctrls = make_fabric()
        # a few live circuits make the purity claim non-vacuous
        walk_reply(ctrls, 1, 4)
        walk_reply(ctrls, 3, 2)
        before = {j: c.table.snapshot() for j, c in ctrls.items()}
        bound = pool.total_bound()
        port = Port.LEFT if src < at else (Port.RIGHT if src > at else Port.PE)
        ctrls[at].handle_request(Command(CommandKind.REQUEST, src, dst), port)
        assert {j: c.table.snapshot() for j, c in ctrls.items()} == before
        assert pool.total_bound() == bound


def walk_reply(ctrls, src, dst, uid=1):
    """Drive a REPLY from the destination crosspoint back to the source."""
    cmd = Command(CommandKind.REPLY, src, dst, uid=uid)
    at, port = dst, Port.PE
    actions = ctrls[at].handle_reply(cmd, port)
    while actions and isinstance(actions[0], Forward):
        fwd = actions[0]
        step = -1 if fwd.port is Port.LEFT else 1
        at, port = at + step, (Port.RIGHT if fwd.port is Port.LEFT else Port.LEFT)
        actions = ctrls[at].handle_reply(fwd.command, port)
    return actions


class TestReply:
    def test_allocates_at_destination_crosspoint(self):
        _, pool, ctrls = make_fabric()
        cmd = Command(CommandKind.REPLY, 1, 4)
        actions = ctrls[4].handle_reply(cmd, Port.PE)
        assert actions == [
            Forward(Port.LEFT, Command(CommandKind.REPLY, 1, 4, downstream_segment=0))
        ]
        entry = ctrls[4].table.get(1, 4)
        assert (entry.in_port, entry.in_segment) == (Port.PE, None)
        assert (entry.out_port, entry.out_segment) == (Port.LEFT, 0)
        assert pool.binding(("h", 3), 0) == (1, 4)

    def test_takes_lowest_free_index_midpath(self):
        _, pool, ctrls = make_fabric()
        pool.bind(("h", 2), 0, (9, 8))
        pool.bind(("h", 2), 1, (8, 9))
        cmd = Command(CommandKind.REPLY, 1, 4, downstream_segment=0)
        actions = ctrls[3].handle_reply(cmd, Port.RIGHT)
        assert actions == [
            Forward(Port.LEFT, Command(CommandKind.REPLY, 1, 4, downstream_segment=2))
        ]
        entry = ctrls[3].table.get(1, 4)
        assert (entry.in_port, entry.in_segment) == (Port.RIGHT, 0)
        assert (entry.out_port, entry.out_segment) == (Port.LEFT, 2)

    def test_exhaustion_tears_down_both_ways(self):
        _, pool, ctrls = make_fabric(k=1)
        pool.bind(("h", 2), 0, (9, 8))
        cmd = Command(CommandKind.REPLY, 1, 4, downstream_segment=0)
        actions = ctrls[3].handle_reply(cmd, Port.RIGHT)
        kinds = [(type(a), a.command.kind) for a in actions]
        assert (Forward, CommandKind.DESTROY) in kinds
        assert (Forward, CommandKind.CANCEL) in kinds
        destroy = next(a for a in actions if a.command.kind is CommandKind.DESTROY)
        cancel = next(a for a in actions if a.command.kind is CommandKind.CANCEL)
        assert destroy.port is Port.RIGHT  # back toward the destination
        assert cancel.port is Port.LEFT  # on toward the source
        assert cancel.command.reason == "no_segment"
        assert ctrls[3].table.get(1, 4) is None

    def test_duplicate_reuses_entry_without_second_allocation(self):
        _, pool, ctrls = make_fabric()
        first = ctrls[4].handle_reply(Command(CommandKind.REPLY, 1, 4), Port.PE)
        bound = pool.total_bound()
        second = ctrls[4].handle_reply(Command(CommandKind.REPLY, 1, 4, uid=7), Port.PE)
        assert pool.total_bound() == bound
        assert len(ctrls[4].table) == 1
        assert second[0].command.downstream_segment == first[0].command.downstream_segment

    def test_full_walk_reaches_source_and_activates(self):
        _, pool, ctrls = make_fabric()
        actions = walk_reply(ctrls, 1, 4)
        assert isinstance(actions[0], Deliver)
        assert ctrls[1].table.get(1, 4).state == "active"
        assert ctrls[2].table.get(1, 4).state == "allocated"
        # one segment per traversed link
        assert pool.total_bound() == 3

    def test_opposite_directions_use_separate_segments(self):
        _, pool, ctrls = make_fabric(k=2)
        walk_reply(ctrls, 1, 4)
        walk_reply(ctrls, 4, 1)
        assert pool.binding(("h", 2), 0) == (1, 4)
        assert pool.binding(("h", 2), 1) == (4, 1)


class TestCancelConfirm:
    def test_cancel_passes_through_untouched(self):
        _, pool, ctrls = make_fabric()
        walk_reply(ctrls, 1, 4)
        before = ctrls[2].table.snapshot()
        cmd = Command(CommandKind.CANCEL, 1, 4)
        assert ctrls[2].handle_cancel(cmd, Port.RIGHT) == [Forward(Port.LEFT, cmd)]
        assert ctrls[2].table.snapshot() == before

    def test_cancel_delivered_at_source(self):
        _, _, ctrls = make_fabric()
        cmd = Command(CommandKind.CANCEL, 1, 4)
        assert ctrls[1].handle_cancel(cmd, Port.RIGHT) == [Deliver(cmd)]

    def test_cancel_toward_source_on_the_right(self):
        _, _, ctrls = make_fabric()
        cmd = Command(CommandKind.CANCEL, 4, 1)
        assert ctrls[2].handle_cancel(cmd, Port.LEFT) == [Forward(Port.RIGHT, cmd)]

    def test_confirm_passes_through_and_delivers_at_source(self):
        _, _, ctrls = make_fabric()
        cmd = Command(CommandKind.CONFIRM, 1, 4)
        assert ctrls[3].handle_confirm(cmd, Port.RIGHT) == [Forward(Port.LEFT, cmd)]
        assert ctrls[1].handle_confirm(cmd, Port.RIGHT) == [Deliver(cmd)]


class TestDestroy:
    def test_sweep_frees_every_segment_once(self):
        _, pool, ctrls = make_fabric()
        walk_reply(ctrls, 1, 4)
        cmd = Command(CommandKind.DESTROY, 1, 4)
        at, port = 1, Port.PE
        while True:
            actions = ctrls[at].handle(cmd, port)
            assert ctrls[at].table.get(1, 4) is None
            if isinstance(actions[0], Deliver):
                break
            at, port = at + 1, Port.LEFT
        assert at == 4
        assert pool.total_bound() == 0

    def test_owner_releases_its_own_slot(self):
        _, pool, ctrls = make_fabric()
        walk_reply(ctrls, 1, 4)
        # cp2 allocated the slot on the link toward the source (left side)
        ctrls[2].handle_destroy(Command(CommandKind.DESTROY, 1, 4), Port.LEFT)
        assert pool.binding(("h", 1), 0) is None
        # the link cp3 owns is untouched until the sweep reaches cp3
        assert pool.binding(("h", 2), 0) == (1, 4)

    def test_missing_entry_forwards_unchanged(self):
        _, pool, ctrls = make_fabric()
        cmd = Command(CommandKind.DESTROY, 1, 4)
        assert ctrls[2].handle_destroy(cmd, Port.LEFT) == [Forward(Port.RIGHT, cmd)]
        assert pool.total_bound() == 0

    def test_idempotent_under_retransmission(self):
        _, pool, ctrls = make_fabric()
        walk_reply(ctrls, 1, 4)
        cmd = Command(CommandKind.DESTROY, 1, 4)
        ctrls[2].handle_destroy(cmd, Port.LEFT)
        again = ctrls[2].handle_destroy(cmd, Port.LEFT)
        assert again == [Forward(Port.RIGHT, cmd)]
        assert pool.binding(("h", 1), 0) is None
