import pytest

from rmboc import analysis
from rmboc.errors import InvalidParameter


class TestDirectionMaxima:
    def test_reference_position(self):
        p = analysis.direction_maxima(4, 2)
        assert (p.right, p.left, p.pe) == (4, 3, 3)
        assert p.total == 10

    def test_two_pe_line_by_enumeration(self):
        # independent count: ordered pairs of a 2-PE line are (1,2) and (2,1);
        # at position 1 the first enters from the PE, the second from the right
        p = analysis.direction_maxima(2, 1)
        assert (p.right, p.left, p.pe) == (1, 0, 1)

    def test_right_boundary(self):
        p = analysis.direction_maxima(4, 4)
        assert (p.right, p.left, p.pe) == (0, 3, 3)

    @pytest.mark.parametrize("n,j", [(1, 1), (4, 0), (4, 5)])
    def test_invalid(self, n, j):
        with pytest.raises(InvalidParameter):
            analysis.direction_maxima(n, j)


class TestMaxTotalComm:
    def test_reference_values(self):
        assert analysis.max_total_comm(4) == 10
        assert analysis.max_total_comm(16) == 142

    def test_small_values_against_direction_totals(self):
        # n=3: position 2 carries 2 from the right, 2 from the left, 2 from its PE
        assert analysis.max_total_comm(3) == 6
        assert analysis.max_total_comm(2) == 2

    def test_strictly_monotonic(self):
        values = [analysis.max_total_comm(n) for n in range(2, 65)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_invalid(self):
        with pytest.raises(InvalidParameter):
            analysis.max_total_comm(1)


class TestWorstCaseLatency:
    def test_reference_values(self):
        assert analysis.worst_case_latency(4) == 40
        assert analysis.worst_case_latency(3) == 24
        # minimal line: the ceiling collapses to the idle 8-cycle latency
        assert analysis.worst_case_latency(2) == 8


class TestOracle:
    def test_matches_closed_form_up_to_64(self):
        for n in range(2, 65):
            assert analysis.oracle_max_total_comm(n) == analysis.max_total_comm(n), n

    def test_two_pe_line(self):
        assert analysis.oracle_max_total_comm(2) == 2

    def test_spot_value_16(self):
        assert analysis.oracle_max_total_comm(16) == 142

    def test_maximizer_sits_around_the_middle(self):
        for n in range(2, 65):
            allowed = {n // 2, (n + 1) // 2, (n + 1) // 2 + 1}
            assert set(analysis.oracle_argmax(n)) <= allowed, n

    def test_oracle_limit(self):
        with pytest.raises(InvalidParameter):
            analysis.oracle_max_total_comm(analysis.ORACLE_LIMIT + 1)


class TestCheckBound:
    def test_clean_records_pass(self):
        records = [(1, 1, 0, 8), (1, 2, 8, 16), (2, 1, 0, 12)]
        report = analysis.check_bound(records, 4, fifo_depth=10)
        assert report.ok
        assert report.observed_max == 12
        assert report.bound == 40

    def test_violation_detected(self):
        records = [(1, 2, 0, 60)]
        report = analysis.check_bound(records, 4, fifo_depth=10)
        assert not report.ok
        assert report.violations == [(1, 2, 60)]

    def test_multiple_slow_visits_flagged(self):
        records = [(5, 1, 0, 20), (5, 2, 20, 40), (6, 3, 0, 8)]
        report = analysis.check_bound(records, 4, fifo_depth=10)
        assert report.multi_episode_uids == [5]
        assert not report.ok

    def test_shallow_fifos_fail_preconditions(self):
        report = analysis.check_bound([], 4, fifo_depth=1)
        assert not report.preconditions_ok
        report = analysis.check_bound([], 4, fifo_depth=10, drops=3)
        assert not report.preconditions_ok


class TestMeshDemand:
    def test_two_by_two_by_hand(self):
        # the busiest link of a 2x2 mesh is the top row link: both its own
        # endpoints' pairs plus every diagonal route crossing row 0
        demand = analysis.segment_demand_2d(2)
        assert demand.max_link_load == 6
        assert demand.pair_count == 12
        assert demand.per_link[("h", 0, 0)] == 6
        assert demand.per_link[("h", 1, 0)] == 2

    def test_quadratic_growth_band(self):
        loads = {side: analysis.segment_demand_2d(side).max_link_load for side in (2, 3, 4)}
        assert loads[2] < loads[3] < loads[4]
        for side, load in loads.items():
            assert side * side <= load <= 2 * side * side * side
