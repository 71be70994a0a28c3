import pytest

from rmboc.cli import main
from rmboc.engine import (
    DestroyEvent,
    ReconfigureEvent,
    RefuseEvent,
    RequestEvent,
    SendEvent,
)
from rmboc.errors import AddressError, ParseError
from rmboc.scenario import format_scenario, parse_scenario
from rmboc.topology import build_1d, build_2d

LINE4 = build_1d(4, 4, 16)


class TestParse:
    def test_request_line(self):
        events = parse_scenario("rmboc-scenario v1\nat 0 request 1 4\n", LINE4)
        assert events == [RequestEvent(0, 1, 4)]

    def test_send_line_hex(self):
        events = parse_scenario("rmboc-scenario v1\nat 5 send 1 4 beef\n", LINE4)
        assert events == [SendEvent(5, 1, 4, 0xBEEF)]

    def test_out_of_range_address(self):
        with pytest.raises(AddressError) as exc:
            parse_scenario("rmboc-scenario v1\nat 0 request 9 1\n", LINE4)
        assert exc.value.line_no == 2

    def test_missing_header(self):
        with pytest.raises(ParseError):
            parse_scenario("at 0 request 1 4\n", LINE4)

    def test_comments_and_blanks_skipped(self):
        text = "# setup\n\nrmboc-scenario v1\nat 0 request 1 2  # go\n"
        assert parse_scenario(text, LINE4) == [RequestEvent(0, 1, 2)]

    def test_word_must_fit_data_width(self):
        t = build_1d(2, 1, 8)
        with pytest.raises(ParseError):
            parse_scenario("rmboc-scenario v1\nat 0 send 1 2 1ff\n", t)

    def test_mesh_addresses(self):
        t = build_2d(3, 2, 16)
        events = parse_scenario(
            "rmboc-scenario v1\nat 0 request 2,0 0,2\nat 9 reconfigure 1,1 20\n", t
        )
        assert events == [RequestEvent(0, (2, 0), (0, 2)), ReconfigureEvent(9, (1, 1), 20)]

    def test_sorted_by_cycle_stable_within(self):
        text = (
            "rmboc-scenario v1\n"
            "at 7 request 2 3\n"
            "at 0 request 1 2\n"
            "at 7 destroy 1 2\n"
        )
        events = parse_scenario(text, LINE4)
        assert events == [
            RequestEvent(0, 1, 2),
            RequestEvent(7, 2, 3),
            DestroyEvent(7, 1, 2),
        ]

    def test_unknown_verb(self):
        with pytest.raises(ParseError):
            parse_scenario("rmboc-scenario v1\nat 0 explode 1 2\n", LINE4)

    def test_round_trip(self):
        events = [
            RequestEvent(0, 1, 4),
            SendEvent(5, 1, 4, 0xBEEF),
            DestroyEvent(9, 1, 4),
            ReconfigureEvent(12, 2, 30),
            RefuseEvent(14, 3, True),
            RefuseEvent(20, 3, False),
        ]
        assert parse_scenario(format_scenario(events), LINE4) == events


def write_scenario(tmp_path, text):
    path = tmp_path / "s.txt"
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestCliRun:
    def test_run_writes_reports(self, tmp_path, capsys):
        scenario = write_scenario(
            tmp_path,
            "rmboc-scenario v1\nat 0 request 1 4\nat 100 send 1 4 beef\n",
        )
        rc = main([
            "run", "--topo", "1d", "--n", "4", "--k", "4", "--w", "16",
            "--scenario", scenario, "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        trace = (tmp_path / "trace.txt").read_text()
        assert "event=established" in trace
        stats = (tmp_path / "stats.csv").read_text()
        assert "1,4,0,established,66,66" in stats
        assert "quiescent" in capsys.readouterr().out

    def test_run_twice_is_byte_identical(self, tmp_path):
        scenario = write_scenario(
            tmp_path, "rmboc-scenario v1\nat 0 request 1 4\nat 3 request 4 2\n"
        )
        args = [
            "run", "--topo", "1d", "--n", "4", "--k", "4",
            "--scenario", scenario, "--out-dir", str(tmp_path), "--audit",
        ]
        assert main(args + ["--trace", "a.txt", "--stats", "a.csv"]) == 0
        assert main(args + ["--trace", "b.txt", "--stats", "b.csv"]) == 0
        assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_invalid_topology_is_config_error(self, tmp_path, capsys):
        scenario = write_scenario(tmp_path, "rmboc-scenario v1\n")
        rc = main([
            "run", "--topo", "1d", "--n", "1", "--k", "4",
            "--scenario", scenario, "--out-dir", str(tmp_path),
        ])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_parse_error_exit_code(self, tmp_path, capsys):
        scenario = write_scenario(tmp_path, "rmboc-scenario v1\nat 0 request 9 1\n")
        rc = main([
            "run", "--topo", "1d", "--n", "4", "--k", "4",
            "--scenario", scenario, "--out-dir", str(tmp_path),
        ])
        assert rc == 1

    def test_out_dir_from_environment(self, tmp_path, monkeypatch):
        scenario = write_scenario(tmp_path, "rmboc-scenario v1\nat 0 request 1 2\n")
        out = tmp_path / "outdir"
        monkeypatch.setenv("RMBOC_OUT_DIR", str(out))
        rc = main(["run", "--topo", "1d", "--n", "4", "--k", "2",
                   "--scenario", scenario])
        assert rc == 0
        assert (out / "trace.txt").exists()

    def test_figures_rendered(self, tmp_path):
        scenario = write_scenario(tmp_path, "rmboc-scenario v1\nat 0 request 1 4\n")
        rc = main([
            "run", "--topo", "1d", "--n", "4", "--k", "4",
            "--scenario", scenario, "--out-dir", str(tmp_path), "--figures",
        ])
        assert rc == 0
        assert (tmp_path / "setup_latency.png").stat().st_size > 0
        assert (tmp_path / "link_utilization.png").stat().st_size > 0


class TestCliAnalyze:
    def test_single_value_row(self, capsys):
        assert main(["analyze", "--n", "4"]) == 0
        out = capsys.readouterr().out
        assert "4, 10, 10, 40, ok" in out

    def test_range_rows_all_ok(self, capsys):
        assert main(["analyze", "--n", "2..8"]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        rows = [l for l in out if l[0].isdigit()]
        assert len(rows) == 7
        assert all(l.endswith("ok") for l in rows)

    def test_rejects_degenerate_n(self, capsys):
        assert main(["analyze", "--n", "1"]) == 1

    def test_mesh_demand_table(self, capsys):
        assert main(["analyze", "--n", "4", "--mesh-demand"]) == 0
        out = capsys.readouterr().out
        assert "2, 6, 12" in out

    def test_figures(self, tmp_path):
        rc = main(["analyze", "--n", "2..6", "--figures", "--out-dir", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "command_bounds.png").exists()
        assert (tmp_path / "mesh_demand.png").exists()


class TestCliVerify:
    def test_small_campaign_passes(self, capsys):
        assert main(["verify", "--scenarios", "20", "--seed", "7"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 5

    def test_repeat_is_identical(self, capsys):
        main(["verify", "--scenarios", "10", "--seed", "7"])
        first = capsys.readouterr().out
        main(["verify", "--scenarios", "10", "--seed", "7"])
        assert capsys.readouterr().out == first

    def test_depth_one_still_leak_free(self, capsys):
        assert main(["verify", "--scenarios", "30", "--seed", "3",
                     "--fifo-depth", "1"]) == 0
