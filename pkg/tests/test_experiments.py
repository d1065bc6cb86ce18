import csv
import io
import math
import re
from dataclasses import replace
from importlib import resources

import pytest

from hybridpark.experiments import (
    CSV_COLUMNS,
    IncomparableRuns,
    ScenarioError,
    calibrate_k,
    commissioning_turn,
    compare,
    emit_snapshots,
    fmt,
    golden,
    load_report,
    load_scenario,
    main,
    parse_scenario,
    run_scenario,
    snapshot_indices,
    snapshot_svg,
)
from hybridpark.fsm import Sample
from hybridpark.sim import VehicleParams

NOMINAL_INI = """\
[scenario]
name = nominal
mu_range = 0.3, 0.6
[vehicle]
mu = 0.3
[world]
layout = parallel
slot_length = 720
"""


class TestScenarioFiles:
    def test_defaults(self):
        cfg = parse_scenario("[scenario]\nname = x\n")
        assert cfg.name == "x" and cfg.vehicle == VehicleParams()

    def test_goldens_load(self):
        cfg = golden("long-vehicle-hfc")
        assert cfg.vehicle.length == 500 and cfg.supervisory
        assert not golden("long-vehicle-fbos").supervisory
        assert golden("coarse-ground-hfc").vehicle.mu == 0.6

    def test_custom_obstacles(self):
        cfg = parse_scenario("[world]\nlayout = custom\nobstacle.box = 0, 200, 300, 400\n"
                             "start_x = -400\nstart_heading = 3\n")
        world, start = cfg.world.build(cfg.vehicle)
        box = world.obstacles[0]
        assert (box.name, box.cx, box.cy, box.length, box.width) == ("box", 150, 300, 300, 200)
        assert (start.x, start.heading) == (-400, 3)

    @pytest.mark.parametrize("text, needle", [
        ("[bogus]\n", "bogus"),
        ("[vehicle]\nlenght = 3\n", "lenght"),
        ("[vehicle]\nmu = slippery\n", "mu"),
        ("[vehicle]\nmu = 5\n", "mu"),
        ("[world]\nobstacle.a = 1, 2, 3\n", "obstacle.a"),
        ("[world]\nlayout = spiral\n", "spiral"),
        ("[scenario]\nrules = /nonexistent/rules\n", "rules"),
        ("[scenario]\nmu_range = 0.3\n", "mu_range"),
        ("not an ini file", "section"),
    ])
    def test_errors(self, text, needle):
        with pytest.raises(ScenarioError, match=re.escape(needle)):
            cfg = parse_scenario(text)
            cfg.world.build(cfg.vehicle)

    def test_unknown_golden(self):
        with pytest.raises(ScenarioError):
            load_scenario("no-such-scenario")


class TestReports:
    def test_rerun_is_byte_identical(self, golden_runs, controllers):
        first = golden_runs["coarse-ground-hfc"][0]
        again = run_scenario(golden("coarse-ground-hfc"), controllers=controllers)
        assert again.json_text() == first.json_text()
        assert again.csv_text() == first.csv_text()

    def test_csv_layout(self, golden_runs):
        text = golden_runs["coarse-ground-fbos"][0].csv_text()
        rows = list(csv.reader(io.StringIO(text)))
        assert tuple(rows[0]) == CSV_COLUMNS
        for row in rows[1::97]:
            for cell in row[:-1]:
                digits = re.sub(r"e.*$", "", cell).lstrip("-").replace(".", "").lstrip("0")
                assert len(digits) <= 9
                assert cell == fmt(float(cell))

    def test_fmt(self):
        assert fmt(1 / 3) == "0.333333333"
        assert fmt(0.0) == "0" and fmt(-0.0) == "0"

    def test_round_trip(self, golden_runs, tmp_path):
        report = golden_runs["coarse-ground-hfc"][0]
        report.write(tmp_path)
        back = load_report(tmp_path)
        assert back.json_text() == report.json_text()
        assert back.csv_text() == report.csv_text()

    def test_parking_time_invariant(self, golden_runs):
        report = golden_runs["long-vehicle-fbos"][0]
        with pytest.raises(ValueError):
            replace(report, parking_time=5.0)

    def test_time_must_increase(self, golden_runs):
        report = golden_runs["long-vehicle-fbos"][0]
        with pytest.raises(ValueError):
            replace(report, samples=report.samples[:3] + report.samples[1:2])


class TestCompare:
    def test_identical(self, golden_runs):
        r = golden_runs["coarse-ground-hfc"][0]
        table = compare(r, r)
        assert table.time_delta == 0.0 and table.time_ratio == 1.0
        assert table.radius_std_delta == 0.0

    def test_pair(self, golden_runs):
        table = compare(golden_runs["coarse-ground-fbos"][0], golden_runs["coarse-ground-hfc"][0])
        assert table.time_ratio == pytest.approx(table.parking_time[0] / table.parking_time[1])
        text = str(table)
        assert "parking time" in text and "coarse-ground-hfc" in text

    def test_different_worlds(self, golden_runs):
        with pytest.raises(IncomparableRuns):
            compare(golden_runs["coarse-ground-hfc"][0], golden_runs["long-vehicle-hfc"][0])


def _vehicle_attrs(svg):
    g = re.search(r'<g id="vehicle" ([^>]*)>', svg).group(1)
    return {k: float(v) for k, v in re.findall(r'data-(\w+)="([^"]*)"', g)}


class TestSnapshots:
    def test_frame_count_and_positions(self, golden_runs, tmp_path):
        report = golden_runs["long-vehicle-hfc"][0]
        paths = emit_snapshots(report, report.world, 2.0, tmp_path)
        assert len(paths) == math.floor(report.duration / 2.0) + 1
        rows = {float(r["t"]): r for r in csv.DictReader(io.StringIO(report.csv_text()))}
        for p in paths:
            svg = p.read_text()
            attrs = _vehicle_attrs(svg)
            row = rows[attrs["t"]]
            assert attrs["x"] == float(row["x"]) and attrs["y"] == float(row["y"])
            assert svg.count('class="steer"') == 2

    def test_zero_length_run(self, golden_runs, tmp_path):
        report = golden_runs["long-vehicle-hfc"][0]
        s = report.samples[0]
        short = replace(report, samples=(s,), outcome="timeout", parking_time=None)
        assert snapshot_indices(short, 2.0) == [0]
        assert len(emit_snapshots(short, report.world, 2.0, tmp_path)) == 1

    def test_steer_indicator_follows_angle(self, golden_runs, tmp_path):
        report = golden_runs["long-vehicle-hfc"][0]
        i = max(range(len(report.samples)), key=lambda k: abs(report.samples[k].steer))
        s = report.samples[i]
        line = re.search(r'<line class="steer" x1="([^"]+)" y1="([^"]+)" x2="([^"]+)" y2="([^"]+)"',
                         snapshot_svg(report, report.world, i))
        x1, y1, x2, y2 = map(float, line.groups())
        assert math.degrees(math.atan2(y2 - y1, x2 - x1)) == pytest.approx(s.heading + s.steer, abs=1e-4)


class TestCommissioning:
    def test_k1_is_inverse_mean_radius(self, controllers):
        p = VehicleParams()
        k1 = calibrate_k(p, "k1", controllers)
        d = commissioning_turn(p, controllers)
        turn = [s for s in d.samples if s.mode.endswith("reverse-turn")]
        h0 = turn[0].heading
        radii = [p.wheelbase / abs(math.tan(math.radians(s.steer))) for s in turn
                 if 9.0 <= abs(s.heading - h0) <= 81.0 and s.steer != 0]
        assert k1 == pytest.approx(len(radii) / sum(radii), rel=1e-12)
        assert k1 == pytest.approx(golden("coarse-ground-hfc").controller.k1, rel=1e-8)

    def test_longer_vehicle_turns_wider(self, controllers):
        nominal = calibrate_k(VehicleParams(), "k1", controllers)
        long = calibrate_k(VehicleParams(length=500, width=180, wheelbase=360), "k1", controllers)
        assert long < nominal

    def test_k2_centres_r2_at_medium_friction(self, controllers):
        p = VehicleParams()
        k2 = calibrate_k(p, "k2", controllers)
        d = commissioning_turn(replace(p, mu=0.45), controllers, beta=-45.0)
        r2 = [k2 * abs(s.v) / s.u3 - 1 for s in d.samples if s.u3 > 0 and s.v != 0]
        assert abs(sum(r2) / len(r2)) <= 0.05
        assert k2 == pytest.approx(golden("coarse-ground-hfc").controller.k2, rel=1e-8)

    def test_unknown_coefficient(self, controllers):
        with pytest.raises(ValueError):
            calibrate_k(VehicleParams(), "k9", controllers)


class TestCLI:
    def test_run_and_compare(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "coarse-ground-fbos", "--out", str(a), "--snapshots"]) == 0
        assert main(["run", "coarse-ground-hfc", "--out", str(b)]) == 0
        assert (a / "report.json").is_file() and (a / "trajectory.csv").is_file()
        assert (a / "snapshots" / "frame_000.svg").is_file()
        assert main(["compare", str(a), str(b)]) == 0
        out = capsys.readouterr().out
        assert "coarse-ground-hfc: parked" in out and "ratio" in out

    def test_calibrate(self, tmp_path, capsys):
        ini = tmp_path / "nominal.ini"
        ini.write_text(NOMINAL_INI)
        assert main(["calibrate", str(ini), "--k", "k1"]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(0.00293377205, rel=1e-8)

    def test_validate(self, tmp_path, capsys):
        good = resources.files("hybridpark.rules").joinpath("sfc_speed.fzc")
        assert main(["validate", str(good)]) == 0
        bad = tmp_path / "bad.fzc"
        bad.write_text("controller x base\nvar e in [0 1] terms ZO\n")
        assert main(["validate", str(bad)]) == 1
        assert "line 2" in capsys.readouterr().err

    def test_errors_exit_2(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "missing.ini")]) == 2
        assert main(["run", "coarse-ground-hfc", "--snapshots"]) == 2
        assert "error:" in capsys.readouterr().err


def test_sample_is_plain_record():
    s = Sample(0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 0, 0, 0, 0, 0, 0, "searching")
    assert s.mode == "searching"
