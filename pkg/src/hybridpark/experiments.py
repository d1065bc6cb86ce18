"""Scenario files, paired FBOS/HFC runs, reports, snapshots and the CLI.

Scenario files are INI text::

    [scenario]
    name = coarse-ground-hfc
    supervisory = true

    [vehicle]
    mu = 0.6

    [controller]
    k1 = 0.00294985
    k2 = 0.000816593

    [world]
    layout = parallel
    slot_length = 720

Every key is optional except those a layout needs.  Lengths are in mm,
angles in degrees, times in seconds.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import io
import json
import math
import statistics
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

from .controllers import NAMES, ControllerSet, HFCConfig, HybridController
from .dsl import ParseError, parse
from .fsm import (
    Driver,
    ModeKind,
    ParkingConfig,
    Sample,
    Stop,
    run_exit,
    run_maneuver,
    search,
)
from .sim import Rect, Simulation, VehicleParams, VehicleState, World, footprint

CSV_COLUMNS = ("t", "x", "y", "heading", "steer", "v", "u1", "u2", "u3", "u4", "u5", "u6", "mode")
GOLDEN = ("long-vehicle-fbos", "long-vehicle-hfc", "coarse-ground-fbos", "coarse-ground-hfc")
TURN_PHASES = ("reverse-turn-in", "reverse-turn")


class ScenarioError(ValueError):
    """The scenario file is malformed or refers to something missing."""


class IncomparableRuns(ValueError):
    pass


class CommissioningFailed(RuntimeError):
    pass


def fmt(x: float) -> str:
    # + 0.0 folds negative zero
    return f"{x + 0.0:.9g}"


# -- scenario -----------------------------------------------------------------


@dataclass(frozen=True)
class WorldSpec:
    """Generated layout around one slot, or explicit obstacles (``custom``)."""

    layout: str = "parallel"
    slot_length: float = 720.0
    slot_depth: float = 240.0
    neighbour_length: float | None = None
    neighbour_width: float | None = None
    neighbour_gap: float = 40.0
    safe_distance: float = 150.0
    approach: float = 500.0
    obstacles: tuple[Rect, ...] = ()
    start: VehicleState = VehicleState()

    def build(self, params: VehicleParams) -> tuple[World, VehicleState]:
        if self.layout == "custom":
            return World(self.obstacles), self.start
        nl = self.neighbour_length or params.length
        nw = self.neighbour_width or params.width
        row = self.safe_distance + params.width / 2
        g0, g1 = 0.0, self.slot_length
        obs: list[Rect] = []
        if self.layout == "parallel":
            for i, x in enumerate((-2 * nl, -nl)):
                obs.append(Rect.from_bounds(x, row, x + nl, row + nw, f"rear{i}"))
            for i, x in enumerate((g1, g1 + nl)):
                obs.append(Rect.from_bounds(x, row, x + nl, row + nw, f"front{i}"))
            lo, hi = -3 * nl, g1 + 3 * nl
        elif self.layout == "vertical":
            pitch = nw + self.neighbour_gap
            for i in range(3):
                x = -(i + 1) * pitch + self.neighbour_gap
                obs.append(Rect.from_bounds(x, row, x + nw, row + nl, f"rear{i}"))
                x = g1 + i * pitch
                obs.append(Rect.from_bounds(x, row, x + nw, row + nl, f"front{i}"))
            lo, hi = -4 * pitch, g1 + 4 * pitch
        else:
            raise ScenarioError(f"unknown layout {self.layout!r}")
        obs.append(Rect.from_bounds(lo, row + self.slot_depth, hi, row + self.slot_depth + 20, "curb"))
        return World(tuple(obs)), VehicleState(x=g0 - self.approach)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    vehicle: VehicleParams = VehicleParams()
    world: WorldSpec = WorldSpec()
    controller: HFCConfig = HFCConfig()
    parking: ParkingConfig = ParkingConfig()
    rules: Path | None = None
    seed: int = 0
    noise: bool = False
    snapshot_period: float = 2.0
    exit: bool = False
    # friction range whose midpoint defines r2 = 0 during commissioning
    mu_range: tuple[float, float] = (0.3, 0.6)

    @property
    def supervisory(self) -> bool:
        return self.controller.supervisory

    def __post_init__(self) -> None:
        if self.snapshot_period <= 0:
            raise ScenarioError("snapshot_period must be positive")
        if self.rules is not None:
            missing = [n for n in NAMES if not (Path(self.rules) / f"{n}.fzc").is_file()]
            if missing:
                raise ScenarioError(f"rules directory {self.rules} lacks {', '.join(missing)}")

    def controllers(self) -> ControllerSet:
        return ControllerSet.load(self.rules)


def _fields(cls) -> dict[str, type]:
    return {f.name: f.type for f in dataclasses.fields(cls)}


def _coerce(section: str, key: str, raw: str, kind: str):
    try:
        if "bool" in kind:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in kind and "float" not in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
        return raw
    except ValueError:
        raise ScenarioError(f"[{section}] {key}: cannot read {raw!r} as {kind}") from None


def _section(cp: configparser.ConfigParser, name: str, cls, skip: Sequence[str] = ()) -> dict:
    if not cp.has_section(name):
        return {}
    known = _fields(cls)
    out = {}
    for key, raw in cp.items(name):
        if key in skip:
            continue
        if key not in known:
            raise ScenarioError(f"[{name}] unknown key {key!r}")
        out[key] = _coerce(name, key, raw, str(known[key]))
    return out


def _rect(name: str, raw: str) -> Rect:
    try:
        x0, y0, x1, y1 = (float(v) for v in raw.split(","))
    except ValueError:
        raise ScenarioError(f"[world] obstacle.{name}: expected x0, y0, x1, y1") from None
    return Rect.from_bounds(x0, y0, x1, y1, name)


def parse_scenario(text: str, base: Path | None = None) -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(str(exc)) from None
    for sec in cp.sections():
        if sec not in ("scenario", "vehicle", "controller", "world", "parking"):
            raise ScenarioError(f"unknown section [{sec}]")
    top: dict = {}
    if cp.has_section("scenario"):
        kinds = {"name": "str", "seed": "int", "noise": "bool", "snapshot_period": "float",
                 "exit": "bool", "supervisory": "bool", "rules": "str", "mu_range": "str"}
        for key, raw in cp.items("scenario"):
            if key not in kinds:
                raise ScenarioError(f"[scenario] unknown key {key!r}")
            top[key] = _coerce("scenario", key, raw, kinds[key])
    ctl = _section(cp, "controller", HFCConfig)
    if "supervisory" in top:
        ctl["supervisory"] = top.pop("supervisory")
    world = _section(cp, "world", WorldSpec, skip=[k for k, _ in cp.items("world")
                                                  if k.startswith(("obstacle.", "start_"))]
                     if cp.has_section("world") else ())
    if cp.has_section("world"):
        obstacles = tuple(_rect(k.split(".", 1)[1], v) for k, v in cp.items("world")
                          if k.startswith("obstacle."))
        start = {k[len("start_"):]: _coerce("world", k, v, "float")
                 for k, v in cp.items("world") if k.startswith("start_")}
        if obstacles:
            world["obstacles"] = obstacles
        if start:
            bad = set(start) - {"x", "y", "heading"}
            if bad:
                raise ScenarioError(f"[world] unknown start keys {sorted(bad)}")
            world["start"] = VehicleState(**start)
    if "rules" in top:
        rules = Path(top["rules"])
        if not rules.is_absolute() and base is not None:
            rules = base / rules
        top["rules"] = rules
    if "mu_range" in top:
        try:
            lo, hi = (float(v) for v in top["mu_range"].split(","))
        except ValueError:
            raise ScenarioError("[scenario] mu_range: expected two numbers") from None
        top["mu_range"] = (lo, hi)
    try:
        return ScenarioConfig(
            vehicle=VehicleParams(**_section(cp, "vehicle", VehicleParams)),
            world=WorldSpec(**world),
            controller=HFCConfig(**ctl),
            parking=ParkingConfig(**_section(cp, "parking", ParkingConfig)),
            **top,
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from None


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read a scenario file, or a golden scenario by name."""
    p = Path(path)
    if not p.exists() and str(path) in GOLDEN:
        return golden(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario(text, p.parent)


def golden(name: str) -> ScenarioConfig:
    if name not in GOLDEN:
        raise ScenarioError(f"no golden scenario {name!r}")
    text = resources.files("hybridpark.scenarios").joinpath(f"{name}.ini").read_text()
    return parse_scenario(text)


# -- reports ------------------------------------------------------------------


@dataclass(frozen=True)
class RadiusStats:
    mean: float
    std: float
    count: int


def radius_stats(samples: Sequence[Sample], params: VehicleParams, phases=TURN_PHASES,
                 beta: float | None = None) -> RadiusStats | None:
    """Instantaneous radius v/omega = wheelbase/tan(steer) over the middle
    80% of the heading change of the first turn phase found."""
    turn = [s for s in samples if s.mode.split(":")[-1] in phases]
    if not turn:
        return None
    phase = turn[0].mode
    turn = [s for s in turn if s.mode == phase]
    h0 = turn[0].heading
    span = abs(beta) if beta is not None else max(abs(s.heading - h0) for s in turn)
    radii = [
        params.wheelbase / abs(math.tan(math.radians(s.steer)))
        for s in turn
        if 0.1 * span <= abs(s.heading - h0) <= 0.9 * span and abs(s.steer) > 1e-9
    ]
    if not radii:
        return None
    return RadiusStats(statistics.fmean(radii), statistics.pstdev(radii), len(radii))


def world_id(world: World, params: VehicleParams) -> str:
    h = hashlib.sha256()
    for r in world.obstacles:
        h.update(" ".join(fmt(v) for v in (r.cx, r.cy, r.length, r.width, r.angle)).encode())
        h.update(r.name.encode() + b"\n")
    for f in dataclasses.fields(params):
        h.update(f"{f.name}={fmt(getattr(params, f.name))}\n".encode())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class RunReport:
    scenario: str
    world_id: str
    vehicle: VehicleParams
    supervisory: bool
    seed: int
    samples: tuple[Sample, ...]
    modes: tuple[tuple[float, str], ...]
    outcome: str
    parking_time: float | None = None
    heading_error: float | None = None
    position_error: float | None = None
    collision: str | None = None
    slot_kind: str | None = None
    radius: RadiusStats | None = None
    exit_outcome: str | None = None
    exit_heading_error: float | None = None
    world: World = field(default=World(), compare=False, repr=False)

    def __post_init__(self) -> None:
        ts = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("samples must be strictly increasing in t")
        if (self.parking_time is not None) != (self.outcome == "parked"):
            raise ValueError("parking_time is set exactly when the run parked")

    @property
    def duration(self) -> float:
        return self.samples[-1].t if self.samples else 0.0

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in self.samples:
            w.writerow([fmt(getattr(s, c)) for c in CSV_COLUMNS[:-1]] + [s.mode])
        return buf.getvalue()

    def summary(self) -> dict:
        opt = lambda x: None if x is None else float(fmt(x))  # noqa: E731
        return {
            "scenario": self.scenario,
            "world_id": self.world_id,
            "vehicle": {f.name: getattr(self.vehicle, f.name) for f in dataclasses.fields(self.vehicle)},
            "supervisory": self.supervisory,
            "seed": self.seed,
            "outcome": self.outcome,
            "parking_time": opt(self.parking_time),
            "heading_error": opt(self.heading_error),
            "position_error": opt(self.position_error),
            "collision": self.collision,
            "slot_kind": self.slot_kind,
            "radius": None if self.radius is None else {
                "mean": opt(self.radius.mean), "std": opt(self.radius.std), "count": self.radius.count},
            "exit_outcome": self.exit_outcome,
            "exit_heading_error": opt(self.exit_heading_error),
            "duration": opt(self.duration),
            "modes": [[float(fmt(t)), m] for t, m in self.modes],
            "obstacles": [[r.name] + [float(fmt(v)) for v in (r.cx, r.cy, r.length, r.width, r.angle)]
                          for r in self.world.obstacles],
        }

    def json_text(self) -> str:
        return json.dumps(self.summary(), indent=1, sort_keys=True) + "\n"

    def write(self, out: str | Path) -> Path:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.json_text())
        (out / "trajectory.csv").write_text(self.csv_text())
        return out / "report.json"


def _read_samples(path: Path) -> tuple[Sample, ...]:
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    return tuple(Sample(*(float(v) for v in r[:-1]), r[-1]) for r in rows[1:])


def load_report(path: str | Path) -> RunReport:
    """Read a report written by :meth:`RunReport.write` (file or directory)."""
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    d = json.loads(p.read_text())
    rad = d["radius"]
    world = World(tuple(Rect(cx, cy, ln, wd, ang, name) for name, cx, cy, ln, wd, ang in d["obstacles"]))
    return RunReport(
        scenario=d["scenario"], world_id=d["world_id"], vehicle=VehicleParams(**d["vehicle"]),
        supervisory=d["supervisory"], seed=d["seed"],
        samples=_read_samples(p.parent / "trajectory.csv"),
        modes=tuple((t, m) for t, m in d["modes"]), outcome=d["outcome"],
        parking_time=d["parking_time"], heading_error=d["heading_error"],
        position_error=d["position_error"], collision=d["collision"], slot_kind=d["slot_kind"],
        radius=None if rad is None else RadiusStats(rad["mean"], rad["std"], rad["count"]),
        exit_outcome=d["exit_outcome"], exit_heading_error=d["exit_heading_error"], world=world,
    )


# -- running ------------------------------------------------------------------


def _driver(cfg: ScenarioConfig, controllers: ControllerSet | None = None) -> Driver:
    world, start = cfg.world.build(cfg.vehicle)
    sim = Simulation(cfg.vehicle, world, start, cfg.controller.control_period, cfg.noise, cfg.seed)
    ctl = HybridController(cfg.controller, controllers or cfg.controllers())
    return Driver(sim, ctl, cfg.parking)


def run_scenario(cfg: ScenarioConfig, out: str | Path | None = None, snapshots: bool = False,
                 controllers: ControllerSet | None = None) -> RunReport:
    """Search, park and optionally leave again; deterministic for a given cfg."""
    d = _driver(cfg, controllers)
    outcome, collision, slot_kind = "timeout", None, None
    herr = perr = ptime = None
    exit_outcome = exit_herr = None
    try:
        slot = search(d)
    except Stop as stop:
        d.enter(ModeKind.FAILED, stop.detail if stop.outcome == "timeout" else "collision")
        outcome, collision = stop.outcome, d.sim.collided
    else:
        if slot is None:
            d.enter(ModeKind.FAILED, "no slot")
        else:
            slot_kind = slot.kind
            res = run_maneuver(slot.kind, d)
            outcome, collision = res.outcome, res.collision
            if outcome == "parked":
                herr, perr = res.heading_error, res.position_error
                start = next(t for t, m in d.modes if m.detail in TURN_PHASES)
                ptime = res.start_time + res.elapsed - start
                if cfg.exit:
                    ex = run_exit(d)
                    exit_outcome, exit_herr = ex.outcome, ex.heading_error
    samples = tuple(d.samples)
    report = RunReport(
        scenario=cfg.name, world_id=world_id(d.sim.world, cfg.vehicle), vehicle=cfg.vehicle,
        supervisory=cfg.supervisory, seed=cfg.seed, samples=samples,
        modes=tuple((t, str(m)) for t, m in d.modes), outcome=outcome,
        parking_time=ptime, heading_error=herr, position_error=perr, collision=collision,
        slot_kind=slot_kind, radius=radius_stats(samples, cfg.vehicle),
        exit_outcome=exit_outcome, exit_heading_error=exit_herr, world=d.sim.world,
    )
    if out is not None:
        report.write(out)
        if snapshots:
            emit_snapshots(report, report.world, cfg.snapshot_period, Path(out) / "snapshots")
    return report


# -- comparison ---------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonTable:
    a: str
    b: str
    outcome: tuple[str, str]
    parking_time: tuple[float | None, float | None]
    time_delta: float | None
    time_ratio: float | None
    radius_std: tuple[float | None, float | None]
    radius_std_delta: float | None

    def __str__(self) -> str:
        def cell(x):
            return "-" if x is None else (fmt(x) if isinstance(x, float) else str(x))

        rows = [
            ("", self.a, self.b, "delta", "ratio"),
            ("outcome", *self.outcome, "", ""),
            ("parking time [s]", *map(cell, self.parking_time), cell(self.time_delta), cell(self.time_ratio)),
            ("radius std [mm]", *map(cell, self.radius_std), cell(self.radius_std_delta), ""),
        ]
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)


def compare(a: RunReport, b: RunReport) -> ComparisonTable:
    """Side-by-side metrics of two runs in the same world (a relative to b)."""
    if a.world_id != b.world_id:
        raise IncomparableRuns(f"{a.scenario} and {b.scenario} ran in different worlds")
    ta, tb = a.parking_time, b.parking_time
    both = ta is not None and tb is not None
    ra = a.radius.std if a.radius else None
    rb = b.radius.std if b.radius else None
    return ComparisonTable(
        a.scenario, b.scenario, (a.outcome, b.outcome), (ta, tb),
        ta - tb if both else None, ta / tb if both and tb else None,
        (ra, rb), ra - rb if ra is not None and rb is not None else None,
    )


# -- snapshots ----------------------------------------------------------------


def _poly(points, **attrs) -> str:
    pts = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in points)
    extra = "".join(f' {k.replace("_", "-")}="{v}"' for k, v in attrs.items())
    return f'<polygon points="{pts}"{extra}/>'


def snapshot_svg(report: RunReport, world: World, index: int) -> str:
    p, s = report.vehicle, report.samples[index]
    xs = [c[0] for r in world.obstacles for c in r.corners()] + [q.x for q in report.samples]
    ys = [c[1] for r in world.obstacles for c in r.corners()] + [q.y for q in report.samples]
    pad = p.length
    x0, y0 = min(xs) - pad, min(ys) - pad
    w, h = max(xs) + pad - x0, max(ys) + pad - y0
    state = VehicleState(x=s.x, y=s.y, heading=s.heading, steer=s.steer)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{fmt(x0)} {fmt(y0)} {fmt(w)} {fmt(h)}">',
        f"<title>{report.scenario} t={fmt(s.t)} s {s.mode}</title>",
    ]
    for r in world.obstacles:
        out.append(_poly(r.corners(), fill="#bbb", stroke="#555", data_name=r.name))
    trail = " ".join(f"{fmt(q.x)},{fmt(q.y)}" for q in report.samples[: index + 1])
    out.append(f'<polyline points="{trail}" fill="none" stroke="#36c" stroke-width="4"/>')
    out.append(
        f'<g id="vehicle" data-t="{fmt(s.t)}" data-x="{fmt(s.x)}" data-y="{fmt(s.y)}" '
        f'data-heading="{fmt(s.heading)}" data-steer="{fmt(s.steer)}">'
    )
    out.append(_poly(footprint(state, p).corners(), fill="#e93", fill_opacity="0.8", stroke="#000"))
    # front wheels drawn at the steering angle
    h, d = math.radians(s.heading), math.radians(s.heading + s.steer)
    half = p.length / 8
    for side in (-1, 1):
        cx = s.x + p.wheelbase * math.cos(h) - side * p.width / 2 * math.sin(h)
        cy = s.y + p.wheelbase * math.sin(h) + side * p.width / 2 * math.cos(h)
        out.append(
            f'<line class="steer" x1="{fmt(cx - half * math.cos(d))}" y1="{fmt(cy - half * math.sin(d))}" '
            f'x2="{fmt(cx + half * math.cos(d))}" y2="{fmt(cy + half * math.sin(d))}" '
            'stroke="#000" stroke-width="10"/>'
        )
    out += ["</g>", "</svg>", ""]
    return "\n".join(out)


def snapshot_indices(report: RunReport, period: float) -> list[int]:
    if period <= 0:
        raise ValueError("period must be positive")
    if not report.samples:
        return []
    n = math.floor(report.duration / period + 1e-9) + 1
    ts = [s.t for s in report.samples]
    out = []
    for k in range(n):
        target = k * period
        out.append(min(range(len(ts)), key=lambda i: abs(ts[i] - target)))
    return out


def emit_snapshots(report: RunReport, world: World, period: float = 2.0,
                   out: str | Path = "snapshots") -> list[Path]:
    """One SVG per ``period`` seconds of the run, t = 0 included."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, i in enumerate(snapshot_indices(report, period)):
        path = out / f"frame_{k:03d}.svg"
        path.write_text(snapshot_svg(report, world, i))
        paths.append(path)
    return paths


# -- commissioning ------------------------------------------------------------


def commissioning_turn(params: VehicleParams, controllers: ControllerSet | None = None,
                       config: HFCConfig | None = None, beta: float = -90.0,
                       gear: int = -1) -> Driver:
    """One closed-loop turn from rest in free space."""
    cfg = config or HFCConfig(supervisory=False)
    sim = Simulation(params, World(), VehicleState(), cfg.control_period)
    d = Driver(sim, HybridController(cfg, controllers or ControllerSet.load()))
    d.enter(ModeKind.SLOT_FOUND, "commissioning")
    d.enter(ModeKind.VERTICAL, "reverse-turn")
    try:
        d.turn(beta, gear)
    except Stop as stop:
        raise CommissioningFailed(f"commissioning turn ended by {stop.outcome}: {stop.detail}") from None
    return d


def calibrate_k(vehicle: VehicleParams, which: str, controllers: ControllerSet | None = None,
                mu_range: tuple[float, float] = (0.3, 0.6)) -> float:
    """Commission k1, k2 or k3 with the base controllers alone.

    k1 and k3 are 1/mean(v/omega) over the middle 80% of a 90 degree turn at
    the vehicle's own friction.  k2 is 1/mean(|v|/u3) over a 45 degree turn at
    the midpoint of ``mu_range``, so r2 is zero at medium friction.
    """
    controllers = controllers or ControllerSet.load()
    if which in ("k1", "k3"):
        d = commissioning_turn(vehicle, controllers, beta=-90.0)
        stats = radius_stats(d.samples, vehicle, beta=90.0)
        if stats is None:
            raise CommissioningFailed("the turn produced no radius samples")
        return 1.0 / stats.mean
    if which == "k2":
        mid = replace(vehicle, mu=0.5 * (mu_range[0] + mu_range[1]))
        d = commissioning_turn(mid, controllers, beta=-45.0)
        ratios = [abs(s.v) / s.u3 for s in d.samples if s.u3 > 0 and abs(s.v) > 0]
        if not ratios:
            raise CommissioningFailed("the turn never moved")
        return 1.0 / statistics.fmean(ratios)
    raise ValueError(f"unknown coefficient {which!r}")


# -- CLI ----------------------------------------------------------------------


def _cmd_run(args) -> int:
    cfg = load_scenario(args.scenario)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.snapshots and args.out is None:
        raise ScenarioError("--snapshots needs --out")
    report = run_scenario(cfg, args.out, args.snapshots)
    line = f"{report.scenario}: {report.outcome}"
    if report.parking_time is not None:
        line += f" in {report.parking_time:.2f} s, heading error {report.heading_error:.2f} deg"
    if report.collision:
        line += f" with {report.collision}"
    print(line)
    return 0


def _cmd_compare(args) -> int:
    print(compare(load_report(args.a), load_report(args.b)))
    return 0


def _cmd_calibrate(args) -> int:
    cfg = load_scenario(args.scenario)
    print(fmt(calibrate_k(cfg.vehicle, args.k, cfg.controllers(), cfg.mu_range)))
    return 0


def _cmd_validate(args) -> int:
    try:
        spec = parse(Path(args.file).read_bytes())
    except OSError as exc:
        print(f"{args.file}: {exc.strerror}", file=sys.stderr)
        return 1
    except ParseError as exc:
        print(f"{args.file}: {exc}", file=sys.stderr)
        return 1
    rb = spec.rule_base
    print(f"{args.file}: ok ({spec.kind} controller {spec.name}, {len(rb.rules)} rules)")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="hybridpark", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a scenario file or golden scenario name")
    p.add_argument("scenario")
    p.add_argument("--out", type=Path)
    p.add_argument("--snapshots", action="store_true")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("compare", help="compare two written reports")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=_cmd_compare)
    p = sub.add_parser("calibrate", help="commission a normalization coefficient")
    p.add_argument("scenario")
    p.add_argument("--k", choices=("k1", "k2", "k3"), required=True)
    p.set_defaults(func=_cmd_calibrate)
    p = sub.add_parser("validate", help="parse and check a .fzc controller file")
    p.add_argument("file")
    p.set_defaults(func=_cmd_validate)
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, IncomparableRuns, CommissioningFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
