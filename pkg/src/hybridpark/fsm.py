"""Parking mode flow: search, slot detection, mode selection, maneuvers, exit.

The lane frame is fixed when a run starts: ``along`` follows the initial
heading and ``lateral`` points to the vehicle's right (towards the parked
row).  Maneuver geometry is planned in that frame from odometry alone; the
turns themselves are closed-loop under the hybrid controller.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable

from .controllers import HybridController, Posture, Turning
from .sim import ControlSignal, SensorFrame, Simulation, VehicleParams


class ModeKind(str, Enum):
    SEARCHING = "searching"
    SLOT_FOUND = "slot-found"
    PARALLEL = "parallel-parking"
    VERTICAL = "vertical-parking"
    PARKED = "parked"
    EXITING = "exiting"
    FAILED = "failed"


EDGES: dict[ModeKind, frozenset[ModeKind]] = {
    ModeKind.SEARCHING: frozenset({ModeKind.SLOT_FOUND, ModeKind.FAILED}),
    ModeKind.SLOT_FOUND: frozenset(
        {ModeKind.PARALLEL, ModeKind.VERTICAL, ModeKind.SEARCHING, ModeKind.FAILED}
    ),
    ModeKind.PARALLEL: frozenset({ModeKind.PARALLEL, ModeKind.PARKED, ModeKind.FAILED}),
    ModeKind.VERTICAL: frozenset({ModeKind.VERTICAL, ModeKind.PARKED, ModeKind.FAILED}),
    ModeKind.PARKED: frozenset({ModeKind.EXITING}),
    ModeKind.EXITING: frozenset({ModeKind.EXITING, ModeKind.SEARCHING, ModeKind.FAILED}),
    ModeKind.FAILED: frozenset(),
}


class IllegalTransition(RuntimeError):
    pass


class PreconditionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Mode:
    kind: ModeKind
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.detail}" if self.detail else self.kind.value


def check_trace(modes: Iterable[Mode]) -> None:
    """Raise ``IllegalTransition`` unless consecutive modes follow ``EDGES``."""
    prev = None
    for mode in modes:
        if prev is not None and mode.kind not in EDGES[prev.kind]:
            raise IllegalTransition(f"{prev} -> {mode}")
        prev = mode


@dataclass(frozen=True)
class SlotCandidate:
    start_odometer: float
    length_along_wall: float
    depth: float
    baseline: float = 0.0
    kind: str | None = None

    def __post_init__(self) -> None:
        if self.length_along_wall <= 0:
            raise ValueError("slot length must be positive")

    @property
    def end_odometer(self) -> float:
        return self.start_odometer + self.length_along_wall


class SlotDetector:
    """Incremental gap detector on the front side range ``d1``.

    A gap opens when ``d1`` exceeds ``safe_distance + depth_threshold`` by
    half the hysteresis and closes when it falls the same amount below.
    Odometer values are the along-lane position of the ``d1`` emitter.
    """

    def __init__(self, safe_distance: float = 150.0, depth_threshold: float = 100.0,
                 hysteresis: float = 20.0) -> None:
        level = safe_distance + depth_threshold
        self.open_level = level + hysteresis / 2
        self.close_level = level - hysteresis / 2
        self._baseline: float | None = None
        self._start: float | None = None
        self._deepest = 0.0

    @property
    def in_gap(self) -> bool:
        return self._start is not None

    def update(self, d1: float, odometer: float) -> SlotCandidate | None:
        if self._start is None:
            if d1 > self.open_level:
                self._start, self._deepest = odometer, d1
            else:
                self._baseline = d1
            return None
        self._deepest = max(self._deepest, d1)
        if d1 >= self.close_level:
            return None
        base = self._baseline if self._baseline is not None else self.close_level
        length = odometer - self._start
        start, self._start = self._start, None
        self._baseline = d1
        if length <= 0:
            return None
        return SlotCandidate(start, length, self._deepest - base, base)


def detect_slot(
    frames: Iterable[tuple[SensorFrame, float]],
    safe_distance: float = 150.0,
    depth_threshold: float = 100.0,
    hysteresis: float = 20.0,
) -> SlotCandidate | None:
    """First gap found in a stream of ``(frame, odometer)`` pairs."""
    det = SlotDetector(safe_distance, depth_threshold, hysteresis)
    for frame, odo in frames:
        slot = det.update(frame.d1, odo)
        if slot is not None:
            return slot
    return None


def select_mode(slot: SlotCandidate, params: VehicleParams, margin: float = 40.0,
                ratio: float = 1.4) -> str:
    if slot.depth >= params.length + margin and slot.length_along_wall >= params.width + 2 * margin:
        return "vertical"
    if slot.depth >= params.width + margin and slot.length_along_wall >= params.length * ratio:
        return "parallel"
    return "reject"


@dataclass(frozen=True)
class ParkingConfig:
    """Maneuver geometry and thresholds (all lengths in mm)."""

    safe_distance: float = 150.0
    depth_threshold: float = 100.0
    hysteresis: float = 20.0
    margin: float = 40.0
    parallel_ratio: float = 1.4
    turn_tolerance: float = 2.0
    omega_tolerance: float = 2.0
    phase_timeout: float = 30.0
    run_limit: float = 120.0
    # rest-to-rest displacement of a reverse turn, in the turn's start frame
    # (along is travelled backwards, lateral towards the slot)
    turn_along: float = 282.7
    turn_lateral: float = 126.3
    quarter_along: float = 334.9
    quarter_lateral: float = 362.3
    parallel_angle: float = 45.0
    rear_clearance: float = 40.0
    # share of the slot's spare length left behind the car; the rest is
    # room for the nose to swing in past the front vehicle
    rear_share: float = 0.4
    back_clearance: float = 65.0
    row_inset: float = 20.0
    exit_distance: float = 300.0


@dataclass(frozen=True)
class Sample:
    t: float
    x: float
    y: float
    heading: float
    steer: float
    v: float
    u1: float
    u2: float
    u3: float
    u4: float
    u5: float
    u6: float
    mode: str


@dataclass
class ManeuverResult:
    outcome: str
    mode: Mode
    elapsed: float
    collision: str | None = None
    heading_error: float | None = None
    position_error: float | None = None
    start_time: float = 0.0


class Stop(Exception):
    """Internal: the run has ended (collision, timeout or limit)."""

    def __init__(self, outcome: str, detail: str) -> None:
        super().__init__(detail)
        self.outcome = outcome
        self.detail = detail


class Driver:
    """Couples a simulation, one hybrid controller and the mode graph."""

    def __init__(self, sim: Simulation, controller: HybridController,
                 config: ParkingConfig | None = None) -> None:
        self.sim = sim
        self.ctl = controller
        self.cfg = config or ParkingConfig()
        self.samples: list[Sample] = []
        self.modes: list[tuple[float, Mode]] = []
        self.mode = Mode(ModeKind.SEARCHING)
        self.modes.append((sim.t, self.mode))
        s = sim.state
        self.origin = (s.x, s.y, s.heading)
        self.slot: SlotCandidate | None = None
        # lane lateral of the parked row, assumed at the safe distance until seen
        self.row = self.cfg.safe_distance + sim.params.width / 2
        self._record(ControlSignal())

    # -- lane frame --------------------------------------------------------

    def lane(self, x: float | None = None, y: float | None = None) -> tuple[float, float]:
        s = self.sim.state
        x = s.x if x is None else x
        y = s.y if y is None else y
        x0, y0, h0 = self.origin
        c, sn = math.cos(math.radians(h0)), math.sin(math.radians(h0))
        dx, dy = x - x0, y - y0
        return c * dx + sn * dy, -sn * dx + c * dy

    def relative_heading(self) -> float:
        return self.sim.state.heading - self.origin[2]

    def emitter_along(self) -> float:
        s, p = self.sim.state, self.sim.params
        h = math.radians(s.heading)
        return self.lane(s.x + p.d1_x * math.cos(h), s.y + p.d1_x * math.sin(h))[0]

    def _rays(self) -> dict[str, tuple[float, float]]:
        """Lane lateral of each right-side emitter and cos of the relative heading."""
        s, p = self.sim.state, self.sim.params
        h = math.radians(s.heading)
        c = math.cos(math.radians(self.relative_heading()))
        out = {}
        for key, bx in (("d1", p.d1_x), ("d2", p.d2_x), ("x_d", p.front_x)):
            wx = s.x + bx * math.cos(h) - p.width / 2 * math.sin(h)
            wy = s.y + bx * math.sin(h) + p.width / 2 * math.cos(h)
            out[key] = (self.lane(wx, wy)[1], c)
        return out

    def _bridge(self, frame: SensorFrame) -> SensorFrame:
        """Wall following across gaps: while the row is missing, ranges are
        extrapolated from the last row line seen (odometry only)."""
        limit = self.cfg.safe_distance + self.cfg.depth_threshold
        rays = self._rays()
        if max(frame.d1, frame.d2, frame.x_d) <= limit:
            lat, c = rays["d1"]
            self.row = lat + frame.d1 * c
            return frame
        virt = {k: (self.row - lat) / c for k, (lat, c) in rays.items()}
        return replace(frame, **virt)

    # -- bookkeeping -------------------------------------------------------

    def enter(self, kind: ModeKind, detail: str = "") -> None:
        new = Mode(kind, detail)
        if new.kind not in EDGES[self.mode.kind]:
            raise IllegalTransition(f"{self.mode} -> {new}")
        self.mode = new
        self.modes.append((self.sim.t, new))

    def _record(self, sig: ControlSignal) -> None:
        s, u = self.sim.state, self.ctl.last
        self.samples.append(Sample(
            self.sim.t, s.x, s.y, s.heading, s.steer, s.v,
            u.u1, u.u2, u.u3, u.u4, u.u5, u.u6, str(self.mode),
        ))

    def tick(self, command: Turning | Posture | ControlSignal) -> SensorFrame:
        if isinstance(command, ControlSignal):
            sig = command
            self.ctl.last = type(self.ctl.last)()
        else:
            frame = self.sim.frame
            if isinstance(command, Posture):
                frame = self._bridge(frame)
            sig = self.ctl.step(command, frame)
        frame = self.sim.advance(sig)
        self._record(sig)
        if self.sim.collided is not None:
            raise Stop("collision", self.sim.collided)
        if self.sim.t > self.cfg.run_limit + 1e-9:
            raise Stop("timeout", "run limit")
        return frame

    # -- phase primitives --------------------------------------------------

    def _deadline(self) -> float:
        return self.sim.t + self.cfg.phase_timeout

    def stop(self) -> None:
        deadline = self._deadline()
        while self.sim.state.v != 0.0:
            s = self.sim.state
            self.tick(ControlSignal(s.steer / self.sim.params.max_steer, 0.0, 1))
            if self.sim.t > deadline:
                raise Stop("timeout", "stop")

    def _reset_gamma(self) -> None:
        self.sim.state = replace(self.sim.state, gamma=0.0)
        self.sim.frame = replace(self.sim.frame, gamma=0.0)
        self.ctl.reset()

    def turn(self, beta: float, gear: int) -> None:
        """Closed-loop turn by ``beta`` degrees, then stop."""
        self._reset_gamma()
        cfg, deadline = self.cfg, self._deadline()
        mode = Turning(beta, gear)
        while True:
            f = self.sim.frame
            if abs(beta - f.gamma) <= cfg.turn_tolerance and abs(f.omega) <= cfg.omega_tolerance:
                break
            self.tick(mode)
            if self.sim.t > deadline:
                raise Stop("timeout", f"turn {beta:g}")
        self.stop()

    def straight(self, gear: int, done: Callable[[], bool], beta: float = 0.0) -> None:
        """Hold the current heading (plus ``beta``) until ``done()``, then stop."""
        self._reset_gamma()
        deadline = self._deadline()
        mode = Turning(beta, gear)
        while not done():
            self.tick(mode)
            if self.sim.t > deadline:
                raise Stop("timeout", "straight")
        self.stop()

    def follow(self, done: Callable[[], bool], gear: int = 1, limit: float | None = None) -> None:
        """Posture-stabilised wall following until ``done()``."""
        deadline = self.sim.t + (self.cfg.phase_timeout if limit is None else limit)
        mode = Posture(gear)
        while not done():
            self.tick(mode)
            if self.sim.t > deadline:
                raise Stop("timeout", "follow")


def search(driver: Driver, max_distance: float = 5000.0) -> SlotCandidate | None:
    """Wall-follow until a slot closes; returns the accepted candidate."""
    cfg = driver.cfg
    det = SlotDetector(cfg.safe_distance, cfg.depth_threshold, cfg.hysteresis)
    start = driver.lane()[0]
    found: list[SlotCandidate] = []

    def done() -> bool:
        slot = det.update(driver.sim.frame.d1, driver.emitter_along())
        if slot is not None:
            kind = select_mode(slot, driver.sim.params, cfg.margin, cfg.parallel_ratio)
            driver.enter(ModeKind.SLOT_FOUND, kind)
            if kind == "reject":
                driver.enter(ModeKind.SEARCHING)
            else:
                found.append(replace(slot, kind=kind))
                return True
        return driver.lane()[0] - start > max_distance

    driver.follow(done, limit=cfg.run_limit)
    driver.slot = found[0] if found else None
    return driver.slot


def _final_errors(driver: Driver, target_along: float, target_lateral: float,
                  target_heading: float) -> tuple[float, float]:
    s, p = driver.sim.state, driver.sim.params
    h = math.radians(s.heading)
    mid = p.length / 2 - p.rear_overhang
    along, lateral = driver.lane(s.x + mid * math.cos(h), s.y + mid * math.sin(h))
    herr = (driver.relative_heading() - target_heading + 180.0) % 360.0 - 180.0
    return abs(herr), math.hypot(along - target_along, lateral - target_lateral)


def run_maneuver(kind: str, driver: Driver, slot: SlotCandidate | None = None) -> ManeuverResult:
    """Park into ``slot`` (defaults to the one found by ``search``)."""
    slot = slot or driver.slot
    if slot is None:
        raise PreconditionError("no slot to park in")
    if kind not in ("parallel", "vertical"):
        raise ValueError(f"unknown maneuver {kind!r}")
    if driver.mode.kind != ModeKind.SLOT_FOUND:
        raise PreconditionError(f"cannot park from {driver.mode}")
    cfg, p = driver.cfg, driver.sim.params
    mk = ModeKind.PARALLEL if kind == "parallel" else ModeKind.VERTICAL
    t0 = driver.sim.t
    # row line (parked vehicles' near side) relative to the rear axle at lane level
    lat0 = driver.lane()[1]
    row = lat0 + slot.baseline + p.width / 2
    centre = slot.start_odometer + slot.length_along_wall / 2
    bottom = row + slot.depth - cfg.back_clearance
    mid = p.length / 2 - p.rear_overhang

    def along() -> float:
        return driver.lane()[0]

    def lateral() -> float:
        return driver.lane()[1]

    try:
        driver.enter(mk, "align")
        if kind == "vertical":
            start = centre + cfg.quarter_along
            driver.follow(lambda: along() >= start)
            driver.stop()
            driver.enter(mk, "reverse-turn")
            driver.turn(-90.0, -1)
            driver.enter(mk, "straighten")
            driver.turn(-90.0 - driver.relative_heading(), -1)
            driver.enter(mk, "reverse-to-depth")
            axle = bottom - p.rear_overhang
            driver.straight(-1, lambda: lateral() >= axle)
            target = (centre, axle - mid, -90.0)
        else:
            th = math.radians(cfg.parallel_angle)
            c, sn = math.cos(th), math.sin(th)
            a, l = cfg.turn_along, cfg.turn_lateral
            # the turn back out is the mirrored turn rotated by the entry angle
            out_along, out_lat = a * c + l * sn, a * sn - l * c
            slack = slot.length_along_wall - p.length
            behind = max(cfg.rear_clearance, cfg.rear_share * slack)
            axle_goal = slot.start_odometer + p.rear_overhang + behind
            # near side just inside the parked row, never past the back of the slot
            lat_goal = min(row + cfg.row_inset, bottom - p.width) + p.width / 2
            run = max(0.0, lat_goal - lat0 - l - out_lat) / sn
            start = axle_goal + a + out_along + run * c
            driver.follow(lambda: along() >= start)
            driver.stop()
            driver.enter(mk, "reverse-turn-in")
            driver.turn(-cfg.parallel_angle, -1)
            driver.enter(mk, "reverse-straight")
            driver.straight(-1, lambda: lateral() >= lat_goal - out_lat)
            driver.enter(mk, "reverse-turn-out")
            driver.turn(-driver.relative_heading(), -1)
            driver.enter(mk, "forward-adjust")
            goal = centre - mid
            if along() < goal:
                driver.straight(1, lambda: along() >= goal, -driver.relative_heading())
            target = (centre, lat_goal, 0.0)
        driver.enter(ModeKind.PARKED)
    except Stop as stop:
        driver.enter(ModeKind.FAILED, stop.detail if stop.outcome == "timeout" else "collision")
        return ManeuverResult(stop.outcome, driver.mode, driver.sim.t - t0,
                              driver.sim.collided, start_time=t0)
    herr, perr = _final_errors(driver, *target)
    return ManeuverResult("parked", driver.mode, driver.sim.t - t0, None, herr, perr, t0)


def run_exit(driver: Driver, predict: bool = True) -> ManeuverResult:
    """Leave the slot and resume wall following in the lane.

    With ``predict`` the exit is first rehearsed on a copy of the world;
    a rehearsal collision fails the run before the vehicle moves.
    """
    if driver.mode.kind != ModeKind.PARKED:
        raise PreconditionError(f"exit needs a parked vehicle, not {driver.mode}")
    if predict:
        ghost = copy.deepcopy(driver)
        ghost.samples, ghost.modes = [], []
        result = _exit(ghost)
        if result.collision is not None:
            driver.enter(ModeKind.EXITING, "check")
            driver.enter(ModeKind.FAILED, "collision-predicted")
            return ManeuverResult("collision-predicted", driver.mode, 0.0, result.collision,
                                  start_time=driver.sim.t)
    return _exit(driver)


def _exit(driver: Driver) -> ManeuverResult:
    cfg, p = driver.cfg, driver.sim.params
    t0 = driver.sim.t
    slot = driver.slot
    lat_lane = 0.0

    def along() -> float:
        return driver.lane()[0]

    def lateral() -> float:
        return driver.lane()[1]

    try:
        if abs(driver.relative_heading() + 90.0) < 45.0:
            driver.enter(ModeKind.EXITING, "forward-out")
            row = slot.baseline + p.width / 2 if slot else cfg.safe_distance + p.width / 2
            driver.straight(1, lambda: lateral() <= lat_lane + row - cfg.hysteresis)
            driver.enter(ModeKind.EXITING, "forward-turn")
            driver.turn(-driver.relative_heading(), 1)
        else:
            th = cfg.parallel_angle
            driver.enter(ModeKind.EXITING, "reverse-adjust")
            if slot is not None:
                back = slot.start_odometer + p.rear_overhang + cfg.rear_clearance
                if along() > back:
                    driver.straight(-1, lambda: along() <= back, -driver.relative_heading())
            driver.enter(ModeKind.EXITING, "forward-turn-out")
            driver.turn(-th, 1)
            driver.enter(ModeKind.EXITING, "forward-straight")
            r = math.radians(th)
            # lateral still to be covered by the turn back into the lane
            back_lat = cfg.turn_along * math.sin(r) - cfg.turn_lateral * math.cos(r)
            driver.straight(1, lambda: lateral() <= lat_lane + max(back_lat, 0.0))
            driver.enter(ModeKind.EXITING, "forward-turn-in")
            driver.turn(-driver.relative_heading(), 1)
        driver.enter(ModeKind.EXITING, "lane")
        start = along()

        def settled() -> bool:
            return (along() - start >= cfg.exit_distance
                    and abs(driver.relative_heading()) <= cfg.turn_tolerance
                    and abs(lateral() - lat_lane) <= 2 * cfg.hysteresis)

        driver.follow(settled)
        driver.stop()
        driver.enter(ModeKind.SEARCHING)
    except Stop as stop:
        driver.enter(ModeKind.FAILED, stop.detail if stop.outcome == "timeout" else "collision")
        return ManeuverResult(stop.outcome, driver.mode, driver.sim.t - t0,
                              driver.sim.collided, start_time=t0)
    herr = abs((driver.relative_heading() + 180.0) % 360.0 - 180.0)
    return ManeuverResult("lane", driver.mode, driver.sim.t - t0, None, herr, None, t0)
