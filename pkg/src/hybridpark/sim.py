"""Fixed-step 2-D vehicle simulation.

World coordinates are screen-style: x to the right, y *down*, headings in
degrees measured clockwise from +x.  A positive steering angle therefore
turns the vehicle clockwise when it drives forward, and the accumulated
angle ``gamma`` grows for clockwise rotation.  Lengths are in mm.

The plant is a kinematic bicycle (reference point: rear-axle midpoint) with
first-order longitudinal dynamics::

    m dv/dt = F_drive - drag * v - mu * m * g * sign(v)

integrated by semi-implicit Euler at a 1 ms substep.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

G = 9.81  # m/s^2
PHYSICS_DT = 0.001
MAX_RANGE = 800.0


@dataclass(frozen=True)
class VehicleParams:
    length: float = 320.0
    width: float = 140.0
    wheelbase: float = 200.0
    rear_overhang: float | None = None
    # right-side emitters, body-frame x measured from the rear axle
    d1_x: float | None = None
    d2_x: float | None = None
    mass: float = 1.0
    mu: float = 0.3
    max_steer: float = 45.0
    motor_force_max: float = 250.0
    drag: float = 0.15
    servo_rate: float = 200.0
    max_range: float = MAX_RANGE

    def __post_init__(self) -> None:
        if self.length <= 0 or self.width <= 0:
            raise ValueError("length and width must be positive")
        if not 0 < self.wheelbase < self.length:
            raise ValueError("wheelbase must be positive and shorter than the body")
        if not 0 <= self.mu <= 1.2:
            raise ValueError("mu must lie in [0, 1.2]")
        if not 0 < self.max_steer <= 45:
            raise ValueError("max_steer must lie in (0, 45] degrees")
        if self.mass <= 0 or self.drag <= 0 or self.motor_force_max <= 0:
            raise ValueError("mass, drag and motor_force_max must be positive")
        if self.rear_overhang is None:
            object.__setattr__(self, "rear_overhang", (self.length - self.wheelbase) / 2)
        if self.d1_x is None or self.d2_x is None:
            # emitters straddle the body centre, 5/8 of the length apart
            mid = self.length / 2 - self.rear_overhang
            half = 0.3125 * self.length
            if self.d1_x is None:
                object.__setattr__(self, "d1_x", mid + half)
            if self.d2_x is None:
                object.__setattr__(self, "d2_x", mid - half)

    @property
    def front_x(self) -> float:
        return self.length - self.rear_overhang

    @property
    def friction_force(self) -> float:
        return self.mu * self.mass * G

    def terminal_speed(self, duty: float) -> float:
        """Steady straight-line speed for a constant forward duty (mm/s)."""
        return max(0.0, duty * self.motor_force_max - self.friction_force) / self.drag


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    gamma: float = 0.0
    v: float = 0.0
    steer: float = 0.0
    t: float = 0.0


@dataclass(frozen=True)
class ControlSignal:
    """Actuator command for one control period.

    ``steer_cmd`` in [-1, 1] scales the maximum steering angle, ``duty`` in
    [0, 1] the motor force, and ``gear`` (+1 forward, -1 reverse) its sign.
    """

    steer_cmd: float = 0.0
    duty: float = 0.0
    gear: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "steer_cmd", min(1.0, max(-1.0, float(self.steer_cmd))))
        object.__setattr__(self, "duty", min(1.0, max(0.0, float(self.duty))))
        if self.gear not in (1, -1):
            raise ValueError("gear must be +1 or -1")


@dataclass(frozen=True)
class SensorFrame:
    v: float = 0.0
    omega: float = 0.0
    a: float = 0.0
    gamma: float = 0.0
    d1: float = MAX_RANGE
    d2: float = MAX_RANGE
    x_d: float = MAX_RANGE
    t: float = 0.0

    @property
    def x_e(self) -> float:
        return self.d1 - self.d2


@dataclass(frozen=True)
class Rect:
    """Rectangle given by centre, full length along its own x axis, width and rotation."""

    cx: float
    cy: float
    length: float
    width: float
    angle: float = 0.0
    name: str = ""

    def __post_init__(self) -> None:
        if self.length <= 0 or self.width <= 0:
            raise ValueError(f"obstacle {self.name!r} must have positive area")

    @classmethod
    def from_bounds(cls, x0: float, y0: float, x1: float, y1: float, name: str = "") -> Rect:
        return cls((x0 + x1) / 2, (y0 + y1) / 2, abs(x1 - x0), abs(y1 - y0), 0.0, name)

    def corners(self) -> list[tuple[float, float]]:
        c, s = math.cos(math.radians(self.angle)), math.sin(math.radians(self.angle))
        hl, hw = self.length / 2, self.width / 2
        return [
            (self.cx + c * dx - s * dy, self.cy + s * dx + c * dy)
            for dx, dy in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw))
        ]


@dataclass(frozen=True)
class World:
    obstacles: tuple[Rect, ...] = ()
    slots: tuple[Rect, ...] = field(default=())


def actuate(sig: ControlSignal, params: VehicleParams) -> tuple[float, float]:
    """Steering target (deg) and signed drive force (N) for a command."""
    return sig.steer_cmd * params.max_steer, sig.gear * sig.duty * params.motor_force_max


def step(
    state: VehicleState, sig: ControlSignal, params: VehicleParams, dt: float = PHYSICS_DT
) -> VehicleState:
    steer_target, force = actuate(sig, params)

    slew = params.servo_rate * dt
    steer = state.steer + min(slew, max(-slew, steer_target - state.steer))
    steer = min(params.max_steer, max(-params.max_steer, steer))

    fric = params.friction_force
    v = state.v
    if v == 0.0:
        if abs(force) > fric:
            net = force - math.copysign(fric, force)
            v = net / params.mass * 1000.0 * dt
    else:
        net = force - params.drag * v - math.copysign(fric, v)
        v_new = v + net / params.mass * 1000.0 * dt
        # friction can stop the car but never push it backwards
        v = 0.0 if v_new * v < 0.0 and abs(force) <= fric else v_new

    dpsi = math.degrees(v * math.tan(math.radians(steer)) / params.wheelbase * dt)
    mid = math.radians(state.heading + dpsi / 2)
    return VehicleState(
        x=state.x + v * math.cos(mid) * dt,
        y=state.y + v * math.sin(mid) * dt,
        heading=state.heading + dpsi,
        gamma=state.gamma + dpsi,
        v=v,
        steer=steer,
        t=state.t + dt,
    )


def yaw_rate(state: VehicleState, params: VehicleParams) -> float:
    return math.degrees(state.v * math.tan(math.radians(state.steer)) / params.wheelbase)


def _body_to_world(state: VehicleState, bx: float, by: float) -> tuple[float, float]:
    h = math.radians(state.heading)
    c, s = math.cos(h), math.sin(h)
    return state.x + c * bx - s * by, state.y + s * bx + c * by


def footprint(state: VehicleState, params: VehicleParams) -> Rect:
    mid = params.length / 2 - params.rear_overhang
    cx, cy = _body_to_world(state, mid, 0.0)
    return Rect(cx, cy, params.length, params.width, state.heading, "vehicle")


def emitters(state: VehicleState, params: VehicleParams) -> dict[str, tuple[float, float]]:
    half = params.width / 2
    return {
        "d1": _body_to_world(state, params.d1_x, half),
        "d2": _body_to_world(state, params.d2_x, half),
        "x_d": _body_to_world(state, params.front_x, half),
    }


def raycast(
    origin: tuple[float, float], direction: tuple[float, float], rect: Rect
) -> float:
    """Distance along a unit ray to a rectangle (inf if missed)."""
    a = math.radians(rect.angle)
    c, s = math.cos(a), math.sin(a)
    ox, oy = origin[0] - rect.cx, origin[1] - rect.cy
    px, py = c * ox + s * oy, -s * ox + c * oy
    dx, dy = c * direction[0] + s * direction[1], -s * direction[0] + c * direction[1]
    tmin, tmax = -math.inf, math.inf
    for p, d, half in ((px, dx, rect.length / 2), (py, dy, rect.width / 2)):
        if abs(d) < 1e-15:
            if abs(p) > half:
                return math.inf
            continue
        t0, t1 = (-half - p) / d, (half - p) / d
        if t0 > t1:
            t0, t1 = t1, t0
        tmin, tmax = max(tmin, t0), min(tmax, t1)
        if tmin > tmax:
            return math.inf
    if tmax < 0:
        return math.inf
    return max(tmin, 0.0)


def range_reading(
    origin: tuple[float, float], direction: tuple[float, float], world: World, max_range: float
) -> float:
    best = max_range
    for rect in world.obstacles:
        best = min(best, raycast(origin, direction, rect))
    return best


def sense(
    state: VehicleState,
    world: World,
    params: VehicleParams,
    prev_frame: SensorFrame | None = None,
    dt_control: float = 0.02,
    rng: random.Random | None = None,
    noise: float = 2.0,
) -> SensorFrame:
    """Sample the IMU and the three right-side infrared rangers.

    All three rays point perpendicular to the right flank; ``x_d`` is
    emitted from the front-right corner.  Pass ``rng`` to add uniform noise
    of +/- ``noise`` mm to the ranges.
    """
    h = math.radians(state.heading)
    right = (-math.sin(h), math.cos(h))
    ranges = {}
    for key, origin in emitters(state, params).items():
        r = range_reading(origin, right, world, params.max_range)
        if rng is not None:
            r += rng.uniform(-noise, noise)
        ranges[key] = min(max(r, 0.0), params.max_range)
    a = 0.0 if prev_frame is None else (state.v - prev_frame.v) / dt_control
    return SensorFrame(
        v=state.v,
        omega=yaw_rate(state, params),
        a=a,
        gamma=state.gamma,
        d1=ranges["d1"],
        d2=ranges["d2"],
        x_d=ranges["x_d"],
        t=state.t,
    )


def _axes(rect: Rect) -> list[tuple[float, float]]:
    a = math.radians(rect.angle)
    return [(math.cos(a), math.sin(a)), (-math.sin(a), math.cos(a))]


def overlaps(r1: Rect, r2: Rect) -> bool:
    """Strict separating-axis overlap test; touching edges do not overlap."""
    c1, c2 = r1.corners(), r2.corners()
    for ax, ay in _axes(r1) + _axes(r2):
        p1 = [ax * x + ay * y for x, y in c1]
        p2 = [ax * x + ay * y for x, y in c2]
        if max(p1) <= min(p2) or max(p2) <= min(p1):
            return False
    return True


def check_collision(
    state: VehicleState, params: VehicleParams, world: World
) -> tuple[bool, str | None]:
    body = footprint(state, params)
    for i, rect in enumerate(world.obstacles):
        if overlaps(body, rect):
            return True, rect.name or f"obstacle{i}"
    return False, None


def mirror_state(state: VehicleState) -> VehicleState:
    """Reflect a state about the x axis."""
    return replace(state, y=-state.y, heading=-state.heading, gamma=-state.gamma, steer=-state.steer)


def mirror_world(world: World) -> World:
    flip = lambda r: replace(r, cy=-r.cy, angle=-r.angle)  # noqa: E731
    return World(tuple(flip(r) for r in world.obstacles), tuple(flip(r) for r in world.slots))


def _radius(rect: Rect) -> float:
    return math.hypot(rect.length, rect.width) / 2


class Simulation:
    """Lock-step driver: one ``advance`` call is one control period.

    Collisions are checked at every physics substep; the first contact
    freezes the run (``collided`` holds the obstacle name).
    """

    def __init__(
        self,
        params: VehicleParams,
        world: World,
        state: VehicleState,
        control_period: float = 0.02,
        noise: bool = False,
        seed: int = 0,
    ) -> None:
        self.params = params
        self.world = world
        self.state = state
        self.substeps = max(1, round(control_period / PHYSICS_DT))
        self.control_period = self.substeps * PHYSICS_DT
        self.rng = random.Random(seed) if noise else None
        self.tick = 0
        self.odometer = 0.0
        self.collided: str | None = None
        self._bounds = [(r, _radius(r)) for r in world.obstacles]
        self._body_radius = math.hypot(params.length, params.width) / 2
        self.frame = sense(state, world, params, None, self.control_period, self.rng)

    @property
    def t(self) -> float:
        return self.tick * self.control_period

    def collision(self, state: VehicleState | None = None) -> str | None:
        body = footprint(state or self.state, self.params)
        for i, (rect, rad) in enumerate(self._bounds):
            if math.hypot(body.cx - rect.cx, body.cy - rect.cy) >= rad + self._body_radius:
                continue
            if overlaps(body, rect):
                return rect.name or f"obstacle{i}"
        return None

    def advance(self, sig: ControlSignal) -> SensorFrame:
        if self.collided is not None:
            return self.frame
        state = self.state
        for _ in range(self.substeps):
            prev = state
            state = step(state, sig, self.params)
            self.odometer += math.hypot(state.x - prev.x, state.y - prev.y)
            hit = self.collision(state)
            if hit is not None:
                self.collided = hit
                break
        self.state = state
        self.tick += 1
        self.frame = sense(state, self.world, self.params, self.frame, self.control_period, self.rng)
        return self.frame
