"""Base and supervisory fuzzy controllers and their hybrid composition.

Sign conventions: clockwise is positive.  The angle error is
``e = beta - gamma`` (set angle minus accumulated angle), so a clockwise
turn starts with ``e > 0`` and the base steering output ``u1`` is positive.
Steering outputs are rotation commands; when the vehicle reverses the servo
command is negated so the body still rotates the commanded way.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .dsl import ControllerSpec, parse
from .fuzzy import infer
from .sim import ControlSignal, SensorFrame

RATIO_LIMIT = 1.5
EPS = 1e-6
NAMES = ("bfc_steering", "sfc_steering", "bfc_speed", "sfc_speed", "bfc_posture", "sfc_posture")


class DegenerateDenominator(ArithmeticError):
    pass


@dataclass(frozen=True)
class NormalizedRatio:
    value: float
    k: float
    degenerate: bool = False


def normalize_ratio(numerator: float, denominator: float, k: float, eps: float = EPS) -> NormalizedRatio:
    """``k * numerator / denominator - 1``, clamped to [-1.5, 1.5].

    A denominator within ``eps`` of zero yields 0 (nominal) with
    ``degenerate`` set.
    """
    if abs(denominator) <= eps:
        return NormalizedRatio(0.0, k, degenerate=True)
    value = k * numerator / denominator - 1.0
    return NormalizedRatio(min(RATIO_LIMIT, max(-RATIO_LIMIT, value)), k)


@dataclass(frozen=True)
class AngleError:
    e: float
    e_dot: float = 0.0


@dataclass(frozen=True)
class PostureInputs:
    x_d: float
    x_e: float


@dataclass(frozen=True)
class TurningSetpoint:
    beta: float

    def __post_init__(self) -> None:
        if abs(self.beta) > 180:
            raise ValueError("turn set point must lie within +/-180 degrees")


@dataclass(frozen=True)
class Turning:
    beta: float
    gear: int = 1


@dataclass(frozen=True)
class Posture:
    gear: int = 1


@dataclass
class ControllerSet:
    """The six controllers, loaded from ``.fzc`` definitions."""

    specs: dict[str, ControllerSpec]

    @classmethod
    def load(cls, directory: str | Path | None = None) -> ControllerSet:
        specs = {}
        for name in NAMES:
            if directory is None:
                text = resources.files("hybridpark.rules").joinpath(f"{name}.fzc").read_text()
            else:
                text = (Path(directory) / f"{name}.fzc").read_text()
            specs[name] = parse(text)
        out = cls(specs)
        out.check_supervisory_gains()
        return out

    def __getitem__(self, name: str) -> ControllerSpec:
        return self.specs[name]

    def run(self, name: str, **inputs: float) -> float:
        spec = self.specs[name]
        return spec.output_gain * infer(spec.rule_base, inputs)

    def check_supervisory_gains(self, limit: float = 0.15) -> None:
        """Each supervisory output must stay within ``limit`` of its base output range."""
        for base, sup in (("bfc_steering", "sfc_steering"), ("bfc_speed", "sfc_speed"),
                          ("bfc_posture", "sfc_posture")):
            b, s = self.specs[base], self.specs[sup]
            if s.kind != "supervisory" or b.kind != "base":
                raise ValueError(f"{sup} must be supervisory over base {base}")
            b_lo, b_hi = b.rule_base.output.universe
            s_lo, s_hi = s.rule_base.output.universe
            base_range = b.output_gain * max(abs(b_lo), abs(b_hi))
            sup_range = s.output_gain * max(abs(s_lo), abs(s_hi))
            if sup_range > limit * base_range + 1e-12:
                raise ValueError(
                    f"{sup} can reach {sup_range:g}, more than {limit:g} of {base} ({base_range:g})"
                )

    # -- the six controllers ------------------------------------------------

    def bfc_steering(self, err: AngleError) -> float:
        return self.run("bfc_steering", e=err.e, e_dot=err.e_dot)

    def sfc_steering(self, err: AngleError, r1: NormalizedRatio) -> float:
        return self.run("sfc_steering", e=err.e, r1=r1.value)

    def bfc_speed(self, err: AngleError, floor: float = 0.05) -> float:
        """Duty cycle; never below ``floor`` so a turn always finishes."""
        return max(self.run("bfc_speed", abs_e=abs(err.e), abs_e_dot=abs(err.e_dot)), floor)

    def sfc_speed(self, r2: NormalizedRatio, a: float) -> float:
        return self.run("sfc_speed", r2=r2.value, a=a)

    def bfc_posture(self, p: PostureInputs) -> float:
        return self.run("bfc_posture", x_d=p.x_d, x_e=p.x_e)

    def sfc_posture(self, x_e: float, r3: NormalizedRatio) -> float:
        return self.run("sfc_posture", x_e=x_e, r3=r3.value)


@dataclass(frozen=True)
class HFCConfig:
    k1: float = 1.0 / 450.0
    k2: float = 1.0 / 1250.0
    k3: float = 1.0 / 450.0
    supervisory: bool = True
    safe_distance: float = 150.0
    control_period: float = 0.02
    duty_floor: float = 0.05
    cruise_duty: float = 0.08
    # nominal safe distance the shipped posture table is centred on
    posture_centre: float = 150.0
    # moving-average window on the speed and acceleration seen by the speed
    # supervisor; the drive responds well inside one control period
    speed_window: int = 4


@dataclass(frozen=True)
class Signals:
    """Every controller output of one step, for logging."""

    u1: float = 0.0
    u2: float = 0.0
    u3: float = 0.0
    u4: float = 0.0
    u5: float = 0.0
    u6: float = 0.0
    r1: float = 0.0
    r2: float = 0.0
    r3: float = 0.0
    e: float = 0.0
    e_dot: float = 0.0
    degenerate: bool = False


def _clamp(x: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, x))


@dataclass
class HybridController:
    """Stateful wrapper: holds the e_dot filter for one simulation loop."""

    config: HFCConfig = field(default_factory=HFCConfig)
    controllers: ControllerSet = field(default_factory=ControllerSet.load)

    def __post_init__(self) -> None:
        self._last_e: float | None = None
        self._diffs: deque[float] = deque(maxlen=3)
        self._speed: deque[float] = deque(maxlen=self.config.speed_window)
        self._accel: deque[float] = deque(maxlen=self.config.speed_window)
        self.last = Signals()

    def reset(self) -> None:
        """Forget the derivative history (call at every phase boundary)."""
        self._last_e = None
        self._diffs.clear()
        self._speed.clear()
        self._accel.clear()

    def _e_dot(self, e: float) -> float:
        if self._last_e is not None:
            self._diffs.append((e - self._last_e) / self.config.control_period)
        self._last_e = e
        return sum(self._diffs) / len(self._diffs) if self._diffs else 0.0

    def step(self, mode: Turning | Posture, frame: SensorFrame) -> ControlSignal:
        cfg, c = self.config, self.controllers
        omega = math.radians(frame.omega)
        if isinstance(mode, Turning):
            e = mode.beta - frame.gamma
            err = AngleError(e, self._e_dot(e))
            u1 = c.bfc_steering(err)
            u3 = c.bfc_speed(err, cfg.duty_floor)
            u2 = u4 = 0.0
            r1 = r2 = None
            if cfg.supervisory:
                r1 = normalize_ratio(abs(frame.v), abs(omega), cfg.k1)
                self._speed.append(abs(frame.v))
                self._accel.append(mode.gear * frame.a)
                r2 = normalize_ratio(sum(self._speed) / len(self._speed), u3, cfg.k2)
                if not r1.degenerate:
                    u2 = c.sfc_steering(err, r1)
                if not r2.degenerate:
                    u4 = c.sfc_speed(r2, sum(self._accel) / len(self._accel))
            if cfg.supervisory:
                u1s, u3s = u1 + u2, u3 + u4
            else:
                u1s, u3s = u1, u3
            steer = mode.gear * _clamp(u1s, -1.0, 1.0)
            duty = _clamp(u3s, 0.0, 1.0)
            self.last = Signals(
                u1=u1, u2=u2, u3=u3, u4=u4, e=err.e, e_dot=err.e_dot,
                r1=r1.value if r1 else 0.0, r2=r2.value if r2 else 0.0,
                degenerate=bool((r1 and r1.degenerate) or (r2 and r2.degenerate)),
            )
            return ControlSignal(steer, duty, mode.gear)

        # posture stabilisation: the table is centred on its nominal distance
        x_d = frame.x_d - cfg.safe_distance + cfg.posture_centre
        u5 = c.bfc_posture(PostureInputs(x_d, frame.x_e))
        u6 = 0.0
        r3 = None
        if cfg.supervisory:
            r3 = normalize_ratio(abs(frame.v), abs(omega), cfg.k3)
            if not r3.degenerate:
                u6 = c.sfc_posture(frame.x_e, r3)
        steer = mode.gear * _clamp(u5 + u6 if cfg.supervisory else u5, -1.0, 1.0)
        self.last = Signals(u5=u5, u6=u6, r3=r3.value if r3 else 0.0,
                            degenerate=bool(r3 and r3.degenerate))
        return ControlSignal(steer, cfg.cruise_duty, mode.gear)


@dataclass
class BaseController:
    """The base-only pipeline (FBOS): u1, u3 and u5 with no supervision."""

    config: HFCConfig = field(default_factory=HFCConfig)
    controllers: ControllerSet = field(default_factory=ControllerSet.load)

    def __post_init__(self) -> None:
        self._last_e: float | None = None
        self._diffs: deque[float] = deque(maxlen=3)
        self.last = Signals()

    def reset(self) -> None:
        self._last_e = None
        self._diffs.clear()

    def step(self, mode: Turning | Posture, frame: SensorFrame) -> ControlSignal:
        cfg, c = self.config, self.controllers
        if isinstance(mode, Turning):
            e = mode.beta - frame.gamma
            if self._last_e is not None:
                self._diffs.append((e - self._last_e) / cfg.control_period)
            self._last_e = e
            e_dot = sum(self._diffs) / len(self._diffs) if self._diffs else 0.0
            err = AngleError(e, e_dot)
            u1 = c.bfc_steering(err)
            u3 = c.bfc_speed(err, cfg.duty_floor)
            self.last = Signals(u1=u1, u3=u3, e=e, e_dot=e_dot)
            return ControlSignal(mode.gear * _clamp(u1, -1.0, 1.0), _clamp(u3, 0.0, 1.0), mode.gear)
        x_d = frame.x_d - cfg.safe_distance + cfg.posture_centre
        u5 = c.bfc_posture(PostureInputs(x_d, frame.x_e))
        self.last = Signals(u5=u5)
        return ControlSignal(mode.gear * _clamp(u5, -1.0, 1.0), cfg.cruise_duty, mode.gear)


def hfc_step(
    mode: Turning | Posture, frame: SensorFrame, controller: HybridController
) -> ControlSignal:
    return controller.step(mode, frame)
