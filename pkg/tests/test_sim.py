import math

import pytest

from hybridpark.sim import (
    PHYSICS_DT,
    ControlSignal,
    Rect,
    Simulation,
    VehicleParams,
    VehicleState,
    World,
    actuate,
    check_collision,
    mirror_state,
    mirror_world,
    sense,
    step,
    yaw_rate,
)

P = VehicleParams()
WALL = World((Rect.from_bounds(-3000, 70 + 150, 3000, 260, "wall"),))


def run(state, sig, n, params=P):
    out = [state]
    for _ in range(n):
        state = step(state, sig, params)
        out.append(state)
    return out


class TestActuation:
    def test_scaling(self):
        assert actuate(ControlSignal(0.5, 0.4, 1), P) == (22.5, 100.0)

    def test_reverse_force(self):
        assert actuate(ControlSignal(-1.0, 0.4, -1), P) == (-45.0, -100.0)

    def test_command_clamped(self):
        sig = ControlSignal(3.0, -1.0)
        assert (sig.steer_cmd, sig.duty) == (1.0, 0.0)

    def test_bad_gear(self):
        with pytest.raises(ValueError):
            ControlSignal(gear=0)

    def test_static_friction_holds(self):
        # 0.01 duty gives 2.5 N, below mu m g
        s = run(VehicleState(), ControlSignal(0.0, 0.01), 2000)[-1]
        assert s.v == 0.0 and s.x == 0.0


@pytest.mark.parametrize("kw", [dict(length=0), dict(wheelbase=400), dict(mu=2.0), dict(max_steer=60)])
def test_params_validated(kw):
    with pytest.raises(ValueError):
        VehicleParams(**kw)


class TestKinematics:
    def test_terminal_speed(self):
        s = run(VehicleState(), ControlSignal(0.0, 0.2), 5000)[-1]
        assert s.v == pytest.approx(P.terminal_speed(0.2), rel=5e-3)

    def test_circle_radius(self):
        steer = 30.0
        radius = P.wheelbase / math.tan(math.radians(steer))
        v = P.terminal_speed(0.2)
        states = run(VehicleState(v=v, steer=steer), ControlSignal(steer / 45, 0.2), 6000)
        for s in states[::50]:
            assert math.hypot(s.x, s.y - radius) == pytest.approx(radius, rel=1e-3)

    def test_coasting_speed_never_grows(self):
        states = run(VehicleState(v=300.0), ControlSignal(0.0, 0.0), 3000)
        speeds = [abs(s.v) for s in states]
        assert all(b <= a for a, b in zip(speeds, speeds[1:]))
        assert speeds[-1] == 0.0

    def test_gamma_is_integrated_yaw_rate(self):
        states = run(VehicleState(), ControlSignal(0.7, 0.3), 6000)
        total = sum(yaw_rate(s, P) * PHYSICS_DT for s in states[1:])
        assert states[-1].gamma == pytest.approx(total, abs=1e-9)
        assert states[-1].gamma > 360  # accumulates past a full turn

    def test_reverse_moves_backwards(self):
        s = run(VehicleState(), ControlSignal(0.0, 0.3, -1), 1000)[-1]
        assert s.v < 0 and s.x < 0


class TestSensing:
    def test_parallel_wall(self):
        f = sense(VehicleState(), WALL, P)
        assert f.d1 == pytest.approx(150.0, abs=1e-9)
        assert f.d2 == pytest.approx(150.0, abs=1e-9)
        assert f.x_e == pytest.approx(0.0, abs=1e-9)

    def test_yawed_towards_wall(self):
        f = sense(VehicleState(heading=5.0), WALL, P)
        assert f.x_e == pytest.approx(-17.5, abs=0.5)

    def test_saturates_without_obstacle(self):
        f = sense(VehicleState(), World(), P)
        assert f.d1 == f.d2 == f.x_d == 800.0

    def test_noise_is_seeded(self):
        a = Simulation(P, WALL, VehicleState(), noise=True, seed=4)
        b = Simulation(P, WALL, VehicleState(), noise=True, seed=4)
        assert a.frame == b.frame
        assert a.frame.d1 != 150.0 and abs(a.frame.d1 - 150.0) <= 2.0


class TestCollision:
    def test_touching_is_not_contact(self):
        # right flank sits at y = 70
        w = World((Rect.from_bounds(-100, 70, 100, 100, "box"),))
        assert check_collision(VehicleState(), P, w) == (False, None)

    def test_overlap_detected(self):
        w = World((Rect.from_bounds(-100, 70 - 1e-9, 100, 100, "box"),))
        assert check_collision(VehicleState(), P, w) == (True, "box")

    def test_run_freezes_on_contact(self):
        w = World((Rect.from_bounds(400, -200, 450, 200, "block"),))
        sim = Simulation(P, w, VehicleState())
        for _ in range(200):
            sim.advance(ControlSignal(0.0, 0.4))
        assert sim.collided == "block"
        frozen = sim.state
        sim.advance(ControlSignal(0.0, 0.4))
        assert sim.state == frozen


def _trace(world, state, cmds):
    sim = Simulation(P, world, state)
    out = []
    for c in cmds:
        sim.advance(c)
        out.append(sim.state)
    return out


CMDS = [ControlSignal(math.sin(i / 7), 0.3, 1 if i < 60 else -1) for i in range(120)]


def test_deterministic():
    assert _trace(WALL, VehicleState(), CMDS) == _trace(WALL, VehicleState(), CMDS)


def test_mirror_symmetry():
    start = VehicleState(x=10.0, y=-30.0, heading=8.0)
    a = _trace(WALL, start, CMDS)
    mirrored = [ControlSignal(-c.steer_cmd, c.duty, c.gear) for c in CMDS]
    b = _trace(mirror_world(WALL), mirror_state(start), mirrored)
    for s, m in zip(a, b):
        assert m.x == pytest.approx(s.x, abs=1e-9)
        assert m.y == pytest.approx(-s.y, abs=1e-9)
        assert m.heading == pytest.approx(-s.heading, abs=1e-9)
        assert m.v == pytest.approx(s.v, abs=1e-9)
