import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adversim.engine import (AgentAction, Observation, ReplayAgent, RolloutResult,
                             SimConfig, detect_collision, raycast, reward, rollout,
                             step_bicycle)
from adversim.errors import OverrideError
from adversim.optimizer import AdversarialPlan
from adversim.scenario import (RoadGeometry, Scenario, Track, Vec2, VehicleState,
                               validate_scenario)

from conftest import build_scenario, make_track

CFG = SimConfig()


def test_straight_advance():
    s0 = VehicleState(Vec2(0, 0), 0.0, 10.0, 0.0)
    s1 = step_bicycle(s0, AgentAction(0.0, 0.0), CFG, 0.1)
    assert s1.position.x == pytest.approx(1.0, abs=1e-12)
    assert s1.position.y == pytest.approx(0.0, abs=1e-12)
    assert s1.speed == 10.0
    assert s1.heading == 0.0


def test_brake_at_zero_speed_stays_zero():
    s0 = VehicleState(Vec2(0, 0), 0.3, 0.0, 0.0)
    s1 = step_bicycle(s0, AgentAction(0.0, -1.0), CFG, 0.1)
    assert s1.speed == 0.0
    assert s1.position == s0.position
    assert s1.heading == s0.heading  # no yaw at zero speed


def test_inputs_clamped():
    s0 = VehicleState(Vec2(0, 0), 0.0, 5.0, 0.0)
    a = step_bicycle(s0, AgentAction(5.0, 5.0), CFG, 0.1)
    b = step_bicycle(s0, AgentAction(1.0, 1.0), CFG, 0.1)
    assert a == b


def test_constant_steer_turning_radius():
    # closed-form oracle: R = wheelbase / tan(steer * max_steer_angle)
    steer = 0.7
    expected_r = CFG.wheelbase / math.tan(steer * CFG.max_steer_angle)
    state = VehicleState(Vec2(0, 0), 0.0, 10.0, 0.0)
    pts = []
    for _ in range(100):
        state = step_bicycle(state, AgentAction(steer, 0.0), CFG, 0.1)
        pts.append((state.position.x, state.position.y))
    pts = np.array(pts)
    # after >= a half circle the max pairwise distance approximates 2R
    d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    r_est = d.max() / 2.0
    assert abs(r_est - expected_r) / expected_r < 0.02


def test_detect_collision_examples():
    a = VehicleState(Vec2(0, 0), 0.2, 5.0, 0.0)
    b = VehicleState(Vec2(0, 0), -1.0, 3.0, 0.0)
    assert detect_collision(a, (4.5, 2.0), b, (4.5, 2.0))
    c = VehicleState(Vec2(10, 0), 0.0, 3.0, 0.0)
    assert not detect_collision(a, (4.5, 2.0), c, (4.5, 2.0))


@settings(max_examples=150, deadline=None)
@given(st.floats(-8, 8), st.floats(-8, 8), st.floats(-math.pi, math.pi),
       st.floats(-8, 8), st.floats(-8, 8), st.floats(-math.pi, math.pi))
def test_detect_collision_symmetric(ax, ay, ah, bx, by, bh):
    a = VehicleState(Vec2(ax, ay), ah, 0.0, 0.0)
    b = VehicleState(Vec2(bx, by), bh, 0.0, 0.0)
    assert detect_collision(a, (4.5, 2.0), b, (4.5, 2.0)) == \
        detect_collision(b, (4.5, 2.0), a, (4.5, 2.0))


def _open_road():
    return RoadGeometry(
        lane_centerlines=((Vec2(-90, 0), Vec2(90, 0)),),
        drivable_area=(Vec2(-100, -100), Vec2(100, -100), Vec2(100, 100),
                       Vec2(-100, 100)),
        template="straight")


def test_raycast_empty_scene_capped():
    road = _open_road()
    ego = VehicleState(Vec2(0, 0), 0.0, 5.0, 0.0)
    rays = raycast(ego, [], road)
    assert len(rays) == 16
    assert all(r == pytest.approx(30.0) for r in rays)


def test_raycast_vehicle_dead_ahead():
    # hand geometry: sensor sits on the ego boundary, so the forward return is
    # 12 - 2.25 (own half length) - 2.25 (target half length) = 7.5
    road = _open_road()
    ego = VehicleState(Vec2(0, 0), 0.0, 5.0, 0.0)
    other = VehicleState(Vec2(12, 0), 0.0, 0.0, 0.0)
    rays = raycast(ego, [(other, (4.5, 2.0))], road, ego_dims=(4.5, 2.0))
    assert rays[0] == pytest.approx(12.0 - 4.5, abs=1e-9)


def test_raycast_frame_invariance():
    road = _open_road()
    ego = VehicleState(Vec2(3, -4), 0.4, 5.0, 0.0)
    others = [(VehicleState(Vec2(15, -2), 1.0, 2.0, 0.0), (4.5, 2.0))]
    base = raycast(ego, others, road, ego_dims=(4.5, 2.0))

    theta = 0.77

    def rot(x, y):
        c, s = math.cos(theta), math.sin(theta)
        return x * c - y * s, x * s + y * c

    def rot_state(st):
        x, y = rot(st.position.x, st.position.y)
        return VehicleState(Vec2(x, y), st.heading + theta, st.speed, st.accel)

    area = tuple(Vec2(*rot(p.x, p.y)) for p in road.drivable_area)
    lanes = (tuple(Vec2(*rot(p.x, p.y)) for p in road.lane_centerlines[0]),)
    road_r = RoadGeometry(lanes, area, "straight")
    rotated = raycast(rot_state(ego), [(rot_state(s), d) for s, d in others],
                      road_r, ego_dims=(4.5, 2.0))
    assert np.allclose(base, rotated, atol=1e-7)


def test_reward_values():
    route = (Vec2(0, 0), Vec2(100, 0))
    still = VehicleState(Vec2(5, 0), 0.0, 0.0, 0.0)
    assert reward(still, still, {}, route) == pytest.approx(0.0)
    prev = VehicleState(Vec2(5, 0), 0.0, 10.0, 0.0)
    cur = VehicleState(Vec2(7, 0), 0.0, 10.0, 0.0)
    assert reward(prev, cur, {}, route) == pytest.approx(2.1)
    with_crash = reward(prev, cur, {"collided": True}, route)
    assert with_crash == pytest.approx(2.1 - 10.0)
    finished = reward(prev, cur, {"finished": True}, route)
    assert finished == pytest.approx(2.1 + 10.0)
    off = reward(prev, cur, {"offroad": True}, route)
    assert off == pytest.approx(2.1 - 5.0)


def test_rollout_replay_deterministic(corpus30):
    s = corpus30.scenarios[0]
    a = rollout(s, ReplayAgent(), record_steps=True)
    b = rollout(s, ReplayAgent(), record_steps=True)
    assert a.to_jsonable() == b.to_jsonable()
    assert not a.collided


def test_rollout_total_return_matches_per_step(corpus30):
    for s in corpus30.scenarios[:5]:
        r = rollout(s, ReplayAgent(), record_steps=True)
        assert r.total_return == pytest.approx(
            sum(step[2] for step in r.per_step), abs=1e-12)


def test_forced_overlap_collides_at_step():
    s = build_scenario([(1, (40.0, 20.0), 0.0, 5.0)], horizon=30, attack_start=10)
    t = s.attack_start
    # teleport the attacker onto the ego's logged position from t+1 onward
    states = []
    for k in range(t, s.horizon_steps):
        tgt = s.ego.samples[min(k + 1, s.horizon_steps - 1)]
        states.append(tgt)
    plan = AdversarialPlan(selections={1: tuple(states)}, objectives={1: 1.0})
    r = rollout(s, ReplayAgent(), plan=plan)
    assert r.collided
    assert r.collision_step == t
    assert len(r.per_step) == r.collision_step


def test_rollout_truncates_at_collision(corpus30):
    s = build_scenario([(1, (40.0, 20.0), 0.0, 5.0)], horizon=30, attack_start=10)
    plan = AdversarialPlan(
        selections={1: tuple(s.ego.samples[s.attack_start:])}, objectives={1: 1.0})
    r = rollout(s, ReplayAgent(), plan=plan)
    assert r.collided
    assert len(r.per_step) == r.collision_step


def test_override_unknown_vehicle():
    s = build_scenario([(1, (40.0, 20.0), 0.0, 5.0)])
    plan = AdversarialPlan(selections={99: tuple(s.ego.samples[10:])},
                           objectives={99: 1.0})
    with pytest.raises(OverrideError):
        rollout(s, ReplayAgent(), plan=plan)


def _transform_scenario(s, theta, tx, ty):
    c, si = math.cos(theta), math.sin(theta)

    def rp(p):
        return Vec2(p.x * c - p.y * si + tx, p.x * si + p.y * c + ty)

    def rstate(st):
        from adversim.geometry import wrap_angle
        return VehicleState(rp(st.position), wrap_angle(st.heading + theta),
                            st.speed, st.accel)

    def rtrack(t):
        return Track(t.vehicle_id, tuple(rstate(x) for x in t.samples),
                     t.length, t.width)

    road = RoadGeometry(
        tuple(tuple(rp(p) for p in lane) for lane in s.road.lane_centerlines),
        tuple(rp(p) for p in s.road.drivable_area), s.road.template)
    return Scenario(id=s.id + "-rot", road=road, ego=rtrack(s.ego),
                    background=tuple(rtrack(t) for t in s.background),
                    route=tuple(rp(p) for p in s.route), dt=s.dt,
                    horizon_steps=s.horizon_steps, attack_start=s.attack_start)


def test_rigid_motion_invariance_replay(corpus30):
    for s in corpus30.scenarios[:4]:
        moved = _transform_scenario(s, 0.83, 41.0, -17.0)
        validate_scenario(moved)
        a = rollout(s, ReplayAgent(), record_steps=False)
        b = rollout(moved, ReplayAgent(), record_steps=False)
        assert a.collided == b.collided
        assert a.collision_step == b.collision_step
        assert a.route_completion == pytest.approx(b.route_completion, abs=1e-6)


class _ConstantAgent:
    def act(self, obs):
        return AgentAction(0.05, 0.2)


def test_rigid_motion_invariance_policy(corpus30):
    s = corpus30.scenarios[1]
    moved = _transform_scenario(s, -1.2, -8.0, 23.0)
    a = rollout(s, _ConstantAgent(), record_steps=False)
    b = rollout(moved, _ConstantAgent(), record_steps=False)
    assert a.collided == b.collided
    assert a.collision_step == b.collision_step
    assert a.route_completion == pytest.approx(b.route_completion, abs=1e-6)
