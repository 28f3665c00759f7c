import math

import numpy as np
import pytest

from adversim.corpus import generate_corpus
from adversim.scenario import (RoadGeometry, Scenario, Track, Vec2, VehicleState,
                               validate_scenario)


def make_track(vehicle_id, start, heading, speed, horizon, dt=0.1,
               length=4.5, width=2.0, accel=0.0):
    """Constant-velocity track; positions follow the kinematics exactly."""
    c, s = math.cos(heading), math.sin(heading)
    samples = []
    v = speed
    x, y = start
    for _ in range(horizon):
        samples.append(VehicleState(Vec2(x, y), heading, v, accel))
        v2 = max(0.0, v + accel * dt)
        step = 0.5 * (v + v2) * dt
        x += step * c
        y += step * s
        v = v2
    return Track(vehicle_id=vehicle_id, samples=tuple(samples),
                 length=length, width=width)


def build_scenario(bg_specs, ego_start=(0.0, 0.0), ego_heading=0.0,
                   ego_speed=10.0, horizon=30, attack_start=10, dt=0.1,
                   scenario_id="test-scn"):
    """Small hand-built scenario on a wide rectangular pad.

    ``bg_specs`` is a list of (vehicle_id, (x, y), heading, speed).
    """
    area = (Vec2(-200.0, -80.0), Vec2(400.0, -80.0),
            Vec2(400.0, 80.0), Vec2(-200.0, 80.0))
    c, s = math.cos(ego_heading), math.sin(ego_heading)
    route = tuple(Vec2(ego_start[0] + c * 10.0 * k, ego_start[1] + s * 10.0 * k)
                  for k in range(31))
    lanes = (route,)
    ego = make_track(0, ego_start, ego_heading, ego_speed, horizon, dt)
    background = tuple(make_track(vid, pos, h, v, horizon, dt)
                       for vid, pos, h, v in bg_specs)
    scenario = Scenario(id=scenario_id,
                        road=RoadGeometry(lanes, area, "straight"),
                        ego=ego, background=background, route=route,
                        dt=dt, horizon_steps=horizon, attack_start=attack_start)
    validate_scenario(scenario)
    return scenario


@pytest.fixture(scope="session")
def corpus30():
    return generate_corpus(11, 30)


@pytest.fixture(scope="session")
def corpus100():
    return generate_corpus(19, 100)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
