import json
import math
import os

import pytest

from adversim.errors import IoError, SchemaError, ValidationError
from adversim.scenario import (Scenario, Track, Vec2, VehicleState, load_scenario,
                               load_scenario_set, save_scenario, save_scenario_set,
                               scenario_from_dict, scenario_to_dict, state_at)

from conftest import build_scenario, make_track

MINIMAL = {
    "id": "mini",
    "dt": 0.1,
    "horizon_steps": 10,
    "attack_start": 2,
    "road": {
        "template": "straight",
        "drivable_area": [[-50, -5], [200, -5], [200, 5], [-50, 5]],
        "lanes": [[[-49, 0], [199, 0]]],
    },
    "route": [[0, 0], [100, 0]],
    "ego": {
        "vehicle_id": 0, "length": 4.5, "width": 2.0,
        "samples": [[k * 1.0, 0.0, 0.0, 10.0, 0.0] for k in range(10)],
    },
    "background": [{
        "vehicle_id": 1, "length": 4.5, "width": 2.0,
        "samples": [[30.0 + k * 0.5, 0.0, 0.0, 5.0, 0.0] for k in range(10)],
    }],
}


def _write(tmp_path, obj, name="s.json"):
    path = os.path.join(tmp_path, name)
    with open(path, "w") as fh:
        json.dump(obj, fh)
    return path


def test_minimal_two_vehicle_file(tmp_path):
    path = _write(str(tmp_path), MINIMAL)
    s = load_scenario(path)
    assert s.n_background == 1
    assert s.ego.samples[0].speed == 10.0
    assert s.road.template == "straight"


def test_attack_start_out_of_range_rejected(tmp_path):
    bad = json.loads(json.dumps(MINIMAL))
    bad["attack_start"] = 10
    path = _write(str(tmp_path), bad)
    with pytest.raises(ValidationError, match="attack_start"):
        load_scenario(path)


def test_missing_field_is_schema_error(tmp_path):
    bad = json.loads(json.dumps(MINIMAL))
    del bad["route"]
    with pytest.raises(SchemaError, match="route"):
        load_scenario(_write(str(tmp_path), bad))


def test_wrong_type_is_schema_error(tmp_path):
    bad = json.loads(json.dumps(MINIMAL))
    bad["horizon_steps"] = "ten"
    with pytest.raises(SchemaError, match="horizon_steps"):
        load_scenario(_write(str(tmp_path), bad))


def test_negative_speed_rejected(tmp_path):
    bad = json.loads(json.dumps(MINIMAL))
    bad["ego"]["samples"][3][3] = -1.0
    with pytest.raises(ValidationError, match="speed"):
        load_scenario(_write(str(tmp_path), bad))


def test_teleport_rejected(tmp_path):
    bad = json.loads(json.dumps(MINIMAL))
    bad["background"][0]["samples"][5][0] += 50.0
    with pytest.raises(ValidationError, match="jump"):
        load_scenario(_write(str(tmp_path), bad))


def test_duplicate_vehicle_id_rejected(tmp_path):
    bad = json.loads(json.dumps(MINIMAL))
    bad["background"].append(json.loads(json.dumps(bad["background"][0])))
    with pytest.raises(ValidationError, match="duplicate"):
        load_scenario(_write(str(tmp_path), bad))


def test_save_is_byte_stable(tmp_path, corpus30):
    s = corpus30.scenarios[0]
    p1 = tmp_path / "a.json"
    p2 = tmp_path / "b.json"
    save_scenario(s, str(p1))
    save_scenario(s, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_save_load_round_trip_100_random_scenarios(tmp_path, corpus100):
    # round-trip oracle: structural equality after a save/load cycle
    path = str(tmp_path / "s.json")
    for s in corpus100.scenarios:
        save_scenario(s, path)
        assert load_scenario(path) == s


def test_scenario_set_round_trip(tmp_path, corpus30):
    path = str(tmp_path / "set.json")
    save_scenario_set(corpus30, path)
    loaded = load_scenario_set(path)
    assert loaded == corpus30
    # byte stability of the set file too
    path2 = str(tmp_path / "set2.json")
    save_scenario_set(loaded, path2)
    assert open(path, "rb").read() == open(path2, "rb").read()


def test_unwritable_path_raises_io_error(corpus30):
    with pytest.raises(IoError):
        save_scenario(corpus30.scenarios[0], "/nonexistent-dir/x/y.json")


def test_state_at_bounds():
    track = make_track(1, (0, 0), 0.0, 5.0, 8)
    assert state_at(track, 0) == track.samples[0]
    with pytest.raises(IndexError):
        state_at(track, len(track.samples))
    with pytest.raises(IndexError):
        state_at(track, -1)


def test_state_at_linear_track_closed_form():
    # independent oracle: p_k = p0 + k*dt*v for a constant-velocity track
    v, dt = 8.0, 0.1
    track = make_track(1, (2.0, -3.0), 0.0, v, 12, dt=dt)
    for k in range(12):
        st = state_at(track, k)
        assert st.position.x == pytest.approx(2.0 + k * dt * v, abs=1e-9)
        assert st.position.y == pytest.approx(-3.0, abs=1e-12)


def test_heading_normalization_enforced():
    s = build_scenario([(1, (30.0, 0.0), 0.0, 5.0)])
    obj = scenario_to_dict(s)
    obj["background"][0]["samples"][0][2] = 4.0  # > pi
    with pytest.raises(ValidationError, match="heading"):
        scenario_from_dict(obj)
