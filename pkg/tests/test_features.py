import math

import pytest

from adversim.features import FEATURE_NAMES, extract_features

from conftest import build_scenario
from test_engine import _transform_scenario


def test_closed_form_stationary_target():
    # ego at origin heading +x at 10 m/s, stationary vehicle 30 m ahead facing
    # the ego: closing = 10, ttc = 3, alignment = 1
    s = build_scenario([(1, (30.0, 0.0), math.pi, 0.0)],
                       ego_start=(-1.0, 0.0), ego_speed=10.0,
                       horizon=30, attack_start=1)
    # at attack_start=1 the ego has moved 1 m to x=0
    fv = extract_features(s)[1]
    assert fv.dist == pytest.approx(30.0, abs=1e-9)
    assert fv.closing_speed == pytest.approx(10.0, abs=1e-9)
    assert fv.ttc == pytest.approx(3.0, abs=1e-9)
    assert fv.heading_align == pytest.approx(1.0, abs=1e-12)
    assert fv.ahead == pytest.approx(30.0, abs=1e-9)
    assert fv.lateral_offset == pytest.approx(0.0, abs=1e-9)
    assert fv.speed == 0.0
    assert fv.path_cross == 1.0  # sits on the ego route


def test_receding_vehicle_ttc_capped():
    s = build_scenario([(1, (30.0, 0.0), 0.0, 20.0)], ego_speed=10.0)
    fv = extract_features(s)[1]
    assert fv.ttc == 99.0
    assert fv.closing_speed < 0


def test_slow_closing_uses_cap_threshold():
    # closing barely above/below the 0.1 m/s threshold
    s_below = build_scenario([(1, (30.0, 0.0), 0.0, 9.95)], ego_speed=10.0)
    assert extract_features(s_below)[1].ttc == 99.0
    s_above = build_scenario([(1, (30.0, 0.0), 0.0, 9.0)], ego_speed=10.0)
    fv = extract_features(s_above)[1]
    assert fv.ttc < 99.0
    assert fv.ttc > 0.0


def test_far_lateral_vehicle_no_path_cross():
    s = build_scenario([(1, (30.0, 60.0), 0.0, 5.0)], ego_speed=10.0)
    fv = extract_features(s)[1]
    assert fv.path_cross == 0.0
    assert fv.lateral_offset == pytest.approx(60.0, abs=1e-9)


def test_min_dist_uses_history():
    # vehicle recedes: the smallest gap happened at step 0
    s = build_scenario([(1, (20.0, 0.0), 0.0, 15.0)], ego_speed=10.0,
                       attack_start=10)
    fv = extract_features(s)[1]
    assert fv.min_dist == pytest.approx(20.0, abs=1e-6)
    assert fv.dist > fv.min_dist


def test_rotation_invariance_of_relative_features(corpus30):
    s = corpus30.scenarios[2]
    moved = _transform_scenario(s, 1.1, 12.0, -9.0)
    base = extract_features(s)
    rot = extract_features(moved)
    for vid in base:
        for name in ("dist", "min_dist", "rel_speed", "closing_speed", "ttc",
                     "heading_align", "speed", "path_cross"):
            assert getattr(base[vid], name) == pytest.approx(
                getattr(rot[vid], name), abs=1e-6), (vid, name)


def test_all_features_finite(corpus30):
    for s in corpus30.scenarios:
        for fv in extract_features(s).values():
            for name in FEATURE_NAMES:
                assert math.isfinite(getattr(fv, name)), name
            assert 0 < fv.ttc <= 99.0
            assert -1.0 <= fv.heading_align <= 1.0
