import math

import numpy as np
import pytest

from adversim.dsl import parse_program
from adversim.errors import TooFewVehicles
from adversim.features import extract_features
from adversim.identify import (KineticFieldMethod, MinTTCMethod, ProgramMethod,
                               RandomMethod, identify, kinetic_field_score)

from conftest import build_scenario
from test_dsl import make_fv


def test_single_vehicle_forced():
    s = build_scenario([(1, (30.0, 0.0), 0.0, 5.0)])
    for method in (RandomMethod(3), MinTTCMethod(), KineticFieldMethod(),
                   ProgramMethod(parse_program("dist"))):
        assert identify(s, method, 1) == [1]


def test_too_few_vehicles():
    s = build_scenario([(1, (30.0, 0.0), 0.0, 5.0)])
    with pytest.raises(TooFewVehicles):
        identify(s, MinTTCMethod(), 2)
    with pytest.raises(TooFewVehicles):
        identify(s, MinTTCMethod(), 0)


def test_min_ttc_ordering_by_hand():
    s = build_scenario([(5, (30.0, 0.0), 0.0, 5.0), (2, (70.0, 0.0), 0.0, 5.0)])
    features = {5: make_fv(ttc=3.0), 2: make_fv(ttc=7.0)}
    assert identify(s, MinTTCMethod(), 1, features=features) == [5]
    assert identify(s, MinTTCMethod(), 2, features=features) == [5, 2]


def test_tie_breaks_by_ascending_id():
    s = build_scenario([(5, (30.0, 0.0), 0.0, 5.0), (2, (70.0, 0.0), 0.0, 5.0)])
    same = {5: make_fv(), 2: make_fv()}
    assert identify(s, MinTTCMethod(), 2, features=same) == [2, 5]
    assert identify(s, KineticFieldMethod(), 2, features=same) == [2, 5]
    assert identify(s, ProgramMethod(parse_program("dist")), 2,
                    features=same) == [2, 5]


def test_random_is_deterministic_and_prefix_stable():
    s = build_scenario([(i, (30.0 + 10 * i, 10.0), 0.0, 5.0) for i in range(1, 7)])
    a = identify(s, RandomMethod(9), 3)
    b = identify(s, RandomMethod(9), 3)
    assert a == b
    # the n=1 choice is the prefix of the n=3 choice
    assert identify(s, RandomMethod(9), 1) == a[:1]
    assert identify(s, RandomMethod(10), 3) != a or \
        identify(s, RandomMethod(11), 3) != a


def test_program_affine_invariance(corpus30):
    # argmax invariance: a*p + b with a > 0 selects identically
    base = parse_program("1.0/max(ttc, 0.5) + 0.5*path_cross")
    scaled = parse_program("3.0*(1.0/max(ttc, 0.5) + 0.5*path_cross) + 7.0")
    for s in corpus30.scenarios[:12]:
        feats = extract_features(s)
        n = min(2, s.n_background)
        assert identify(s, ProgramMethod(base), n, features=feats) == \
            identify(s, ProgramMethod(scaled), n, features=feats)


def test_program_simple_affine_forms(corpus30):
    a = parse_program("dist")
    b = parse_program("2.0*dist + 10.0")
    for s in corpus30.scenarios[:12]:
        feats = extract_features(s)
        assert identify(s, ProgramMethod(a), 1, features=feats) == \
            identify(s, ProgramMethod(b), 1, features=feats)


def test_kinetic_field_values():
    fv = make_fv(dist=10.0, speed=10.0, heading_align=1.0)
    assert kinetic_field_score(fv) == pytest.approx(0.1 * math.exp(0.5), abs=1e-9)
    assert kinetic_field_score(fv) == pytest.approx(0.16487, abs=1e-5)
    still = make_fv(dist=12.0, speed=0.0, heading_align=0.7)
    assert kinetic_field_score(still) == pytest.approx(1.0 / 12.0, abs=1e-12)
    near = make_fv(dist=6.0, speed=0.0, heading_align=0.0)
    far = make_fv(dist=12.0, speed=0.0, heading_align=0.0)
    assert kinetic_field_score(near) == pytest.approx(
        2.0 * kinetic_field_score(far), abs=1e-12)


def test_kinetic_distance_floor():
    fv = make_fv(dist=0.01, speed=0.0)
    assert kinetic_field_score(fv) == pytest.approx(1.0 / 0.5, abs=1e-12)
