import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adversim.geometry import (Polyline, obb_corners, obb_overlap,
                               point_in_polygon, polygon_is_simple, ray_hits,
                               wrap_angle)

finite_angles = st.floats(min_value=-50.0, max_value=50.0,
                          allow_nan=False, allow_infinity=False)


@given(finite_angles)
def test_wrap_angle_range_and_equivalence(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    # equivalent modulo 2*pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


def test_wrap_angle_boundary():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi


def test_polyline_point_at_and_project():
    line = Polyline([[0, 0], [10, 0], [10, 10]])
    assert line.length == pytest.approx(20.0)
    x, y, ang = line.point_at(5.0)
    assert (x, y) == (5.0, 0.0)
    assert ang == pytest.approx(0.0)
    x, y, ang = line.point_at(15.0)
    assert (x, y) == (10.0, 5.0)
    assert ang == pytest.approx(math.pi / 2)
    s, lat, tangent, dist = line.project(5.0, 2.0)
    assert s == pytest.approx(5.0)
    assert lat == pytest.approx(2.0)  # left of travel
    assert dist == pytest.approx(2.0)


def test_polygon_simple_and_containment():
    square = np.array([[0, 0], [10, 0], [10, 10], [0, 10]], dtype=float)
    bowtie = np.array([[0, 0], [10, 10], [10, 0], [0, 10]], dtype=float)
    assert polygon_is_simple(square)
    assert not polygon_is_simple(bowtie)
    assert point_in_polygon(5, 5, square)
    assert not point_in_polygon(15, 5, square)
    assert point_in_polygon(10, 5, square)  # boundary counts as inside


def test_ray_hits_simple():
    segs = np.array([[[5.0, -1.0], [5.0, 1.0]]])
    dirs = np.array([[1.0, 0.0], [0.0, 1.0]])
    d = ray_hits((0.0, 0.0), dirs, segs, 30.0)
    assert d[0] == pytest.approx(5.0)
    assert d[1] == pytest.approx(30.0)


def test_obb_corners_axis_aligned():
    c = obb_corners(0, 0, 0.0, 4.0, 2.0)
    assert sorted(map(tuple, c.round(9))) == sorted(
        [(2.0, 1.0), (-2.0, 1.0), (-2.0, -1.0), (2.0, -1.0)])


def test_obb_overlap_basic():
    assert obb_overlap(0, 0, 0, 4.5, 2, 0, 0, 0.3, 4.5, 2)  # identical centers
    assert not obb_overlap(0, 0, 0, 4.5, 2, 10, 0, 0, 4.5, 2)
    # just touching along x: half lengths 2.25 + 2.25 = 4.5
    assert obb_overlap(0, 0, 0, 4.5, 2, 4.4, 0, 0, 4.5, 2)
    assert not obb_overlap(0, 0, 0, 4.5, 2, 4.6, 0, 0, 4.5, 2)


pose = st.tuples(st.floats(-10, 10), st.floats(-10, 10), st.floats(-math.pi, math.pi))


@settings(max_examples=200, deadline=None)
@given(pose, pose)
def test_obb_overlap_symmetry(pa, pb):
    a = obb_overlap(pa[0], pa[1], pa[2], 4.5, 2.0, pb[0], pb[1], pb[2], 4.5, 2.0)
    b = obb_overlap(pb[0], pb[1], pb[2], 4.5, 2.0, pa[0], pa[1], pa[2], 4.5, 2.0)
    assert a == b
