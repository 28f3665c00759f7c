import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adversim.dsl import (BinOp, Call, Feature, Neg, Num, eval_program,
                          parse_program, pretty_print, program_from_ast,
                          random_expr, structure_hash)
from adversim.errors import ParseError, UnknownIdentifier
from adversim.features import FEATURE_NAMES, FeatureVector


def make_fv(**over):
    base = dict(dist=30.0, min_dist=25.0, rel_speed=5.0, closing_speed=2.0,
                ttc=15.0, heading_align=0.5, lateral_offset=-3.0, ahead=28.0,
                speed=8.0, path_cross=1.0)
    base.update(over)
    return FeatureVector(**base)


def test_parse_example_two_terms():
    p = parse_program("2.0*exp(-dist/10.0) + 1.0/max(ttc, 0.5)")
    assert isinstance(p.ast, BinOp) and p.ast.op == "+"
    assert isinstance(p.ast.left, BinOp) and p.ast.left.op == "*"
    assert isinstance(p.ast.right, BinOp) and p.ast.right.op == "/"


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier) as exc:
        parse_program("speeed + 1")
    assert exc.value.name == "speeed"


def test_parse_error_carries_position_and_expected():
    with pytest.raises(ParseError) as exc:
        parse_program("1.0 + ")
    assert exc.value.position is not None
    assert exc.value.expected


def test_function_arity_checked():
    with pytest.raises(ParseError, match="argument"):
        parse_program("min(dist)")
    with pytest.raises(ParseError, match="argument"):
        parse_program("clip(dist, 1.0)")
    with pytest.raises(ParseError, match="argument"):
        parse_program("exp(dist, 2.0)")


def test_unknown_function():
    with pytest.raises(UnknownIdentifier):
        parse_program("sin(dist)")


def test_eval_identity_and_arithmetic():
    assert eval_program(parse_program("dist"), make_fv(dist=30.0)) == 30.0
    v = eval_program(parse_program("1.0/ttc"), make_fv(ttc=99.0))
    assert v == pytest.approx(1.0 / 99.0, abs=1e-12)
    assert v == pytest.approx(0.010101, abs=1e-6)


def test_eval_clip_clamps():
    v = eval_program(parse_program("clip(heading_align, 0, 1)"),
                     make_fv(heading_align=-0.5))
    assert v == 0.0


def test_division_guard():
    v = eval_program(parse_program("1.0/(dist - dist)"), make_fv())
    assert math.isfinite(v)
    assert v == pytest.approx(1e9)


def test_sqrt_of_negative_is_zero():
    assert eval_program(parse_program("sqrt(0.0 - dist)"), make_fv()) == 0.0


def test_exp_overflow_guarded():
    v = eval_program(parse_program("exp(dist*dist*dist)"), make_fv(dist=300.0))
    assert math.isfinite(v)


def test_structure_hash_ignores_literals_only():
    a = parse_program("2.0*dist + 1.0/max(ttc, 0.5)")
    b = parse_program("3.5*dist + 0.7/max(ttc, 0.9)")
    c = parse_program("2.0*dist - 1.0/max(ttc, 0.5)")
    d = parse_program("2.0*speed + 1.0/max(ttc, 0.5)")
    e = parse_program("2.0*dist + 1.0/min(ttc, 0.5)")
    assert a.structure_hash == b.structure_hash
    assert a.structure_hash != c.structure_hash
    assert a.structure_hash != d.structure_hash
    assert a.structure_hash != e.structure_hash


def test_pretty_print_round_trip_samples():
    cases = [
        "dist",
        "1.0 - 2.0 - 3.0",
        "1.0 - (2.0 - 3.0)",
        "2.0/(dist*ttc)",
        "-(dist + speed)",
        "clip(closing_speed, 0.0, 15.0)/max(ttc, 0.5) + 0.4*path_cross",
    ]
    fv = make_fv()
    for src in cases:
        p = parse_program(src)
        q = parse_program(pretty_print(p.ast))
        assert q.ast == p.ast, src
        assert eval_program(p, fv) == pytest.approx(eval_program(q, fv), rel=1e-12)


def test_round_trip_random_asts():
    rng = np.random.default_rng(42)
    for _ in range(300):
        ast = random_expr(rng)
        printed = pretty_print(ast)
        assert parse_program(printed).ast == ast, printed


def test_left_associativity():
    fv = make_fv(dist=8.0, speed=2.0, ttc=4.0)
    assert eval_program(parse_program("dist - speed - ttc"), fv) == 8.0 - 2.0 - 4.0
    assert eval_program(parse_program("dist/speed/ttc"), fv) == 8.0 / 2.0 / 4.0


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 2 ** 32 - 1))
def test_eval_total_on_random_inputs(pseed, fseed):
    prng = np.random.default_rng(pseed)
    program = program_from_ast(random_expr(prng))
    frng = np.random.default_rng(fseed)
    fv = FeatureVector(
        dist=float(frng.uniform(1e-9, 500)),
        min_dist=float(frng.uniform(0, 500)),
        rel_speed=float(frng.uniform(0, 60)),
        closing_speed=float(frng.uniform(-60, 60)),
        ttc=float(frng.uniform(1e-6, 99)),
        heading_align=float(frng.uniform(-1, 1)),
        lateral_offset=float(frng.uniform(-100, 100)),
        ahead=float(frng.uniform(-200, 200)),
        speed=float(frng.uniform(0, 40)),
        path_cross=float(frng.integers(0, 2)))
    assert math.isfinite(eval_program(program, fv))


def test_feature_names_are_the_dsl_vocabulary():
    for name in FEATURE_NAMES:
        p = parse_program(name)
        assert isinstance(p.ast, Feature)
    assert len(FEATURE_NAMES) == 10
