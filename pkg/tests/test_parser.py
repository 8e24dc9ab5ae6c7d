"""Surface-syntax parser and pretty-printer tests."""

import pytest
from hypothesis import given, settings

from sketchreward.dsl import (
    Const,
    Hole,
    SketchError,
    holes_of,
    parse_sketch,
    print_sketch,
    tokens_of,
)
from sketchreward.dsl.ast import Arith, Count, If, TokenMatch

from conftest import sketches


def test_constant_sketch():
    assert parse_sketch("fn(traj){ 0 }") == Const(0.0)
    assert holes_of(parse_sketch("fn(traj){ 0 }")) == []


def test_doorkey_sketch_structure(doorkey_sketch):
    assert holes_of(doorkey_sketch) == [1, 2, 3, 4, 5]
    assert isinstance(doorkey_sketch, TokenMatch)
    arms = dict(doorkey_sketch.arms)
    assert arms["reach_goal"] == Hole(1)
    assert isinstance(arms["unlock_door"], If)
    assert doorkey_sketch.default == Const(0.0)
    assert tokens_of(doorkey_sketch) == {
        "reach_goal", "unlock_door", "close_door", "pickup_key", "drop_key",
    }


def test_hole_order_enforced():
    with pytest.raises(SketchError):
        parse_sketch("fn(traj){ ?2 }")
    with pytest.raises(SketchError):
        parse_sketch("fn(traj){ ?1 + ?3 }")
    # order of first appearance, not of magnitude
    ast = parse_sketch("fn(traj){ ?1 * ?2 + ?1 }")
    assert holes_of(ast) == [1, 2]


def test_hole_in_guard_counts():
    ast = parse_sketch("fn(traj){ if ?1 <= 0 then 1 else 2 }")
    assert holes_of(ast) == [1]


def test_syntax_error_has_location():
    with pytest.raises(SketchError, match=r"\d+:\d+"):
        parse_sketch("fn(traj){ if 1 then 2 else 3 }")
    with pytest.raises(SketchError, match=r"\d+:\d+"):
        parse_sketch("fn(traj){ 1 + }")


def test_unknown_token_rejected():
    with pytest.raises(SketchError, match="unknown token"):
        parse_sketch("fn(traj){ count(flying_pig) }")
    with pytest.raises(SketchError, match="unknown token"):
        parse_sketch("fn(traj){ match token { open_portal => 1, _ => 0 } }")


def test_match_requires_default():
    with pytest.raises(SketchError):
        parse_sketch("fn(traj){ match token { reach_goal => 1 } }")


def test_duplicate_arm_rejected():
    with pytest.raises(SketchError, match="duplicate"):
        parse_sketch(
            "fn(traj){ match token { other => 1, other => 2, _ => 0 } }"
        )


def test_comments_and_whitespace():
    src = """
    # leading comment
    fn(traj) {
      ?1  # trailing comment
      + 2
    }
    """
    assert parse_sketch(src) == Arith("+", (Hole(1), Const(2.0)))


def test_precedence():
    assert parse_sketch("fn(traj){ 1 + 2 * 3 }") == Arith(
        "+", (Const(1.0), Arith("*", (Const(2.0), Const(3.0))))
    )
    assert parse_sketch("fn(traj){ (1 + 2) * 3 }") == Arith(
        "*", (Arith("+", (Const(1.0), Const(2.0))), Const(3.0))
    )
    # subtraction is left-associative
    assert parse_sketch("fn(traj){ 1 - 2 - 3 }") == Arith(
        "-", (Arith("-", (Const(1.0), Const(2.0))), Const(3.0))
    )


def test_negative_literal_folds():
    assert parse_sketch("fn(traj){ -1 }") == Const(-1.0)
    assert parse_sketch("fn(traj){ -?1 }") == Arith("neg", (Hole(1),))


def test_count_variants():
    assert parse_sketch("fn(traj){ count(other) }") == Count("other", False)
    assert parse_sketch("fn(traj){ count_inclusive(other) }") == Count(
        "other", True
    )


def test_trailing_input_rejected():
    with pytest.raises(SketchError):
        parse_sketch("fn(traj){ 1 } garbage")


def test_doorkey_print_roundtrip(doorkey_sketch):
    assert parse_sketch(print_sketch(doorkey_sketch)) == doorkey_sketch


@settings(max_examples=300, deadline=None)
@given(sketches)
def test_print_parse_roundtrip(sketch):
    assert parse_sketch(print_sketch(sketch)) == sketch
