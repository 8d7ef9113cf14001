"""Controlled-language parser: grammar coverage, errors, round trips."""

import numpy as np
import pytest

from modsim.labels import TargetRef
from modsim.modlang import (
    HL,
    LL,
    KIND_OF_OP,
    ModulationIR,
    OP_ABORT,
    OP_AVOID,
    OP_REORDER,
    OP_SET_SPEED,
    OP_SKIP,
    OP_SUBSTITUTE,
    ParseError,
    SPEED_PRESETS,
    UnknownWord,
    classify,
    make_abort,
    make_avoid,
    make_reorder,
    make_set_speed,
    make_skip,
    make_substitute,
    parse,
    render,
)


def test_reorder_command_with_label():
    ir = parse("stack object #2 first")
    assert ir.op == OP_REORDER and ir.kind == HL
    assert ir.target == TargetRef.by_label("object #2")
    assert ir.position == "first"


def test_lenient_label_spelling_without_hash():
    ir = parse("stack object 2 first!")
    assert ir.target == TargetRef.by_label("object #2")
    assert ir.position == "first"


def test_substitute_not_the_brown_but_the_white_one():
    ir = parse("not the brown, but the white one")
    assert ir.op == OP_SUBSTITUTE and ir.kind == LL
    assert ir.old == TargetRef.by_attributes(color="brown")
    assert ir.new == TargetRef.by_attributes(color="white")
    # spans cover the surfaces for the augmenter
    assert ir.raw_text[slice(*ir.old_span)] == "the brown"
    assert ir.raw_text[slice(*ir.target_span)] == "the white one"


def test_substitute_with_explicit_shapes_and_use():
    ir = parse("not the red bottle use the white bottle")
    assert ir.old == TargetRef.by_attributes(color="red", shape="bottle")
    assert ir.new == TargetRef.by_attributes(color="white", shape="bottle")


def test_be_gentle_maps_to_low_speed():
    ir = parse("be gentle")
    assert ir.op == OP_SET_SPEED and ir.kind == LL and ir.scale == 0.3


def test_speed_tail_is_ignored():
    ir = parse("be gentle to move it.")
    assert ir.op == OP_SET_SPEED and ir.scale == 0.3
    assert parse("slow down with the cup please").scale == 0.5
    assert parse("fast").scale == 1.0


def test_speed_numeric():
    assert parse("speed 0.75").scale == 0.75
    with pytest.raises(ParseError):
        parse("speed 2")
    with pytest.raises(ParseError):
        parse("speed zero")


def test_avoid_stepping_analogue():
    ir = parse("avoid the plate")
    assert ir.op == OP_AVOID and ir.kind == HL
    assert ir.target == TargetRef.by_attributes(shape="plate")


def test_skip_by_target_and_by_subtask_name():
    ir = parse("skip the red box")
    assert ir.op == OP_SKIP and ir.target == TargetRef.by_attributes("red", "box")
    ir = parse("skip object #2")
    assert ir.target == TargetRef.by_label("object #2")
    ir = parse("skip shelve_second")
    assert ir.target is None and ir.subtask == "shelve_second"


def test_abort_forms():
    assert parse("stop").op == OP_ABORT
    assert parse("abort!").op == OP_ABORT
    with pytest.raises(ParseError):
        parse("stop everything")


def test_the_other_cup_first():
    ir = parse("stack the other cup first.")
    assert ir.op == OP_REORDER
    assert ir.target == TargetRef.other_of("cup")


def test_reorder_without_verb_and_last():
    ir = parse("object 3 last")
    assert ir.target == TargetRef.by_label("object #3") and ir.position == "last"


def test_case_insensitive_and_trailing_punctuation():
    ir = parse("Stack Object #2 FIRST!!")
    assert ir.target == TargetRef.by_label("object #2")
    assert parse("BE GENTLE").scale == 0.3


def test_out_of_grammar_is_parse_error():
    with pytest.raises(ParseError):
        parse("purple monkey dishwasher")


def test_unknown_word_reports_token_and_offset():
    with pytest.raises(UnknownWord) as exc_info:
        parse("purple monkey dishwasher")
    assert exc_info.value.token == "purple"
    assert exc_info.value.offset == 0
    with pytest.raises(UnknownWord) as exc_info:
        parse("avoid the froob")
    assert exc_info.value.token == "froob"
    assert exc_info.value.offset == len("avoid the ")
    assert isinstance(exc_info.value, ParseError)


def test_parse_error_carries_offset_and_rule():
    with pytest.raises(ParseError) as exc_info:
        parse("not the brown")
    assert exc_info.value.rule == "substitute"
    with pytest.raises(ParseError) as exc_info:
        parse("object #2")
    assert exc_info.value.rule == "reorder"
    with pytest.raises(ParseError):
        parse("")


def test_classification_table_is_total_and_normative():
    assert KIND_OF_OP == {
        OP_SUBSTITUTE: LL,
        OP_SET_SPEED: LL,
        OP_REORDER: HL,
        OP_SKIP: HL,
        OP_AVOID: HL,
        OP_ABORT: HL,
    }
    assert classify(parse("be gentle to move it")) == LL
    assert classify(parse("avoid the plate")) == HL
    assert classify(parse("stack object #2 first")) == HL
    assert classify(OP_SET_SPEED) == LL


def test_render_canonical_forms():
    assert render(make_reorder(TargetRef.by_label("object #2"), "first")) == "stack object #2 first"
    assert render(make_set_speed(0.3)) == "be gentle"
    assert render(make_set_speed(0.5)) == "be slow"
    assert render(make_set_speed(0.85)) == "speed 0.85"
    assert render(make_avoid(TargetRef.by_attributes(shape="plate"))) == "avoid the plate"
    assert render(make_abort()) == "stop"
    assert (
        render(make_substitute(
            new=TargetRef.by_attributes(color="white"),
            old=TargetRef.by_attributes(color="brown"),
        ))
        == "not the brown one, but the white one"
    )


def _random_constructible_ir(rng: np.random.Generator) -> ModulationIR:
    colors = ("red", "white", "brown", "blue", "green", "yellow")
    shapes = ("cup", "bottle", "box", "cane", "book", "plate")

    def ref():
        variant = rng.integers(0, 4)
        if variant == 0:
            return TargetRef.by_label(f"object #{int(rng.integers(1, 30))}")
        if variant == 1:
            return TargetRef.by_attributes(color=str(rng.choice(colors)))
        if variant == 2:
            return TargetRef.by_attributes(
                color=str(rng.choice(colors)) if rng.integers(0, 2) else None,
                shape=str(rng.choice(shapes)),
            )
        return TargetRef.other_of(str(rng.choice(shapes)))

    op = rng.integers(0, 6)
    if op == 0:
        return make_reorder(ref(), "first" if rng.integers(0, 2) else "last")
    if op == 1:
        return make_substitute(new=ref(), old=ref())
    if op == 2:
        scale = float(rng.choice([0.3, 0.5, 1.0, 0.25, 0.75, 0.9]))
        return make_set_speed(scale)
    if op == 3:
        return make_avoid(ref())
    if op == 4:
        if rng.integers(0, 2):
            return make_skip(target=ref())
        return make_skip(subtask=str(rng.choice(["stack_first_cup", "bring_bottle", "shelve_second"])))
    return make_abort()


def test_parse_render_round_trip_over_500_generated_irs():
    rng = np.random.default_rng(42)
    for _ in range(500):
        ir = _random_constructible_ir(rng)
        text = render(ir)
        back = parse(text)
        assert back == ir, f"{text!r} -> {back} != {ir}"


def test_structural_equality_ignores_raw_text():
    a = parse("stack object #2 first")
    b = parse("object 2 first!!")
    assert a == b
    assert a.raw_text != b.raw_text


def test_ir_invariants_enforced():
    with pytest.raises(ValueError):
        ModulationIR(OP_SET_SPEED, LL, scale=0.0)
    with pytest.raises(ValueError):
        ModulationIR(OP_SET_SPEED, HL, scale=0.5)  # wrong kind for the op
    with pytest.raises(ValueError):
        ModulationIR(OP_REORDER, HL, target=None, position="first")


def test_ir_json_round_trip():
    for text in (
        "stack object #2 first",
        "not the brown, but the white one",
        "be gentle to move it",
        "avoid the plate",
        "skip shelve_second",
        "stop",
    ):
        ir = parse(text)
        assert ModulationIR.from_json(ir.to_json()) == ir


def test_target_span_covers_actionable_reference():
    ir = parse("grasp the white bottle first")
    ref, span = ir.actionable_ref()
    assert ref == TargetRef.by_attributes("white", "bottle")
    assert ir.raw_text[slice(*span)] == "the white bottle"
    assert parse("be gentle").actionable_ref() is None
    assert parse("stop").actionable_ref() is None


def test_speed_presets_match_documented_values():
    assert SPEED_PRESETS == {"gentle": 0.3, "slow": 0.5, "fast": 1.0}
