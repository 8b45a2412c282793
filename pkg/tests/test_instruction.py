import pytest
from hypothesis import given, settings, strategies as st

from pertouch.errors import InvalidArgumentError, ParseError, RangeError
from pertouch.instruction import (
    AbsoluteTarget,
    Absolute,
    Action,
    MagnitudeTable,
    Qualitative,
    RESERVED_WORDS,
    ScoreDelta,
    StrongInstruction,
    WeakInstruction,
    format_instruction,
    parse,
    to_target_delta,
)


class TestParseWeak:
    def test_optimize_this_image(self):
        assert parse("Optimize this image.") == WeakInstruction()

    def test_enhance_and_auto(self):
        assert parse("enhance") == WeakInstruction()
        assert parse("AUTO please") == WeakInstruction()


class TestParseStrong:
    def test_leading_adverb(self):
        got = parse("significantly increase eagle brightness")
        assert got == StrongInstruction(
            "eagle", "brightness", Action.INCREASE, Qualitative("significantly")
        )

    def test_normalized_tense(self):
        got = parse("Significantly increased eagle brightness")
        assert got.action is Action.INCREASE
        assert got.magnitude == Qualitative("significantly")

    def test_trailing_adverb(self):
        got = parse("reduce sky contrast slightly")
        assert got == StrongInstruction(
            "sky", "contrast", Action.DECREASE, Qualitative("slightly")
        )

    def test_default_magnitude_is_moderately(self):
        got = parse("raise sky temperature")
        assert got.magnitude == Qualitative("moderately")

    def test_set_global(self):
        got = parse("set global contrast 0.25")
        assert got == StrongInstruction(
            None, "contrast", Action.SET, Absolute(0.25)
        )

    def test_multiword_target(self):
        got = parse("increase dark sky brightness")
        assert got.target == "dark sky"

    def test_filler_words_dropped_from_target(self):
        got = parse("increase the eagle brightness")
        assert got.target == "eagle"

    def test_unknown_region_accepted_syntactically(self):
        got = parse("increase unicorn brightness")
        assert got.target == "unicorn"


class TestParseErrors:
    def test_empty(self):
        with pytest.raises(ParseError) as err:
            parse("   ")
        assert err.value.offset == 0

    def test_unknown_verb_offset(self):
        text = "significantly wiggle eagle brightness"
        with pytest.raises(ParseError) as err:
            parse(text)
        assert err.value.offset == len("significantly ")

    def test_unknown_attribute_offset(self):
        text = "increase eagle sharpness"
        with pytest.raises(ParseError) as err:
            parse(text)
        assert err.value.offset == len("increase eagle ")

    def test_utf8_byte_offsets(self):
        text = "incréase eagle brightness"
        with pytest.raises(ParseError) as err:
            parse(text)
        assert err.value.offset == 0  # offending token starts at byte 0

    def test_set_value_out_of_range(self):
        with pytest.raises(RangeError):
            parse("set global brightness 1.5")

    def test_set_needs_number(self):
        with pytest.raises(ParseError):
            parse("set global brightness high")

    def test_double_magnitude(self):
        with pytest.raises(ParseError):
            parse("slightly increase eagle brightness significantly")

    def test_missing_target(self):
        with pytest.raises(ParseError):
            parse("increase brightness")  # no target token

    def test_never_panics_on_garbage(self):
        for garbage in ["", "???", "\x00\x01", "increase", "set x", "🙂 🙃"]:
            try:
                parse(garbage)
            except ParseError:
                pass


class TestMagnitudeTable:
    def test_defaults_monotone(self):
        t = MagnitudeTable()
        assert t.slightly < t.moderately < t.significantly

    def test_rejects_non_monotone(self):
        with pytest.raises(InvalidArgumentError):
            MagnitudeTable(slightly=0.5, moderately=0.4, significantly=0.6)

    def test_to_target_delta(self):
        t = MagnitudeTable()
        inc = parse("slightly increase eagle brightness")
        assert to_target_delta(inc, t) == ScoreDelta(0.15)
        dec = parse("significantly reduce eagle brightness")
        assert to_target_delta(dec, t) == ScoreDelta(-0.60)
        sets = parse("set eagle brightness 0.0")
        assert to_target_delta(sets, t) == AbsoluteTarget(0.0)

    def test_delta_monotone_in_level(self):
        t = MagnitudeTable()
        deltas = [
            abs(to_target_delta(parse(f"{level} increase sky contrast"), t).value)
            for level in ("slightly", "moderately", "significantly")
        ]
        assert deltas == sorted(deltas)


class TestFormat:
    def test_weak_canonical(self):
        assert format_instruction(WeakInstruction()) == "optimize image"

    def test_strong_canonical(self):
        instr = StrongInstruction(
            "eagle", "brightness", Action.INCREASE, Qualitative("significantly")
        )
        assert format_instruction(instr) == "increase eagle brightness significantly"

    def test_set_canonical(self):
        instr = StrongInstruction(None, "contrast", Action.SET, Absolute(0.25))
        assert format_instruction(instr) == "set global contrast 0.25"

    def test_reserved_label_rejected_by_type(self):
        with pytest.raises(InvalidArgumentError):
            StrongInstruction(
                "moderately", "brightness", Action.INCREASE, Qualitative("slightly")
            )


_label_word = st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True).filter(
    lambda w: w not in RESERVED_WORDS
)
_labels = st.one_of(
    st.none(),
    st.lists(_label_word, min_size=1, max_size=3).map(" ".join),
)
_attributes = st.sampled_from(["colorfulness", "contrast", "temperature", "brightness"])


@st.composite
def instructions(draw):
    if draw(st.booleans()):
        return WeakInstruction()
    target = draw(_labels)
    attribute = draw(_attributes)
    action = draw(st.sampled_from(list(Action)))
    if action is Action.SET:
        value = draw(
            st.floats(min_value=-1.0, max_value=1.0, allow_nan=False)
        )
        return StrongInstruction(target, attribute, action, Absolute(value))
    level = draw(st.sampled_from(["slightly", "moderately", "significantly"]))
    return StrongInstruction(target, attribute, action, Qualitative(level))


@settings(max_examples=300, deadline=None)
@given(instructions())
def test_parse_format_round_trip(instr):
    assert parse(format_instruction(instr)) == instr
