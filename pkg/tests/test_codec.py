import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vtgkit.codec import (
    GroundedEvent,
    GroundedSequence,
    ParsedText,
    parse_grounded_text,
    read_events_jsonl,
    render_grounded_text,
    timestamp_to_token,
    token_to_timestamp,
    vocab_layout,
    write_events_jsonl,
)
from vtgkit.errors import (
    EmptyInputError,
    InvalidInputError,
    OrderingError,
    ParseFailureError,
    SchemaError,
)


# --- hand-derived frozen values ---


def test_midpoint_maps_to_middle_token():
    assert timestamp_to_token(50.0, 100.0, 300) == 150


def test_half_rounds_away_from_zero():
    # 300 * (1/6) / 100 = 0.5 exactly
    assert timestamp_to_token(1.0 / 6.0, 100.0, 300) == 1
    # and 0.5 chunks below the top anchor rounds up too
    assert timestamp_to_token(99.5, 100.0, 300) == 299  # 298.5 -> 299


def test_endpoints():
    assert timestamp_to_token(0.0, 100.0, 300) == 0
    assert timestamp_to_token(100.0, 100.0, 300) == 300


def test_overlong_timestamp_clamps_to_last_anchor():
    assert timestamp_to_token(110.0, 100.0, 300) == 300


def test_inverse_is_anchor_position():
    assert token_to_timestamp(150, 100.0, 300) == 50.0
    assert token_to_timestamp(0, 100.0, 300) == 0.0
    assert token_to_timestamp(300, 100.0, 300) == 100.0


def test_invalid_inputs_rejected():
    with pytest.raises(InvalidInputError):
        timestamp_to_token(-0.5, 100.0, 300)
    with pytest.raises(InvalidInputError):
        timestamp_to_token(float("nan"), 100.0, 300)
    with pytest.raises(InvalidInputError):
        timestamp_to_token(float("inf"), 100.0, 300)
    with pytest.raises(InvalidInputError):
        timestamp_to_token(5.0, 0.0, 300)
    with pytest.raises(InvalidInputError):
        timestamp_to_token(5.0, -10.0, 300)
    with pytest.raises(InvalidInputError):
        timestamp_to_token(5.0, 100.0, 0)
    with pytest.raises(InvalidInputError):
        token_to_timestamp(301, 100.0, 300)
    with pytest.raises(InvalidInputError):
        token_to_timestamp(-1, 100.0, 300)


# --- properties ---


@given(
    frac=st.floats(0.0, 1.0, allow_nan=False),
    duration=st.floats(1e-3, 1e4, allow_nan=False),
    chunks=st.integers(1, 2000),
)
@settings(max_examples=300)
def test_round_trip_error_bound(frac, duration, chunks):
    tau = frac * duration
    t = timestamp_to_token(tau, duration, chunks)
    assert 0 <= t <= chunks
    back = token_to_timestamp(t, duration, chunks)
    assert abs(back - tau) <= duration / (2 * chunks) + 1e-9


@given(
    f1=st.floats(0.0, 1.0, allow_nan=False),
    f2=st.floats(0.0, 1.0, allow_nan=False),
    duration=st.floats(1e-3, 1e4, allow_nan=False),
    chunks=st.integers(1, 2000),
)
@settings(max_examples=300)
def test_token_index_monotone_in_timestamp(f1, f2, duration, chunks):
    lo, hi = sorted((f1 * duration, f2 * duration))
    assert timestamp_to_token(lo, duration, chunks) <= timestamp_to_token(hi, duration, chunks)


# --- vocab layout ---


def test_vocab_layout_frozen_example():
    v = vocab_layout(1000, 300)
    assert v.temporal_id(0) == 1000
    assert v.temporal_id(300) == 1300
    assert v.video_open_id == 1301
    assert v.video_close_id == 1302
    assert v.grounded_id == 1303
    assert v.total_size == 1304


def test_vocab_string_round_trip():
    v = vocab_layout(50, 20)
    for tid in range(v.base_size, v.total_size):
        s = v.token_string(tid)
        assert v.string_to_id(s) == tid
    assert v.string_to_id("hello") is None
    assert v.token_string(v.grounded_id) == "<grounded>"
    with pytest.raises(InvalidInputError):
        v.temporal_id(21)
    with pytest.raises(InvalidInputError):
        v.token_string(0)


# --- rendering ---


def test_render_single_event():
    v = vocab_layout(1000, 300)
    events = [GroundedEvent(0.0, 6.2, "a baby is crying")]
    assert render_grounded_text(events, 310.0, v) == "From <0> to <6>, a baby is crying."


def test_render_multiple_events_single_space_join():
    v = vocab_layout(10, 10)
    events = [GroundedEvent(0.0, 5.0, "alpha"), GroundedEvent(5.0, 10.0, "beta")]
    assert render_grounded_text(events, 10.0, v) == "From <0> to <5>, alpha. From <5> to <10>, beta."


def test_render_rejects_bad_events():
    v = vocab_layout(10, 10)
    with pytest.raises(EmptyInputError):
        render_grounded_text([], 10.0, v)
    with pytest.raises(OrderingError):
        render_grounded_text([GroundedEvent(6.0, 4.0, "x")], 10.0, v)
    with pytest.raises(OrderingError):
        render_grounded_text(
            [GroundedEvent(5.0, 6.0, "x"), GroundedEvent(1.0, 2.0, "y")], 10.0, v
        )
    with pytest.raises(InvalidInputError):
        render_grounded_text([GroundedEvent(0.0, 11.0, "x")], 10.0, v)
    with pytest.raises(InvalidInputError):
        render_grounded_text([GroundedEvent(0.0, 1.0, "   ")], 10.0, v)


# --- parsing ---


def test_parse_round_trip_tokens_exact():
    v = vocab_layout(1000, 300)
    events = [GroundedEvent(12.4, 52.7, "a man is cooking"), GroundedEvent(60.0, 93.1, "he eats")]
    duration = 100.0
    text = render_grounded_text(events, duration, v)
    parsed = parse_grounded_text(text, duration, v)
    assert parsed.skipped == []
    assert len(parsed.events) == 2
    for orig, back in zip(events, parsed.events):
        assert back.caption == orig.caption
        assert abs(back.start - orig.start) <= duration / (2 * v.chunks) + 1e-9
        assert abs(back.end - orig.end) <= duration / (2 * v.chunks) + 1e-9
    # re-rendering the parsed events reproduces the exact string
    assert render_grounded_text(parsed.events, duration, v) == text


def test_parse_skips_malformed_clauses():
    v = vocab_layout(1000, 300)
    text = "From <500> to <600>, too far. From <9> to <3>, reversed. From <10> to <20>, fine."
    parsed = parse_grounded_text(text, 100.0, v)
    assert len(parsed.events) == 1
    assert parsed.events[0].caption == "fine"
    assert len(parsed.skipped) == 2


def test_parse_skips_empty_caption():
    v = vocab_layout(1000, 300)
    parsed = parse_grounded_text("From <1> to <2>, . From <3> to <4>, ok.", 100.0, v)
    assert [e.caption for e in parsed.events] == ["ok"]
    assert len(parsed.skipped) == 1


def test_parse_failure_carries_raw_text():
    v = vocab_layout(1000, 300)
    with pytest.raises(ParseFailureError) as ei:
        parse_grounded_text("no clauses here", 100.0, v)
    assert ei.value.text == "no clauses here"
    with pytest.raises(ParseFailureError):
        parse_grounded_text("From <9> to <3>, reversed only.", 100.0, v)


def test_parse_is_case_and_space_tolerant():
    v = vocab_layout(1000, 300)
    parsed = parse_grounded_text("from <10>  to  <20>, still fine.", 100.0, v)
    assert len(parsed.events) == 1


# --- sequences and files ---


def test_grounded_sequence_validation():
    v = vocab_layout(100, 10)
    seq = GroundedSequence(ids=[0, 99, v.temporal_id(3), v.grounded_id], grounded=True)
    seq.validate(v)
    bad = GroundedSequence(ids=[v.total_size], grounded=False)
    with pytest.raises(InvalidInputError):
        bad.validate(v)


def test_events_jsonl_round_trip(tmp_path):
    path = tmp_path / "events.jsonl"
    events = [GroundedEvent(1.0, 2.5, "alpha"), GroundedEvent(3.0, 9.0, "beta")]
    write_events_jsonl(events, path)
    assert read_events_jsonl(path) == events


def test_events_jsonl_schema_errors(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"start": 1.0}\n')
    with pytest.raises(SchemaError):
        read_events_jsonl(path)
    path.write_text("not json\n")
    with pytest.raises(SchemaError):
        read_events_jsonl(path)
    path.write_text("\n")
    with pytest.raises(EmptyInputError):
        read_events_jsonl(path)
