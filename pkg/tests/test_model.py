import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from canrev.model import (
    WIDTH_WORDS,
    Action,
    CanFrame,
    ChannelNameError,
    ChannelSpec,
    DiscoveryRow,
    Endianness,
    ImuSample,
    Recording,
    RecordingKind,
    parse_channel_name,
    smooth_display,
)

from published_tables import CORRELATION_TABLES, DISCOVERY_TABLES


def specs():
    byte = st.builds(
        ChannelSpec, st.integers(0, 2**29 - 1), st.just(8), st.integers(0, 7), st.none()
    )
    wide = st.builds(
        ChannelSpec,
        st.integers(0, 2**29 - 1),
        st.integers(9, 16),
        st.integers(0, 6),
        st.sampled_from(list(Endianness)),
    )
    return st.one_of(byte, wide)


@pytest.mark.parametrize(
    "name, expected",
    [
        ("125_lsb_sixteen_bit_2", ChannelSpec(125, 16, 2, Endianness.LSB)),
        ("241_byte_1", ChannelSpec(241, 8, 1)),
        ("0_byte_0", ChannelSpec(0, 8, 0)),
        ("564_msb_fifteen_bit_2", ChannelSpec(564, 15, 2, Endianness.MSB)),
        ("2244644_msb_ten_bit_6", ChannelSpec(2244644, 10, 6, Endianness.MSB)),
        ("564 lsb nine bit 2", ChannelSpec(564, 9, 2, Endianness.LSB)),
        ("844  msb_twelve bit 6", ChannelSpec(844, 12, 6, Endianness.MSB)),
    ],
)
def test_parse_examples(name, expected):
    assert parse_channel_name(name) == expected


@pytest.mark.parametrize(
    "name",
    [
        "",
        "   ",
        "241_byte_",
        "241_byte",
        "241_byte_8",
        "241_byte_1_2",
        "x_byte_1",
        "-3_byte_1",
        "125_msb_eight_bit_0",
        "125_msb_seventeen_bit_0",
        "125_mid_nine_bit_0",
        "125_msb_nine_bits_0",
        "125_msb_nine_bit_7",
        "125_msb_nine_bit",
        "536870912_byte_0",
    ],
)
def test_parse_rejects(name):
    with pytest.raises(ChannelNameError):
        parse_channel_name(name)


def test_name_error_is_value_error():
    with pytest.raises(ValueError):
        parse_channel_name("nonsense")


def test_width_words_cover_nine_to_sixteen():
    assert sorted(WIDTH_WORDS) == list(range(9, 17))


@settings(max_examples=300)
@given(specs())
def test_name_round_trip(spec):
    assert parse_channel_name(spec.name) == spec
    assert parse_channel_name(spec.name.replace("_", " ")) == spec


@settings(max_examples=200)
@given(specs(), specs())
def test_names_injective(a, b):
    assert (a.name == b.name) == (a == b)


def test_short_name_drops_id():
    assert ChannelSpec(564, 16, 2, Endianness.MSB).short_name == "msb_sixteen_bit_2"
    assert ChannelSpec(844, 8, 6).short_name == "byte_6"


def _all_table_channels():
    for rows in CORRELATION_TABLES.values():
        for frame_id, channel, *_ in rows:
            yield frame_id, channel
    for rows in DISCOVERY_TABLES.values():
        for frame_id, channel, *_ in rows:
            yield frame_id, channel


def test_every_table_channel_parses():
    seen = set()
    for frame_id, channel in _all_table_channels():
        spec = parse_channel_name(f"{frame_id} {channel}")
        assert spec.frame_id == frame_id
        assert spec.short_name == channel.replace(" ", "_")
        seen.add(spec)
    assert len(seen) > 50


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(frame_id=-1, width_bits=8, index=0),
        dict(frame_id=2**29, width_bits=8, index=0),
        dict(frame_id=1, width_bits=7, index=0),
        dict(frame_id=1, width_bits=17, index=0, endianness=Endianness.MSB),
        dict(frame_id=1, width_bits=8, index=0, endianness=Endianness.MSB),
        dict(frame_id=1, width_bits=12, index=0),
        dict(frame_id=1, width_bits=12, index=7, endianness=Endianness.LSB),
    ],
)
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        ChannelSpec(**kwargs)


def test_span():
    assert ChannelSpec(1, 8, 7).span == 8
    assert ChannelSpec(1, 9, 6, "lsb").span == 8


def test_frame_validation():
    CanFrame(0.0, 0x1FFFFFFF, bytes(8))
    with pytest.raises(ValueError):
        CanFrame(0.0, 1, bytes(9))
    with pytest.raises(ValueError):
        CanFrame(-1.0, 1, b"")
    with pytest.raises(ValueError):
        CanFrame(math.nan, 1, b"")


def test_recording_requires_ordered_streams():
    imu = [ImuSample(1.0, 0, 0, 0), ImuSample(0.5, 0, 0, 0)]
    with pytest.raises(ValueError):
        Recording([], imu, [], RecordingKind.DRIVE)


def test_action_calibration_kind():
    assert Action.DECELERATE.calibration_kind is RecordingKind.CALIBRATION_BRAKE
    assert Action.ACCELERATE.calibration_kind is RecordingKind.CALIBRATION_ACCELERATOR
    for a in (Action.STEER, Action.STEER_LEFT, Action.STEER_RIGHT):
        assert a.calibration_kind is RecordingKind.CALIBRATION_STEERING
    assert not RecordingKind.DRIVE.is_calibration


@pytest.mark.parametrize(
    "value_range, stdev, expected",
    [(5447, 26, 1), (645, 12, 2), (117, 1, 1), (100, 1, 1), (100, 2, 2), (28928, 142, 1)],
)
def test_discovery_row_smooth(value_range, stdev, expected):
    row = DiscoveryRow(ChannelSpec(1, 8, 0), value_range, 20, stdev)
    assert row.smooth == pytest.approx(100 * stdev / value_range)
    assert row.smooth_display == expected


def test_smooth_display_absorbs_float_noise():
    assert smooth_display(1.0000000000002) == 1
    assert smooth_display(1.001) == 2
    assert smooth_display(0.0) == 0


def test_discovery_row_needs_range():
    with pytest.raises(ValueError):
        DiscoveryRow(ChannelSpec(1, 8, 0), 0, 1, 0.0)
