"""Core domain types shared across the package.

Everything here is an immutable value object. Validation happens at
construction so downstream code can trust the invariants without re-checking.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

MAX_FRAME_ID = 1 << 29
MAX_PAYLOAD = 8

WIDTH_WORDS = {
    9: "nine",
    10: "ten",
    11: "eleven",
    12: "twelve",
    13: "thirteen",
    14: "fourteen",
    15: "fifteen",
    16: "sixteen",
}
_WORD_WIDTHS = {word: width for width, word in WIDTH_WORDS.items()}


class CanRevError(Exception):
    """Base class for all errors raised by canrev."""


class ChannelNameError(CanRevError, ValueError):
    """A channel name string could not be parsed."""


class Endianness(str, enum.Enum):
    MSB = "msb"
    LSB = "lsb"


class Action(str, enum.Enum):
    """Vehicle actions an IMU-derived signal can represent.

    ``STEER`` is the composite steering action: both rectified directions plus
    their sum are correlated and the best is kept per channel.
    """

    DECELERATE = "decelerate"
    ACCELERATE = "accelerate"
    STEER_LEFT = "steer_left"
    STEER_RIGHT = "steer_right"
    STEER = "steer"

    @property
    def calibration_kind(self) -> "RecordingKind":
        if self is Action.DECELERATE:
            return RecordingKind.CALIBRATION_BRAKE
        if self is Action.ACCELERATE:
            return RecordingKind.CALIBRATION_ACCELERATOR
        return RecordingKind.CALIBRATION_STEERING


class RecordingKind(str, enum.Enum):
    DRIVE = "drive"
    CALIBRATION_BRAKE = "calibration-brake"
    CALIBRATION_STEERING = "calibration-steering"
    CALIBRATION_ACCELERATOR = "calibration-accelerator"

    @property
    def is_calibration(self) -> bool:
        return self is not RecordingKind.DRIVE


@dataclass(frozen=True)
class CanFrame:
    timestamp: float
    frame_id: int
    payload: bytes

    def __post_init__(self):
        if not isinstance(self.payload, bytes):
            object.__setattr__(self, "payload", bytes(self.payload))
        if len(self.payload) > MAX_PAYLOAD:
            raise ValueError(f"payload of {len(self.payload)} bytes exceeds {MAX_PAYLOAD}")
        if not 0 <= self.frame_id < MAX_FRAME_ID:
            raise ValueError(f"frame id {self.frame_id} outside 29-bit range")
        if not (self.timestamp >= 0 and math.isfinite(self.timestamp)):
            raise ValueError(f"invalid timestamp {self.timestamp!r}")


@dataclass(frozen=True)
class ImuSample:
    """One accelerometer reading.

    Axis convention: ``ax`` positive is leftward, ``ay`` positive is
    deceleration (aftward), ``az`` vertical. Units are m/s^2.
    """

    timestamp: float
    ax: float
    ay: float
    az: float


@dataclass(frozen=True)
class GpsSample:
    timestamp: float
    vx: float
    vy: float
    vz: float
    lat: Optional[float] = None
    lon: Optional[float] = None
    alt: Optional[float] = None

    @property
    def speed(self) -> float:
        return math.sqrt(self.vx * self.vx + self.vy * self.vy + self.vz * self.vz)


def _check_monotonic(name: str, items: Sequence) -> None:
    prev = -math.inf
    for item in items:
        if item.timestamp < prev:
            raise ValueError(f"{name} timestamps must be non-decreasing")
        prev = item.timestamp


@dataclass(frozen=True)
class Recording:
    can: tuple[CanFrame, ...]
    imu: tuple[ImuSample, ...]
    gps: tuple[GpsSample, ...] = ()
    kind: RecordingKind = RecordingKind.DRIVE

    def __post_init__(self):
        object.__setattr__(self, "can", tuple(self.can))
        object.__setattr__(self, "imu", tuple(self.imu))
        object.__setattr__(self, "gps", tuple(self.gps))
        object.__setattr__(self, "kind", RecordingKind(self.kind))
        _check_monotonic("CAN", self.can)
        _check_monotonic("IMU", self.imu)
        _check_monotonic("GPS", self.gps)

    @property
    def frame_ids(self) -> list[int]:
        return sorted({f.frame_id for f in self.can})


@dataclass(frozen=True)
class ChannelSpec:
    """Identity of one candidate channel inside a frame's payload.

    Width 8 channels are single bytes and carry no endianness. Wider channels
    occupy the two-byte window starting at ``index``.
    """

    frame_id: int
    width_bits: int
    index: int
    endianness: Optional[Endianness] = None

    def __post_init__(self):
        if not 0 <= self.frame_id < MAX_FRAME_ID:
            raise ValueError(f"frame id {self.frame_id} outside 29-bit range")
        if not 8 <= self.width_bits <= 16:
            raise ValueError(f"width {self.width_bits} not in 8..16")
        if self.width_bits == 8:
            if self.endianness is not None:
                raise ValueError("8-bit channels have no endianness")
            if not 0 <= self.index < MAX_PAYLOAD:
                raise ValueError(f"byte index {self.index} outside payload")
        else:
            if self.endianness is None:
                raise ValueError(f"{self.width_bits}-bit channel needs an endianness")
            object.__setattr__(self, "endianness", Endianness(self.endianness))
            if not 0 <= self.index <= MAX_PAYLOAD - 2:
                raise ValueError(f"window index {self.index} outside payload")

    @property
    def span(self) -> int:
        """Number of payload bytes needed to decode this channel."""
        return self.index + (1 if self.width_bits == 8 else 2)

    @property
    def name(self) -> str:
        return channel_name(self)

    @property
    def short_name(self) -> str:
        """Name without the frame ID, as printed in report tables."""
        return channel_name(self).split("_", 1)[1]


@dataclass(frozen=True)
class ChannelSeries:
    spec: ChannelSpec
    grid: np.ndarray
    values: np.ndarray
    first_sample_time: float

    def __post_init__(self):
        if len(self.grid) != len(self.values):
            raise ValueError("grid and values differ in length")


@dataclass(frozen=True)
class ActionSignal:
    action: Action
    grid: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class MotionMask:
    grid: np.ndarray
    moving: np.ndarray

    @property
    def fraction_moving(self) -> float:
        return float(np.mean(self.moving)) if len(self.moving) else 0.0


@dataclass(frozen=True)
class DiscoveryRow:
    spec: ChannelSpec
    range: int
    unique: int
    stdev_deriv: float
    correlation: Optional[float] = None
    direction: Optional[str] = None
    smooth: float = field(init=False)
    smooth_display: int = field(init=False)

    def __post_init__(self):
        if self.range <= 0:
            raise ValueError("discovery rows require a positive range")
        smooth = 100.0 * self.stdev_deriv / self.range
        object.__setattr__(self, "smooth", smooth)
        object.__setattr__(self, "smooth_display", smooth_display(smooth))


def smooth_display(smooth: float) -> int:
    """Integer Smooth value as printed in reports (ceiling)."""
    # absorb float noise so exact integers are not bumped up
    return math.ceil(round(smooth, 9))


def channel_name(spec: ChannelSpec) -> str:
    if spec.width_bits == 8:
        return f"{spec.frame_id}_byte_{spec.index}"
    return f"{spec.frame_id}_{spec.endianness.value}_{WIDTH_WORDS[spec.width_bits]}_bit_{spec.index}"


_SEPARATORS = re.compile(r"[_\s]+")


def parse_channel_name(name: str) -> ChannelSpec:
    """Parse ``125_lsb_sixteen_bit_2`` or ``241 byte 1`` style names.

    Underscores and whitespace are interchangeable separators.
    """
    if not name or not name.strip():
        raise ChannelNameError("empty channel name")
    tokens = _SEPARATORS.split(name.strip().lower())
    def _int(token: str, what: str) -> int:
        if not token.isdigit():
            raise ChannelNameError(f"{what} {token!r} is not a non-negative integer in {name!r}")
        return int(token)

    frame_id = _int(tokens[0], "frame id")
    rest = tokens[1:]
    try:
        if rest and rest[0] == "byte":
            if len(rest) != 2:
                raise ChannelNameError(f"expected '<id>_byte_<index>', got {name!r}")
            return ChannelSpec(frame_id, 8, _int(rest[1], "index"))
        if not rest or rest[0] not in ("msb", "lsb"):
            bad = rest[0] if rest else "<end>"
            raise ChannelNameError(f"expected 'byte', 'msb' or 'lsb', got {bad!r} in {name!r}")
        if len(rest) != 4:
            raise ChannelNameError(f"expected '<id>_<msb|lsb>_<width>_bit_<index>', got {name!r}")
        endian, word, bit, index = rest
        if word not in _WORD_WIDTHS:
            raise ChannelNameError(f"width word {word!r} not in nine..sixteen in {name!r}")
        if bit != "bit":
            raise ChannelNameError(f"expected 'bit', got {bit!r} in {name!r}")
        return ChannelSpec(frame_id, _WORD_WIDTHS[word], _int(index, "index"), Endianness(endian))
    except ChannelNameError:
        raise
    except ValueError as exc:
        raise ChannelNameError(f"{name!r}: {exc}") from exc
