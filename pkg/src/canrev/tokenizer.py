"""Channel enumeration and payload decoding.

A channel is either a single payload byte or a W-bit field (9 <= W <= 16)
cut from the two-byte window starting at a byte index. The window is read as
a 16-bit word in the channel's byte order (MSB: big-endian, LSB:
little-endian) and the channel value is the low W bits of that word.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import (
    MAX_PAYLOAD,
    CanFrame,
    CanRevError,
    ChannelSeries,
    ChannelSpec,
    Endianness,
)

log = logging.getLogger(__name__)

DEFAULT_GRID_STEP = 0.01


class ExtractionError(CanRevError, ValueError):
    """A channel does not fit inside the payload it was applied to."""


class SeriesUnavailableError(CanRevError):
    """No decodable frames exist for a channel."""


def enumerate_channels(frame_id: int, payload_len: int) -> list[ChannelSpec]:
    """All candidate channels for a frame of ``payload_len`` bytes.

    Order: byte channels by index, then widths 9..16, MSB before LSB, then
    window index ascending. A payload of L bytes yields L + 16*(L-1) specs.
    """
    if not 0 <= payload_len <= MAX_PAYLOAD:
        raise ValueError(f"payload length {payload_len} not in 0..{MAX_PAYLOAD}")
    specs = [ChannelSpec(frame_id, 8, i) for i in range(payload_len)]
    for width in range(9, 17):
        for endian in (Endianness.MSB, Endianness.LSB):
            specs.extend(ChannelSpec(frame_id, width, i, endian) for i in range(payload_len - 1))
    return specs


def catalog_size(payload_len: int) -> int:
    return payload_len + 16 * max(payload_len - 1, 0)


@dataclass(frozen=True)
class ChannelCatalog:
    payload_lengths: dict[int, int]
    channels: dict[int, tuple[ChannelSpec, ...]]

    @classmethod
    def from_frames(cls, frames: Iterable[CanFrame]) -> "ChannelCatalog":
        lengths: dict[int, int] = {}
        for frame in frames:
            lengths[frame.frame_id] = max(lengths.get(frame.frame_id, 0), len(frame.payload))
        lengths = dict(sorted(lengths.items()))
        channels = {fid: tuple(enumerate_channels(fid, n)) for fid, n in lengths.items()}
        return cls(lengths, channels)

    def __iter__(self):
        for specs in self.channels.values():
            yield from specs

    def __len__(self) -> int:
        return sum(len(s) for s in self.channels.values())


def _mask(width: int) -> int:
    return (1 << width) - 1


def extract_value(spec: ChannelSpec, payload: bytes) -> int:
    if spec.span > len(payload):
        raise ExtractionError(
            f"{spec.name} needs {spec.span} bytes, payload has {len(payload)}"
        )
    if spec.width_bits == 8:
        return payload[spec.index]
    hi, lo = payload[spec.index], payload[spec.index + 1]
    word = hi << 8 | lo if spec.endianness is Endianness.MSB else lo << 8 | hi
    return word & _mask(spec.width_bits)


def encode_value(spec: ChannelSpec, value: int, payload: bytes) -> bytes:
    """Write ``value`` into the channel's bits; all other bits are kept."""
    if not 0 <= value < 1 << spec.width_bits:
        raise ValueError(f"value {value} does not fit in {spec.width_bits} bits")
    if spec.span > len(payload):
        raise ExtractionError(
            f"{spec.name} needs {spec.span} bytes, payload has {len(payload)}"
        )
    out = bytearray(payload)
    if spec.width_bits == 8:
        out[spec.index] = value
        return bytes(out)
    i = spec.index
    msb = spec.endianness is Endianness.MSB
    word = out[i] << 8 | out[i + 1] if msb else out[i + 1] << 8 | out[i]
    mask = _mask(spec.width_bits)
    word = (word & ~mask & 0xFFFF) | value
    if msb:
        out[i], out[i + 1] = word >> 8, word & 0xFF
    else:
        out[i + 1], out[i] = word >> 8, word & 0xFF
    return bytes(out)


@dataclass(frozen=True)
class FrameBlock:
    """All frames of one ID as arrays: the unit the channel sweep works on."""

    frame_id: int
    times: np.ndarray
    payloads: np.ndarray  # (n, 8) uint8, zero padded
    lengths: np.ndarray

    @classmethod
    def from_frames(cls, frame_id: int, frames: Sequence[CanFrame]) -> "FrameBlock":
        n = len(frames)
        payloads = np.zeros((n, MAX_PAYLOAD), dtype=np.uint8)
        lengths = np.empty(n, dtype=np.int64)
        times = np.empty(n, dtype=np.float64)
        for row, frame in enumerate(frames):
            k = len(frame.payload)
            payloads[row, :k] = np.frombuffer(frame.payload, dtype=np.uint8)
            lengths[row] = k
            times[row] = frame.timestamp
        return cls(frame_id, times, payloads, lengths)

    @property
    def max_length(self) -> int:
        return int(self.lengths.max()) if len(self.lengths) else 0

    def decode(self, spec: ChannelSpec) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(times, values)`` for frames long enough to hold ``spec``."""
        keep = self.lengths >= spec.span
        rows = self.payloads[keep]
        if spec.width_bits == 8:
            values = rows[:, spec.index].astype(np.int64)
        else:
            hi = rows[:, spec.index].astype(np.int64)
            lo = rows[:, spec.index + 1].astype(np.int64)
            if spec.endianness is Endianness.LSB:
                hi, lo = lo, hi
            values = (hi << 8 | lo) & _mask(spec.width_bits)
        return self.times[keep], values


def group_frames(frames: Iterable[CanFrame]) -> dict[int, FrameBlock]:
    by_id: dict[int, list[CanFrame]] = {}
    for frame in frames:
        by_id.setdefault(frame.frame_id, []).append(frame)
    return {fid: FrameBlock.from_frames(fid, by_id[fid]) for fid in sorted(by_id)}


def make_grid(t0: float, t1: float, step: float = DEFAULT_GRID_STEP) -> np.ndarray:
    if step <= 0:
        raise ValueError("grid step must be positive")
    if t1 < t0:
        raise ValueError("grid span ends before it starts")
    n = int(np.floor((t1 - t0) / step + 1e-9)) + 1
    return t0 + step * np.arange(n)


def hold_indices(sample_times: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Zero-order-hold lookup: index of the latest sample at or before each
    grid point. Grid points before the first sample map to sample 0."""
    idx = np.searchsorted(sample_times, grid, side="right") - 1
    return np.clip(idx, 0, None)


def build_series(
    frames: Sequence[CanFrame],
    spec: ChannelSpec,
    grid_step: float = DEFAULT_GRID_STEP,
    span: tuple[float, float] | None = None,
) -> ChannelSeries:
    mine = [f for f in frames if f.frame_id == spec.frame_id]
    block = FrameBlock.from_frames(spec.frame_id, mine)
    times, values = block.decode(spec)
    if len(times) == 0:
        raise SeriesUnavailableError(f"no decodable frames for {spec.name}")
    if span is None:
        span = (float(times[0]), float(times[-1]))
    grid = make_grid(span[0], span[1], grid_step)
    return series_on_grid(spec, times, values, grid)


def series_on_grid(
    spec: ChannelSpec, times: np.ndarray, values: np.ndarray, grid: np.ndarray
) -> ChannelSeries:
    if len(times) == 0:
        raise SeriesUnavailableError(f"no decodable frames for {spec.name}")
    held = values[hold_indices(times, grid)]
    return ChannelSeries(spec, grid, held, float(times[0]))
