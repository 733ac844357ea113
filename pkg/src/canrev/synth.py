"""Ground-truth synthetic recordings.

A scripted scenario (piecewise pedal / steering inputs) drives a point-mass
vehicle model. The result is rendered as IMU samples at 100 Hz, GPS velocity
at 1 Hz and CAN traffic: three frames carrying the control positions in known
channels plus a set of decoy frames (constants, counters, a clock, random
walks, noise). Every value is rounded to what the file writers print, so a
recording written to disk and read back is identical to the in-memory one.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import (
    CanFrame,
    ChannelSpec,
    Endianness,
    GpsSample,
    ImuSample,
    Recording,
    RecordingKind,
)
from .tokenizer import encode_value

IMU_RATE = 100.0
GPS_RATE = 1.0
CONTROL_FRAME_RATE = 50.0
GRAVITY = 9.81
ORIGIN_LAT, ORIGIN_LON, ORIGIN_ALT = 46.9, -96.8, 274.0
EARTH_RADIUS = 6_371_000.0
DIGITS = 6


class ScenarioError(ValueError):
    """A scenario definition is invalid."""


@dataclass(frozen=True)
class Segment:
    """Control inputs over ``[start, end)``.

    Levels are constant unless a matching ``*_end`` value is given, in which
    case the input ramps linearly to it across the segment.
    """

    start: float
    end: float
    brake: float = 0.0
    accel: float = 0.0
    steer: float = 0.0
    brake_end: Optional[float] = None
    accel_end: Optional[float] = None
    steer_end: Optional[float] = None

    def levels(self, name: str) -> tuple[float, float]:
        begin = getattr(self, name)
        end = getattr(self, f"{name}_end")
        return begin, begin if end is None else end


@dataclass(frozen=True)
class Scenario:
    duration: float
    segments: tuple[Segment, ...]
    noise: float = 0.05
    seed: int = 0
    kind: RecordingKind = RecordingKind.DRIVE

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "kind", RecordingKind(self.kind))
        validate_scenario(self)


def validate_scenario(sc: Scenario) -> None:
    if not sc.duration > 0:
        raise ScenarioError("duration must be positive")
    if sc.noise < 0:
        raise ScenarioError("noise must be >= 0")
    if not sc.segments:
        raise ScenarioError("scenario has no segments")
    eps = 1e-9
    if abs(sc.segments[0].start) > eps:
        raise ScenarioError("first segment must start at 0")
    if abs(sc.segments[-1].end - sc.duration) > eps:
        raise ScenarioError("segments must end at the scenario duration")
    for prev, seg in zip(sc.segments, sc.segments[1:]):
        if abs(prev.end - seg.start) > eps:
            raise ScenarioError(f"gap or overlap between segments at t={prev.end}")
    for seg in sc.segments:
        if not seg.end > seg.start:
            raise ScenarioError(f"empty segment at t={seg.start}")
        for name, lo in (("brake", 0.0), ("accel", 0.0), ("steer", -1.0)):
            for level in seg.levels(name):
                if not lo <= level <= 1.0:
                    raise ScenarioError(f"{name} level {level} out of range at t={seg.start}")


@dataclass(frozen=True)
class Gains:
    """Vehicle response at full input. Lateral acceleration scales with
    ``speed / ref_speed`` so ``steer`` is reached at the reference speed."""

    accel: float = 3.0
    brake: float = 5.0
    steer: float = 4.0
    ref_speed: float = 10.0


@dataclass(frozen=True)
class Decoy:
    frame_id: int
    kind: str
    rate: float


@dataclass(frozen=True)
class VehicleLayout:
    brake_spec: ChannelSpec = ChannelSpec(190, 16, 1, Endianness.MSB)
    accel_spec: ChannelSpec = ChannelSpec(201, 12, 2, Endianness.MSB)
    steer_spec: ChannelSpec = ChannelSpec(564, 8, 2)
    brake_full: int = 450
    accel_full: int = 3000
    steer_center: int = 128
    steer_full: int = 100
    decoys: tuple[Decoy, ...] = field(default_factory=lambda: DEFAULT_DECOYS)
    layout_seed: int = 1234

    def encode_controls(self, brake, accel, steer):
        return (
            int(round(brake * self.brake_full)),
            int(round(accel * self.accel_full)),
            int(round(self.steer_center + steer * self.steer_full)),
        )


_DECOY_KINDS = ("constant", "counter", "walk16", "noise", "clock", "walk8", "ramp16", "sine")
_DECOY_IDS = (
    100, 118, 133, 170, 209, 250, 300, 321, 388, 417, 452,
    489, 508, 532, 610, 644, 761, 800, 844, 977, 1019, 2244644,
)
_DECOY_RATES = (10.0, 20.0, 25.0, 50.0, 100.0)
DEFAULT_DECOYS = tuple(
    Decoy(fid, _DECOY_KINDS[i % len(_DECOY_KINDS)], _DECOY_RATES[i % len(_DECOY_RATES)])
    for i, fid in enumerate(_DECOY_IDS)
)


@dataclass(frozen=True)
class GroundTruth:
    brake_spec: ChannelSpec
    steer_spec: ChannelSpec
    accel_spec: ChannelSpec
    decoy_ids: tuple[int, ...]
    decoy_specs: tuple[ChannelSpec, ...]
    encoding: dict

    def to_dict(self) -> dict:
        return {
            "brake": self.brake_spec.name,
            "steer": self.steer_spec.name,
            "accel": self.accel_spec.name,
            "decoy_ids": list(self.decoy_ids),
            "decoy_specs": [s.name for s in self.decoy_specs],
            "encoding": self.encoding,
        }


def ground_truth(layout: VehicleLayout) -> GroundTruth:
    return GroundTruth(
        brake_spec=layout.brake_spec,
        steer_spec=layout.steer_spec,
        accel_spec=layout.accel_spec,
        decoy_ids=tuple(d.frame_id for d in layout.decoys),
        decoy_specs=tuple(_decoy_spec(d) for d in layout.decoys),
        encoding={
            "brake": {"full_scale": layout.brake_full},
            "accel": {"full_scale": layout.accel_full},
            "steer": {"center": layout.steer_center, "full_scale": layout.steer_full},
        },
    )


def _decoy_spec(d: Decoy) -> ChannelSpec:
    if d.kind in ("walk16", "ramp16", "sine"):
        return ChannelSpec(d.frame_id, 16, 0, Endianness.MSB)
    if d.kind == "clock":
        return ChannelSpec(d.frame_id, 16, 2, Endianness.MSB)
    if d.kind == "walk8":
        return ChannelSpec(d.frame_id, 8, 3)
    return ChannelSpec(d.frame_id, 8, 0)


def _control_tracks(sc: Scenario, t: np.ndarray) -> dict[str, np.ndarray]:
    starts = np.array([s.start for s in sc.segments])
    seg_idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(starts) - 1)
    tracks = {}
    for name in ("brake", "accel", "steer"):
        begin = np.array([s.levels(name)[0] for s in sc.segments])
        end = np.array([s.levels(name)[1] for s in sc.segments])
        seg_start = starts[seg_idx]
        seg_len = np.array([s.end - s.start for s in sc.segments])[seg_idx]
        frac = np.clip((t - seg_start) / seg_len, 0.0, 1.0)
        tracks[name] = begin[seg_idx] + (end[seg_idx] - begin[seg_idx]) * frac
    return tracks


def _dynamics(sc: Scenario, tracks, gains: Gains, dt: float):
    n = len(tracks["brake"])
    speed = np.zeros(n)
    a_long = np.zeros(n)
    lateral = np.zeros(n)
    heading = np.zeros(n)
    x = np.zeros(n)
    y = np.zeros(n)
    stationary = sc.kind.is_calibration
    v = h = px = py = 0.0
    for i in range(n):
        moving = v > 0
        a = gains.accel * tracks["accel"][i] - gains.brake * tracks["brake"][i] * moving
        if stationary:
            a = 0.0
        lat = gains.steer * tracks["steer"][i] * v / gains.ref_speed
        speed[i], a_long[i], lateral[i], heading[i], x[i], y[i] = v, a, lat, h, px, py
        if moving:
            h += lat / v * dt
        px += v * math.cos(h) * dt
        py += v * math.sin(h) * dt
        # a stopped vehicle cannot decelerate further
        v = max(0.0, v + a * dt)
    return speed, a_long, lateral, heading, x, y


def _ticks(duration: float, rate: float, phase: float = 0.0) -> np.ndarray:
    n = int(math.floor((duration - phase) * rate + 1e-9)) + 1
    return np.round(phase + np.arange(n) / rate, DIGITS)


def _decoy_payloads(d: Decoy, t: np.ndarray, rng: np.random.Generator, fixed: bytes) -> np.ndarray:
    n = len(t)
    p = np.tile(np.frombuffer(fixed, dtype=np.uint8), (n, 1))
    k = np.arange(n)
    if d.kind == "constant":
        return p
    if d.kind == "counter":
        p[:, 0] = k % 256
        p[:, 7] = (k * 3) % 16
    elif d.kind == "noise":
        p[:] = rng.integers(0, 256, size=(n, 8), dtype=np.uint8)
    elif d.kind in ("walk16", "ramp16", "sine", "clock"):
        if d.kind == "walk16":
            steps = rng.normal(0.0, 40.0, size=n)
            value = np.clip(30000 + np.cumsum(steps), 0, 65535)
        elif d.kind == "ramp16":
            value = k % 65536
        elif d.kind == "sine":
            period = 20.0 + (d.frame_id % 17)
            value = 20000 + 15000 * np.sin(2 * np.pi * t / period)
        else:
            value = (np.round(t * 100).astype(np.int64)) % 65536
        value = np.asarray(value).astype(np.int64)
        col = 2 if d.kind == "clock" else 0
        p[:, col] = value >> 8
        p[:, col + 1] = value & 0xFF
        if d.kind == "walk16":
            p[:, 5] = rng.integers(0, 256, size=n, dtype=np.uint8)
    elif d.kind == "walk8":
        steps = rng.choice(np.array([-1, 0, 1]), size=n)
        value = np.clip(128 + np.cumsum(steps), 0, 255)
        p[:, 3] = value
    else:
        raise ScenarioError(f"unknown decoy kind {d.kind!r}")
    return p


def _control_frames(layout: VehicleLayout, tracks, imu_t, duration):
    frames = []
    specs = (layout.brake_spec, layout.accel_spec, layout.steer_spec)
    for slot, spec in enumerate(specs):
        times = _ticks(duration, CONTROL_FRAME_RATE, phase=0.001 * (slot + 1))
        idx = np.clip(np.searchsorted(imu_t, times, side="right") - 1, 0, len(imu_t) - 1)
        for k, (ti, i) in enumerate(zip(times, idx)):
            values = layout.encode_controls(
                tracks["brake"][i], tracks["accel"][i], tracks["steer"][i]
            )
            payload = bytes(7) + bytes([k % 256])
            payload = encode_value(spec, values[slot], payload)
            frames.append(CanFrame(float(ti), spec.frame_id, payload))
    return frames


def simulate(
    scenario: Scenario,
    layout: VehicleLayout | None = None,
    gains: Gains | None = None,
) -> tuple[Recording, GroundTruth]:
    layout = layout or VehicleLayout()
    gains = gains or Gains()
    rng = np.random.default_rng(scenario.seed)
    layout_rng = np.random.default_rng(layout.layout_seed)
    dt = 1.0 / IMU_RATE

    imu_t = _ticks(scenario.duration, IMU_RATE)
    tracks = _control_tracks(scenario, imu_t)
    speed, a_long, lateral, heading, px, py = _dynamics(scenario, tracks, gains, dt)

    noise = scenario.noise
    ax = np.round(lateral + rng.normal(0, noise, len(imu_t)) if noise else lateral, DIGITS)
    ay = np.round(-a_long + rng.normal(0, noise, len(imu_t)) if noise else -a_long, DIGITS)
    az = np.round(GRAVITY + rng.normal(0, noise, len(imu_t)) if noise else np.full(len(imu_t), GRAVITY), DIGITS)
    imu = [ImuSample(float(t), float(a), float(b), float(c)) for t, a, b, c in zip(imu_t, ax, ay, az)]

    gps = []
    if not scenario.kind.is_calibration:
        for t in _ticks(scenario.duration, GPS_RATE):
            i = min(int(round(t * IMU_RATE)), len(imu_t) - 1)
            v, h = speed[i], heading[i]
            lat = ORIGIN_LAT + math.degrees(py[i] / EARTH_RADIUS)
            lon = ORIGIN_LON + math.degrees(px[i] / (EARTH_RADIUS * math.cos(math.radians(ORIGIN_LAT))))
            gps.append(GpsSample(
                float(t),
                round(v * math.cos(h), DIGITS),
                round(v * math.sin(h), DIGITS),
                0.0,
                round(lat, 8),
                round(lon, 8),
                ORIGIN_ALT,
            ))

    frames = _control_frames(layout, tracks, imu_t, scenario.duration)
    for j, decoy in enumerate(layout.decoys):
        fixed = layout_rng.integers(0, 256, size=8, dtype=np.uint8).tobytes()
        times = _ticks(scenario.duration, decoy.rate, phase=round(0.0005 * (j + 7), DIGITS))
        payloads = _decoy_payloads(decoy, times, rng, fixed)
        frames.extend(
            CanFrame(float(t), decoy.frame_id, row.tobytes()) for t, row in zip(times, payloads)
        )
    frames.sort(key=lambda f: (f.timestamp, f.frame_id))
    return Recording(frames, imu, gps, scenario.kind), ground_truth(layout)


def _drive(duration, rows, seed, noise=0.05):
    segments = []
    for start, end, brake, accel, steer in rows:
        if steer:
            # turns ramp in and out rather than stepping
            mid = (start + end) / 2
            segments.append(Segment(start, mid, brake=brake, accel=accel, steer=0.0, steer_end=steer))
            segments.append(Segment(mid, end, brake=brake, accel=accel, steer=steer, steer_end=0.0))
        else:
            segments.append(Segment(start, end, brake=brake, accel=accel))
    return Scenario(duration, segments, noise=noise, seed=seed)


# (start, end, brake, accel, peak steer)
_STOP_AND_GO = [
    (0, 2, 0.3, 0, 0),
    (2, 8, 0, 0.7, 0),
    (8, 14, 0, 0, 0.4),
    (14, 17, 0, 0, -0.3),
    (17, 19, 0.3, 0, 0),
    (19, 22, 0, 0, 0.2),
    (22, 24, 0.6, 0, 0),
    (24, 25, 0.8, 0, 0),
    (25, 35, 0.5, 0, 0),       # stop 1
    (35, 42, 0, 0.5, 0),
    (42, 50, 0, 0, -0.5),
    (50, 53, 0.4, 0, 0),
    (53, 55, 0.7, 0, 0),
    (55, 85, 0.7, 0, 0),       # stop 2, thirty seconds with the brake held
    (85, 93, 0, 0.8, 0),
    (93, 100, 0, 0, 0.6),
    (100, 104, 0.5, 0, 0),
    (104, 108, 0, 0, -0.4),
    (108, 111, 0.9, 0, 0),
    (111, 120, 0.4, 0, 0),     # stop 3
]

_CRUISE = [
    (0, 10, 0, 0.6, 0),
    (10, 20, 0, 0, 0.5),
    (20, 24, 0.3, 0, 0),
    (24, 34, 0, 0.3, -0.5),
    (34, 40, 0, 0, 0),
    (40, 44, 0.5, 0, 0.3),
    (44, 60, 0, 0.2, -0.2),
]


def _calibration(kind: RecordingKind, control: str, seed: int, noise=0.05) -> Scenario:
    if control == "steer":
        # full clockwise (right, negative) then full counter-clockwise and back
        segs = [
            Segment(0, 2),
            Segment(2, 7, steer=0.0, steer_end=-1.0),
            Segment(7, 8, steer=-1.0),
            Segment(8, 18, steer=-1.0, steer_end=1.0),
            Segment(18, 19, steer=1.0),
            Segment(19, 24, steer=1.0, steer_end=0.0),
            Segment(24, 26),
        ]
    else:
        segs = [Segment(0, 2)]
        t = 2.0
        for _ in range(2):
            segs += [
                Segment(t, t + 4, **{control: 0.0, f"{control}_end": 1.0}),
                Segment(t + 4, t + 5, **{control: 1.0}),
                Segment(t + 5, t + 9, **{control: 1.0, f"{control}_end": 0.0}),
                Segment(t + 9, t + 10),
            ]
            t += 10
        segs.append(Segment(t, t + 2))
    return Scenario(segs[-1].end, segs, noise=noise, seed=seed, kind=kind)


def builtin_scenario(name: str, seed: int = 0) -> Scenario:
    if name == "stop-and-go":
        return _drive(120, _STOP_AND_GO, seed)
    if name == "cruise":
        return _drive(60, _CRUISE, seed)
    if name == "idle":
        return _drive(30, [(0, 30, 0, 0, 0)], seed)
    if name == "calibration-brake":
        return _calibration(RecordingKind.CALIBRATION_BRAKE, "brake", seed)
    if name == "calibration-accelerator":
        return _calibration(RecordingKind.CALIBRATION_ACCELERATOR, "accel", seed)
    if name == "calibration-steering":
        return _calibration(RecordingKind.CALIBRATION_STEERING, "steer", seed)
    raise ScenarioError(f"unknown builtin scenario {name!r}; choose from {', '.join(BUILTINS)}")


BUILTINS = (
    "stop-and-go",
    "cruise",
    "idle",
    "calibration-brake",
    "calibration-accelerator",
    "calibration-steering",
)


def scenario_from_dict(data: dict) -> Scenario:
    """Build a scenario from parsed JSON.

    Segments may be objects with ``start``, ``end``, ``brake``, ``accel``,
    ``steer`` (and optional ``*_end`` ramps) or 5-element lists.
    """
    try:
        segments = []
        for seg in data["segments"]:
            if isinstance(seg, dict):
                segments.append(Segment(**seg))
            else:
                segments.append(Segment(*seg))
        return Scenario(
            duration=float(data["duration"]),
            segments=segments,
            noise=float(data.get("noise", 0.05)),
            seed=int(data.get("seed", 0)),
            kind=RecordingKind(data.get("kind", "drive")),
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad scenario: {exc}") from exc


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "duration": sc.duration,
        "noise": sc.noise,
        "seed": sc.seed,
        "kind": sc.kind.value,
        "segments": [{k: v for k, v in asdict(s).items() if v is not None} for s in sc.segments],
    }


def write_recording(
    recording: Recording,
    directory,
    truth: GroundTruth | None = None,
    scenario: Scenario | None = None,
) -> list[str]:
    """Write ``can.csv``, ``imu.csv``, ``gps.csv`` and ``manifest.json``."""
    os.makedirs(directory, exist_ok=True)
    paths = {name: os.path.join(directory, name) for name in ("can.csv", "imu.csv", "gps.csv", "manifest.json")}
    with open(paths["can.csv"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t_s,id_dec,dlc,data_hex\n")
        for f in recording.can:
            fh.write(f"{f.timestamp:.6f},{f.frame_id},{len(f.payload)},{f.payload.hex().upper()}\n")
    with open(paths["imu.csv"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t_s,ax,ay,az\n")
        for s in recording.imu:
            fh.write(f"{s.timestamp:.6f},{s.ax:.6f},{s.ay:.6f},{s.az:.6f}\n")
    with open(paths["gps.csv"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t_s,vx,vy,vz,lat,lon,alt\n")
        for g in recording.gps:
            fh.write(
                f"{g.timestamp:.6f},{g.vx:.6f},{g.vy:.6f},{g.vz:.6f},"
                f"{_opt(g.lat, 8)},{_opt(g.lon, 8)},{_opt(g.alt, 3)}\n"
            )
    manifest = {"kind": recording.kind.value}
    if truth is not None:
        manifest["ground_truth"] = truth.to_dict()
    if scenario is not None:
        manifest["scenario"] = scenario_to_dict(scenario)
    with open(paths["manifest.json"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return list(paths.values())


def _opt(value, digits):
    return "" if value is None else f"{value:.{digits}f}"


def read_manifest(directory) -> Optional[dict]:
    path = os.path.join(directory, "manifest.json")
    if not os.path.exists(path):
        return None
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def simulate_suite(seed: int = 0, drive: str = "stop-and-go") -> dict[str, tuple[Recording, GroundTruth]]:
    """A drive plus brake, accelerator and steering calibrations of the same vehicle."""
    names = (drive, "calibration-brake", "calibration-accelerator", "calibration-steering")
    return {name: simulate(builtin_scenario(name, seed + i)) for i, name in enumerate(names)}
