"""Readers for the on-disk recording formats.

CAN logs are line oriented and each line is auto-detected as either

* candump: ``(12.500000) can0 0F1#3C00`` (hex ID, hex data), or
* CSV: ``12.5,241,2,3C00`` with columns ``t_s,id_dec,dlc,data_hex``.

IMU and GPS streams are CSV files with a header row (``t_s,ax,ay,az`` and
``t_s,vx,vy,vz[,lat,lon,alt]``). Malformed lines are skipped and counted.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import re
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from .model import (
    CanFrame,
    CanRevError,
    GpsSample,
    ImuSample,
    Recording,
    RecordingKind,
)

log = logging.getLogger(__name__)

CAN_CSV_HEADER = "t_s,id_dec,dlc,data_hex"
IMU_COLUMNS = ("t_s", "ax", "ay", "az")
GPS_COLUMNS = ("t_s", "vx", "vy", "vz")
GPS_OPTIONAL = ("lat", "lon", "alt")

_CANDUMP = re.compile(
    r"^\(\s*(?P<t>\d+(?:\.\d*)?)\s*\)\s+(?P<iface>\S+)\s+"
    r"(?P<id>[0-9A-Fa-f]{1,8})#(?P<data>[0-9A-Fa-f]*)$"
)


class IngestError(CanRevError):
    """A recording file cannot be used at all."""


class FormatError(IngestError, ValueError):
    """A CSV file lacks a required column."""


@dataclass(frozen=True)
class IngestReport:
    frames_read: int = 0
    imu_read: int = 0
    gps_read: int = 0
    dropped_lines: int = 0
    clock_rebase_offset: float = 0.0


def _hex_payload(text: str) -> Optional[bytes]:
    if len(text) % 2 or len(text) > 16:
        return None
    try:
        return bytes.fromhex(text)
    except ValueError:
        return None


def parse_can_line(line: str) -> Optional[CanFrame]:
    """Parse one CAN log line; ``None`` when it matches neither format."""
    line = line.strip()
    m = _CANDUMP.match(line)
    try:
        if m:
            payload = _hex_payload(m["data"])
            if payload is None:
                return None
            return CanFrame(float(m["t"]), int(m["id"], 16), payload)
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            return None
        t, fid, dlc, data = parts
        if not fid.isdigit() or not dlc.isdigit():
            return None
        payload = _hex_payload(data)
        if payload is None or len(payload) != int(dlc):
            return None
        return CanFrame(float(t), int(fid), payload)
    except ValueError:
        return None


def parse_can_lines(lines: Iterable[str]) -> tuple[list[CanFrame], int]:
    """Parse CAN log lines; returns ``(frames sorted by time, dropped)``.

    Blank lines and a CSV header line are neither frames nor dropped.
    """
    frames: list[CanFrame] = []
    dropped = 0
    for line in lines:
        text = line.strip()
        if not text or text.replace(" ", "") == CAN_CSV_HEADER:
            continue
        frame = parse_can_line(text)
        if frame is None:
            dropped += 1
        else:
            frames.append(frame)
    frames.sort(key=lambda f: f.timestamp)
    return frames, dropped


def _open_text(path):
    try:
        return open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc


def _read_can(path) -> tuple[list[CanFrame], int]:
    with _open_text(path) as fh:
        return parse_can_lines(fh)


def read_can_log(path) -> list[CanFrame]:
    return _read_can(path)[0]


def _float(cell: Optional[str]) -> float:
    value = float(cell)
    if not math.isfinite(value):
        raise ValueError(cell)
    return value


def _read_rows(path, required: tuple[str, ...]):
    with _open_text(path) as fh:
        text = fh.read()
    reader = csv.DictReader(io.StringIO(text))
    header = [h.strip() for h in reader.fieldnames or []]
    missing = [c for c in required if c not in header]
    if missing:
        raise FormatError(f"{path}: missing column(s) {', '.join(missing)}")
    reader.fieldnames = header
    return [row for row in reader if any((v or "").strip() for v in row.values())]


def _read_imu(path) -> tuple[list[ImuSample], int]:
    samples, dropped = [], 0
    for row in _read_rows(path, IMU_COLUMNS):
        try:
            samples.append(ImuSample(*(_float(row[c]) for c in IMU_COLUMNS)))
        except (TypeError, ValueError):
            dropped += 1
    samples.sort(key=lambda s: s.timestamp)
    return samples, dropped


def read_imu_csv(path) -> list[ImuSample]:
    return _read_imu(path)[0]


def _optional(cell: Optional[str]) -> Optional[float]:
    if cell is None or not cell.strip():
        return None
    return _float(cell)


def _read_gps(path) -> tuple[list[GpsSample], int]:
    samples, dropped = [], 0
    for row in _read_rows(path, GPS_COLUMNS):
        try:
            core = (_float(row[c]) for c in GPS_COLUMNS)
            extra = (_optional(row.get(c)) for c in GPS_OPTIONAL)
            samples.append(GpsSample(*core, *extra))
        except (TypeError, ValueError):
            dropped += 1
    samples.sort(key=lambda s: s.timestamp)
    return samples, dropped


def read_gps_csv(path) -> list[GpsSample]:
    return _read_gps(path)[0]


def rebase(recording: Recording) -> tuple[Recording, float]:
    """Shift all streams so the earliest timestamp becomes zero."""
    firsts = [s[0].timestamp for s in (recording.can, recording.imu, recording.gps) if s]
    if not firsts:
        return recording, 0.0
    origin = min(firsts)
    if origin == 0:
        return recording, 0.0
    return (
        Recording(
            can=[replace(f, timestamp=f.timestamp - origin) for f in recording.can],
            imu=[replace(s, timestamp=s.timestamp - origin) for s in recording.imu],
            gps=[replace(g, timestamp=g.timestamp - origin) for g in recording.gps],
            kind=recording.kind,
        ),
        origin,
    )


def load_recording(
    can_path,
    imu_path,
    gps_path=None,
    kind: RecordingKind | str = RecordingKind.DRIVE,
    require_gps: bool = True,
) -> tuple[Recording, IngestReport]:
    """Load a recording from its files and rebase it onto a common clock.

    ``require_gps`` applies to drive recordings only; pass False when GPS
    masking is disabled.
    """
    kind = RecordingKind(kind)
    if gps_path is None and kind is RecordingKind.DRIVE and require_gps:
        raise IngestError("GPS required for drive analysis with masking")
    for p in (can_path, imu_path, gps_path):
        if p is not None and not os.path.exists(p):
            raise IngestError(f"no such file: {p}")
    frames, can_dropped = _read_can(can_path)
    imu, imu_dropped = _read_imu(imu_path)
    gps, gps_dropped = _read_gps(gps_path) if gps_path is not None else ([], 0)
    recording, offset = rebase(Recording(frames, imu, gps, kind))
    dropped = can_dropped + imu_dropped + gps_dropped
    if dropped:
        log.warning("dropped %d malformed line(s) while loading %s", dropped, can_path)
    report = IngestReport(len(frames), len(imu), len(gps), dropped, offset)
    return recording, report


def load_recording_dir(directory, kind=None, require_gps: bool = True):
    """Load ``can.csv``/``can.log``, ``imu.csv`` and optional ``gps.csv`` from a
    directory as written by the synthetic generator."""
    from .synth import read_manifest

    can_path = None
    for name in ("can.csv", "can.log"):
        if os.path.exists(os.path.join(directory, name)):
            can_path = os.path.join(directory, name)
            break
    if can_path is None:
        raise IngestError(f"{directory}: no can.csv or can.log")
    gps_path = os.path.join(directory, "gps.csv")
    if kind is None:
        manifest = read_manifest(directory)
        kind = manifest.get("kind", "drive") if manifest else "drive"
    return load_recording(
        can_path,
        os.path.join(directory, "imu.csv"),
        gps_path if os.path.exists(gps_path) else None,
        kind,
        require_gps,
    )
