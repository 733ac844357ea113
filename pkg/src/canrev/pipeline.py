"""The two analysis algorithms.

``rate_of_change_correlation`` sweeps every candidate channel of a drive
recording against an IMU action signal, optionally dropping the time steps
where GPS says the vehicle is stationary. ``discover_controls`` then takes the
best correlated channels and ranks them by how smoothly they move during a
calibration recording of the control in question.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .model import (
    Action,
    CanRevError,
    ChannelSpec,
    DiscoveryRow,
    Recording,
    RecordingKind,
)
from .signals import (
    PreprocessConfig,
    action_signal,
    apply_mask,
    imu_grid,
    motion_mask,
    pearson_rows,
)
from .tokenizer import FrameBlock, enumerate_channels, group_frames, hold_indices

log = logging.getLogger(__name__)

# signal variants correlated for the composite steering action, in tie-break order
STEER_VARIANTS = ((Action.STEER_LEFT, "left"), (Action.STEER_RIGHT, "right"), (Action.STEER, "both"))


class AnalysisError(CanRevError):
    """The analysis cannot produce a result for these inputs."""


@dataclass(frozen=True)
class DiscoveryConfig:
    top_n: int = 25
    min_unique: int = 16
    min_correlation: float = 0.5

    def __post_init__(self):
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")


@dataclass(frozen=True)
class AnalysisConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    discovery: DiscoveryConfig = field(default_factory=DiscoveryConfig)
    use_gps_mask: bool = True
    top_n: int = 25
    workers: Optional[int] = None

    def __post_init__(self):
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")

    @property
    def max_workers(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        return min(8, os.cpu_count() or 1)


@dataclass(frozen=True)
class CorrelationRow:
    spec: ChannelSpec
    correlation: float
    constant: bool = False
    direction: Optional[str] = None


@dataclass(frozen=True)
class CorrelationTable:
    action: Action
    rows: tuple[CorrelationRow, ...]
    masking_used: bool
    top_n: int = 25
    channels_tested: int = 0
    samples_used: int = 0
    samples_total: int = 0

    def __len__(self) -> int:
        return len(self.rows)

    def lookup(self, spec: ChannelSpec) -> Optional[CorrelationRow]:
        for row in self.rows:
            if row.spec == spec:
                return row
        return None


@dataclass(frozen=True)
class PreparedDrive:
    """Action signal(s) and motion mask on the shared analysis grid."""

    grid: np.ndarray
    keep: np.ndarray
    signals: tuple[tuple[str | None, np.ndarray], ...]
    masking_used: bool


def _sort_key(row):
    return (-row.correlation, row.spec.name)


def prepare_drive(drive: Recording, action: Action | str, cfg: AnalysisConfig) -> PreparedDrive:
    action = Action(action)
    if drive.kind is not RecordingKind.DRIVE:
        raise AnalysisError(f"correlation needs a drive recording, got {drive.kind.value}")
    if not drive.imu:
        raise AnalysisError("drive recording has no IMU samples")
    pre = cfg.preprocess
    grid = imu_grid(drive.imu, pre)
    if cfg.use_gps_mask:
        if not drive.gps:
            raise AnalysisError("GPS required for drive analysis with masking")
        keep = motion_mask(drive.gps, grid, pre).moving
        if not keep.any():
            raise AnalysisError("no motion in recording")
    else:
        keep = np.ones(len(grid), dtype=bool)

    variants = STEER_VARIANTS if action is Action.STEER else ((action, None),)
    signals = []
    for variant, direction in variants:
        values = apply_mask(action_signal(drive.imu, variant, pre, grid).values, keep)
        if len(values) >= 2 and np.ptp(values) > 0:
            signals.append((direction, values))
    if not signals:
        raise AnalysisError(f"{action.value} signal is constant over the analysed samples")
    return PreparedDrive(grid, keep, tuple(signals), cfg.use_gps_mask)


def block_matrix(
    block: FrameBlock, specs: Sequence[ChannelSpec], grid: np.ndarray, keep: np.ndarray
) -> np.ndarray:
    """Held channel values on ``grid`` (one row per spec), masked by ``keep``."""
    out = np.empty((len(specs), int(keep.sum())), dtype=np.float64)
    for row, spec in enumerate(specs):
        times, values = block.decode(spec)
        out[row] = values[hold_indices(times, grid)][keep]
    return out


def _correlate_block(block: FrameBlock, prepared: PreparedDrive) -> list[CorrelationRow]:
    specs = enumerate_channels(block.frame_id, block.max_length)
    if not specs:
        return []
    matrix = block_matrix(block, specs, prepared.grid, prepared.keep)
    best_r = np.full(len(specs), -np.inf)
    best_dir: list[Optional[str]] = [None] * len(specs)
    constant = np.zeros(len(specs), dtype=bool)
    for direction, y in prepared.signals:
        r, const = pearson_rows(matrix, y)
        constant |= const
        better = r > best_r
        best_r = np.where(better, r, best_r)
        for i in np.flatnonzero(better):
            best_dir[i] = direction
    return [
        CorrelationRow(spec, float(best_r[i]), bool(constant[i]), best_dir[i])
        for i, spec in enumerate(specs)
    ]


def correlate_all(
    drive: Recording, action: Action | str, cfg: AnalysisConfig | None = None
) -> tuple[list[CorrelationRow], PreparedDrive]:
    """Correlation of every enumerated channel, sorted, untruncated."""
    cfg = cfg or AnalysisConfig()
    prepared = prepare_drive(drive, action, cfg)
    blocks = list(group_frames(drive.can).values())
    if not blocks:
        raise AnalysisError("drive recording has no CAN frames")
    workers = cfg.max_workers
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _correlate_block(b, prepared), blocks))
    else:
        parts = [_correlate_block(b, prepared) for b in blocks]
    rows = [row for part in parts for row in part]
    rows.sort(key=_sort_key)
    return rows, prepared


def rate_of_change_correlation(
    drive: Recording, action: Action | str, cfg: AnalysisConfig | None = None
) -> CorrelationTable:
    cfg = cfg or AnalysisConfig()
    rows, prepared = correlate_all(drive, action, cfg)
    return CorrelationTable(
        action=Action(action),
        rows=tuple(rows[: cfg.top_n]),
        masking_used=prepared.masking_used,
        top_n=cfg.top_n,
        channels_tested=len(rows),
        samples_used=int(prepared.keep.sum()),
        samples_total=len(prepared.grid),
    )


def channel_metrics(values: np.ndarray) -> tuple[int, int, float]:
    """``(range, unique, stdev of first differences)`` of a raw value sequence.

    The standard deviation is the population form (ddof = 0).
    """
    values = np.asarray(values, dtype=np.int64)
    if len(values) == 0:
        return 0, 0, 0.0
    value_range = int(values.max() - values.min())
    unique = int(len(np.unique(values)))
    stdev = float(np.std(np.diff(values))) if len(values) > 1 else 0.0
    return value_range, unique, stdev


def analyze_calibration(cal: Recording, candidates: Sequence[ChannelSpec]) -> list[DiscoveryRow]:
    """Calibration metrics per candidate, from the native frame sequence.

    Candidates missing from the calibration or constant in it are dropped.
    """
    if not cal.kind.is_calibration:
        raise AnalysisError(f"expected a calibration recording, got {cal.kind.value}")
    if not candidates:
        raise AnalysisError("no candidate channels to analyse")
    blocks = group_frames(cal.can)
    rows = []
    for spec in candidates:
        block = blocks.get(spec.frame_id)
        if block is None:
            log.warning("frame %d absent from calibration; dropping %s", spec.frame_id, spec.name)
            continue
        _, values = block.decode(spec)
        if len(values) == 0:
            log.warning("no calibration frames long enough for %s", spec.name)
            continue
        value_range, unique, stdev = channel_metrics(values)
        if value_range == 0:
            continue
        rows.append(DiscoveryRow(spec, value_range, unique, stdev))
    return rows


def select_smoothest(rows: Iterable[DiscoveryRow], cfg: DiscoveryConfig) -> list[DiscoveryRow]:
    kept = [
        r
        for r in rows
        if r.unique >= cfg.min_unique
        and r.correlation is not None
        and r.correlation >= cfg.min_correlation
    ]
    if not kept:
        raise AnalysisError("no candidate channels survive discovery")
    kept.sort(key=lambda r: (r.smooth_display, -r.correlation, r.spec.name))
    floor = kept[0].smooth_display
    return [r for r in kept if r.smooth_display == floor]


def discover_controls(
    table: CorrelationTable, cal: Recording, cfg: DiscoveryConfig | None = None
) -> list[DiscoveryRow]:
    cfg = cfg or DiscoveryConfig()
    if not table.rows:
        raise AnalysisError("correlation table is empty")
    top = table.rows[: cfg.top_n]
    by_spec = {row.spec: row for row in top}
    rows = [
        replace(r, correlation=by_spec[r.spec].correlation, direction=by_spec[r.spec].direction)
        for r in analyze_calibration(cal, [row.spec for row in top])
    ]
    return select_smoothest(rows, cfg)


@dataclass(frozen=True)
class ActionReport:
    action: Action
    table: Optional[CorrelationTable] = None
    discovery: Optional[tuple[DiscoveryRow, ...]] = None
    error: Optional[str] = None


FULL_ANALYSIS_ACTIONS = (Action.DECELERATE, Action.ACCELERATE, Action.STEER)


def run_full_analysis(
    drive: Recording,
    calibrations: Mapping[object, Recording] | Iterable[Recording] = (),
    cfg: AnalysisConfig | None = None,
    actions: Sequence[Action] = FULL_ANALYSIS_ACTIONS,
) -> dict[Action, ActionReport]:
    """Correlation for every action, plus discovery where a calibration of the
    matching kind is supplied. A failing action does not abort the others."""
    cfg = cfg or AnalysisConfig()
    cals = calibrations.values() if isinstance(calibrations, Mapping) else calibrations
    by_kind = {c.kind: c for c in cals}
    reports = {}
    for action in actions:
        action = Action(action)
        try:
            table = rate_of_change_correlation(drive, action, cfg)
        except CanRevError as exc:
            reports[action] = ActionReport(action, error=str(exc))
            continue
        cal = by_kind.get(action.calibration_kind)
        if cal is None:
            reports[action] = ActionReport(action, table)
            continue
        try:
            found = discover_controls(table, cal, cfg.discovery)
        except CanRevError as exc:
            reports[action] = ActionReport(action, table, error=str(exc))
            continue
        reports[action] = ActionReport(action, table, tuple(found))
    return reports
