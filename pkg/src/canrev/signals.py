"""IMU/GPS preprocessing and the Pearson correlation primitive."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import (
    Action,
    ActionSignal,
    CanRevError,
    GpsSample,
    ImuSample,
    MotionMask,
)
from .tokenizer import DEFAULT_GRID_STEP, hold_indices, make_grid


class UndefinedCorrelationError(CanRevError, ValueError):
    """Pearson correlation is undefined (too short or zero variance)."""


@dataclass(frozen=True)
class PreprocessConfig:
    smoothing_window: int = 25
    speed_threshold: float = 0.1
    grid_step: float = DEFAULT_GRID_STEP

    def __post_init__(self):
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError("smoothing_window must be an odd integer >= 1")
        if self.speed_threshold < 0:
            raise ValueError("speed_threshold must be >= 0")
        if self.grid_step <= 0:
            raise ValueError("grid_step must be positive")


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average. The window shrinks at the edges instead of
    padding, so a constant input stays constant."""
    values = np.asarray(values, dtype=np.float64)
    if window == 1 or len(values) == 0:
        return values.copy()
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(values)))
    n = len(values)
    lo = np.clip(np.arange(n) - half, 0, n)
    hi = np.clip(np.arange(n) + half + 1, 0, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def imu_grid(imu: Sequence[ImuSample], cfg: PreprocessConfig) -> np.ndarray:
    if not imu:
        raise ValueError("IMU stream is empty")
    return make_grid(imu[0].timestamp, imu[-1].timestamp, cfg.grid_step)


def action_signal(
    imu: Sequence[ImuSample],
    action: Action | str,
    cfg: PreprocessConfig | None = None,
    grid: np.ndarray | None = None,
) -> ActionSignal:
    """Rectified, smoothed IMU magnitude for one vehicle action on ``grid``.

    The default grid spans the IMU stream at ``cfg.grid_step``.
    """
    action = Action(action)
    cfg = cfg or PreprocessConfig()
    if not imu:
        raise ValueError("IMU stream is empty")
    if grid is None:
        grid = imu_grid(imu, cfg)
    times = np.fromiter((s.timestamp for s in imu), dtype=np.float64, count=len(imu))
    if action in (Action.DECELERATE, Action.ACCELERATE):
        axis = np.fromiter((s.ay for s in imu), dtype=np.float64, count=len(imu))
    else:
        axis = np.fromiter((s.ax for s in imu), dtype=np.float64, count=len(imu))
    smoothed = moving_average(axis[hold_indices(times, grid)], cfg.smoothing_window)
    if action in (Action.DECELERATE, Action.STEER_LEFT):
        values = np.maximum(smoothed, 0.0)
    elif action is Action.STEER:
        values = np.abs(smoothed)
    else:
        values = np.maximum(-smoothed, 0.0)
    return ActionSignal(action, grid, values)


def motion_mask(
    gps: Sequence[GpsSample], grid: np.ndarray, cfg: PreprocessConfig | None = None
) -> MotionMask:
    cfg = cfg or PreprocessConfig()
    if not gps:
        raise ValueError("GPS stream is empty; disable masking instead")
    times = np.fromiter((g.timestamp for g in gps), dtype=np.float64, count=len(gps))
    speed = np.fromiter((g.speed for g in gps), dtype=np.float64, count=len(gps))
    moving = speed[hold_indices(times, grid)] > cfg.speed_threshold
    return MotionMask(grid, moving)


def apply_mask(values, mask: MotionMask | np.ndarray) -> np.ndarray:
    moving = mask.moving if isinstance(mask, MotionMask) else np.asarray(mask, dtype=bool)
    values = np.asarray(values)
    if values.shape[-1] != len(moving):
        raise ValueError(f"length mismatch: {values.shape[-1]} values, {len(moving)} mask points")
    return values[..., moving]


def pearson(x, y) -> float:
    """Sample Pearson correlation coefficient.

    Raises UndefinedCorrelationError for fewer than two points or a constant
    input.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two 1-D sequences of equal length")
    if len(x) < 2:
        raise UndefinedCorrelationError("need at least two points")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError("constant input has no correlation")
    dx = x - x.mean()
    dy = y - y.mean()
    r = float(np.dot(dx, dy) / np.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))
    return min(1.0, max(-1.0, r))


def pearson_rows(matrix: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Correlate every row of ``matrix`` against ``y``.

    Returns ``(r, constant)``; constant rows get r = 0 and constant = True.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != len(y):
        raise ValueError("matrix columns must match y")
    if len(y) < 2:
        raise UndefinedCorrelationError("need at least two points")
    if np.ptp(y) == 0:
        raise UndefinedCorrelationError("reference signal is constant")
    constant = np.ptp(matrix, axis=1) == 0
    dy = y - y.mean()
    dm = matrix - matrix.mean(axis=1, keepdims=True)
    denom = np.sqrt(np.einsum("ij,ij->i", dm, dm) * np.dot(dy, dy))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = dm @ dy / denom
    r[constant] = 0.0
    return np.clip(r, -1.0, 1.0), constant
