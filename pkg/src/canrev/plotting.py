"""Figures written next to the CSV/JSON reports."""

from __future__ import annotations

import os
from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .model import Action, ChannelSpec, DiscoveryRow, Recording
from .pipeline import AnalysisConfig, CorrelationTable, block_matrix, prepare_drive
from .signals import action_signal
from .tokenizer import group_frames

# fixed metadata keeps PNG output byte-stable between runs
_PNG_METADATA = {"Software": None}

_LABELS = {
    Action.DECELERATE: "deceleration (m/s$^2$)",
    Action.ACCELERATE: "acceleration (m/s$^2$)",
    Action.STEER_LEFT: "left acceleration (m/s$^2$)",
    Action.STEER_RIGHT: "right acceleration (m/s$^2$)",
    Action.STEER: "|lateral acceleration| (m/s$^2$)",
}


def _new_figure(nrows: int = 1, height: float = 3.0):
    fig = Figure(figsize=(8.0, height * nrows), dpi=100)
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, 1, squeeze=False)[:, 0]
    return fig, axes


def _save(fig: Figure, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_PNG_METADATA)
    return path


def _masked(values: np.ndarray, keep: np.ndarray) -> np.ndarray:
    out = np.asarray(values, dtype=float).copy()
    out[~keep] = np.nan
    return out


def plot_action_signal(drive: Recording, action: Action, cfg: AnalysisConfig, path: str) -> str:
    """Action signal over the drive, unmasked on top and GPS-masked below."""
    action = Action(action)
    prepared = prepare_drive(drive, action, cfg)
    signal = action_signal(drive.imu, action, cfg.preprocess, prepared.grid)
    fig, (top, bottom) = _new_figure(2)
    top.plot(signal.grid, signal.values, lw=0.6, color="tab:blue")
    top.set_title(f"{action.value}: all samples")
    bottom.plot(signal.grid, _masked(signal.values, prepared.keep), lw=0.6, color="tab:green")
    bottom.set_title(f"{action.value}: moving samples only" if prepared.masking_used else f"{action.value}: no GPS mask")
    for ax in (top, bottom):
        ax.set_ylabel(_LABELS[action])
        ax.grid(True, alpha=0.3)
    bottom.set_xlabel("time (s)")
    return _save(fig, path)


def plot_correlations(table: CorrelationTable, path: str) -> str:
    rows = list(table.rows)
    fig, (ax,) = _new_figure(1, height=max(3.0, 0.22 * len(rows) + 1))
    names = [r.spec.name for r in rows][::-1]
    values = [r.correlation for r in rows][::-1]
    ax.barh(np.arange(len(rows)), values, color="tab:blue")
    ax.set_yticks(np.arange(len(rows)))
    ax.set_yticklabels(names, fontsize=7)
    ax.set_xlim(min(0.0, min(values, default=0.0)), 1.0)
    ax.set_xlabel("Pearson correlation")
    ax.set_title(f"top {len(rows)} channels for {table.action.value}"
                 + (" (GPS masked)" if table.masking_used else ""))
    return _save(fig, path)


def plot_channel(
    spec: ChannelSpec,
    calibration: Recording,
    drive: Recording,
    action: Action,
    cfg: AnalysisConfig,
    path: str,
) -> str:
    """Calibration trace of one channel on top, its drive trace below."""
    fig, (top, bottom) = _new_figure(2)
    block = group_frames(calibration.can).get(spec.frame_id)
    if block is not None:
        t, v = block.decode(spec)
        top.plot(t, v, lw=0.8, color="tab:red")
    top.set_title(f"{spec.name}: calibration ({calibration.kind.value})")
    prepared = prepare_drive(drive, action, cfg)
    drive_block = group_frames(drive.can).get(spec.frame_id)
    if drive_block is not None:
        everything = np.ones(len(prepared.grid), dtype=bool)
        held = block_matrix(drive_block, [spec], prepared.grid, everything)[0]
        bottom.plot(prepared.grid, _masked(held, prepared.keep), lw=0.6, color="tab:purple")
    bottom.set_title(f"{spec.name}: drive" + (" (stationary samples removed)" if prepared.masking_used else ""))
    for ax in (top, bottom):
        ax.set_ylabel("raw value")
        ax.grid(True, alpha=0.3)
    bottom.set_xlabel("time (s)")
    return _save(fig, path)


def render_report_figures(
    out_dir: str,
    table: CorrelationTable,
    drive: Recording,
    cfg: AnalysisConfig,
    calibration: Recording | None = None,
    discovered: Sequence[DiscoveryRow] = (),
    max_channels: int = 4,
) -> list[str]:
    action = table.action
    paths = [
        plot_action_signal(drive, action, cfg, os.path.join(out_dir, f"{action.value}_signal.png")),
        plot_correlations(table, os.path.join(out_dir, f"{action.value}_correlation.png")),
    ]
    if calibration is not None:
        for row in list(discovered)[:max_channels]:
            name = os.path.join(out_dir, f"{action.value}_{row.spec.name}.png")
            paths.append(plot_channel(row.spec, calibration, drive, action, cfg, name))
    return paths
