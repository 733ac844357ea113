"""Recover brake, accelerator and steering CAN channels by correlating
tokenized CAN payloads with IMU motion, masked by GPS speed."""

from .model import (
    Action,
    CanFrame,
    ChannelSpec,
    DiscoveryRow,
    Endianness,
    GpsSample,
    ImuSample,
    Recording,
    RecordingKind,
    channel_name,
    parse_channel_name,
)
from .pipeline import (
    AnalysisConfig,
    DiscoveryConfig,
    analyze_calibration,
    discover_controls,
    rate_of_change_correlation,
    run_full_analysis,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AnalysisConfig",
    "CanFrame",
    "ChannelSpec",
    "DiscoveryConfig",
    "DiscoveryRow",
    "Endianness",
    "GpsSample",
    "ImuSample",
    "Recording",
    "RecordingKind",
    "analyze_calibration",
    "channel_name",
    "discover_controls",
    "parse_channel_name",
    "rate_of_change_correlation",
    "run_full_analysis",
]
