"""Deterministic simulator and algorithms for radar-aided mmWave beam
management: scene modeling, FMCW radar and beam-scan synthesis, context
acquisition, tracking, blockage prediction, and strategy benchmarking."""

from .blockage import (
    BlockageEvent,
    BlockageRegion,
    PathOption,
    blockage_region,
    event_window,
    mitigate,
    predict_blockage,
)
from .context import (
    PathEstimate,
    ReflectorEstimate,
    UserContext,
    accumulate_reflector,
    acquire_user_context,
    estimate_paths,
    estimate_reflector_point,
)
from .geometry import C0, ORIGIN, Point2, bearing_deg
from .harness import (
    AngleErrorRecord,
    ConfigError,
    EventRecord,
    ExperimentConfig,
    RunResult,
    TrackSnapshot,
    config_from_dict,
    config_to_dict,
    load_config,
    run_and_write,
    run_scenario,
    summarize,
)
from .link import (
    STRATEGIES,
    ChannelPath,
    ChannelState,
    StrategyController,
    ThroughputSample,
    capacity_mbps,
    channel_from_paths,
    controller_step,
    optimal_snr,
    overhead_fraction,
    snr,
)
from .radar import (
    RadarConfig,
    RadarFrame,
    RangeAngleMap,
    dump_frame,
    find_peaks,
    load_frame,
    peak_to_global,
    range_angle_map,
    resolution_params,
    synthesize_frame,
)
from .radio import (
    Beam,
    BeamDecision,
    BeamScanReport,
    RadioConfig,
    beam_gain,
    codebook_angles,
    multi_beam,
    run_beam_scan,
    scan_duration,
    single_beam,
)
from .scenarios import GENERATORS
from .scene import (
    BlockerSpec,
    ReflectorSpec,
    Scene,
    UserSpec,
    compute_paths,
    friis_rss,
    sample_scene,
    validate_scene,
)
from .tracking import (
    ClutterProfile,
    Track,
    recalibrate,
    reflected_path_angle,
    remove_clutter,
    track_step,
    update_object_tracks,
    virtual_bs,
)

__version__ = "0.1.0"

__all__ = [
    "C0", "ORIGIN", "Point2", "bearing_deg",
    "Scene", "UserSpec", "ReflectorSpec", "BlockerSpec", "validate_scene",
    "sample_scene", "compute_paths", "friis_rss",
    "RadarConfig", "RadarFrame", "RangeAngleMap", "resolution_params",
    "synthesize_frame", "range_angle_map", "find_peaks", "peak_to_global",
    "dump_frame", "load_frame",
    "RadioConfig", "Beam", "BeamDecision", "BeamScanReport", "beam_gain",
    "codebook_angles", "scan_duration", "run_beam_scan", "single_beam",
    "multi_beam",
    "UserContext", "PathEstimate", "ReflectorEstimate",
    "acquire_user_context", "estimate_paths", "estimate_reflector_point",
    "accumulate_reflector",
    "ClutterProfile", "Track", "remove_clutter", "track_step", "recalibrate",
    "update_object_tracks", "virtual_bs", "reflected_path_angle",
    "BlockageRegion", "BlockageEvent", "PathOption", "blockage_region",
    "predict_blockage", "event_window", "mitigate",
    "ChannelPath", "ChannelState", "ThroughputSample", "StrategyController",
    "STRATEGIES", "snr", "optimal_snr", "capacity_mbps", "overhead_fraction",
    "channel_from_paths", "controller_step",
    "AngleErrorRecord", "ConfigError", "EventRecord", "ExperimentConfig",
    "RunResult", "TrackSnapshot", "config_from_dict",
    "config_to_dict", "load_config", "run_scenario", "run_and_write",
    "summarize", "GENERATORS",
]
