"""Experiment harness: config handling, the simulation loop, and metrics.

One run advances the scene on a fixed link timestep, synthesizes radar
frames and beam-scan reports on their own (validated) schedules, feeds the
identical observations to every strategy controller, and scores each
decision against the ground-truth channel.  Everything is driven by a
single seed, so reruns are bit-identical, including the written files.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .context import write_reflectors_csv
from .geometry import Point2
from .link import (
    STRATEGIES,
    StrategyController,
    ThroughputSample,
    channel_from_paths,
    controller_step,
)
from .radar import RadarConfig, range_angle_map, synthesize_frame
from .radio import RadioConfig, run_beam_scan
from .tracking import TrackLogRow, track_log_row, write_track_log_csv
from .scenarios import GENERATORS
from .scene import (
    BlockerSpec,
    ReflectorSpec,
    Scene,
    UserSpec,
    compute_paths,
    sample_scene,
    validate_scene,
)


class ConfigError(Exception):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    scene: Scene
    radar: RadarConfig = RadarConfig()
    radio: RadioConfig = RadioConfig()
    strategies: tuple[str, ...] = STRATEGIES
    recal_period: float | None = 0.5   # s between beam scans, None disables
    timestep: float = 0.01             # s link-layer step
    output_dir: str | None = None


# ---------------------------------------------------------------------------
# config (de)serialization
# ---------------------------------------------------------------------------

def _waypoints_from(raw, path: str):
    try:
        return tuple((float(t), Point2(float(x), float(y))) for t, x, y in raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: waypoints must be [t, x, y] rows") from e


def _scene_from_dict(d: dict) -> Scene:
    allowed = {"users", "reflectors", "blockers", "static_clutter",
               "duration", "seed"}
    for k in d:
        if k not in allowed:
            raise ConfigError(f"scene.{k}: unknown key")
    users = tuple(
        UserSpec(user_id=int(u["user_id"]),
                 waypoints=_waypoints_from(u["waypoints"],
                                           f"scene.users[{i}]"),
                 rcs=float(u.get("rcs", 1.0)))
        for i, u in enumerate(d.get("users", ())))
    reflectors = tuple(
        ReflectorSpec(p1=Point2(*map(float, r["p1"])),
                      p2=Point2(*map(float, r["p2"])),
                      reflection_coeff=float(r.get("reflection_coeff", 0.7)))
        for r in d.get("reflectors", ()))
    blockers = tuple(
        BlockerSpec(waypoints=_waypoints_from(b["waypoints"],
                                              f"scene.blockers[{i}]"),
                    length=float(b.get("length", 0.6)),
                    attenuation_db=float(b.get("attenuation_db", 30.0)),
                    rcs=float(b.get("rcs", 0.8)))
        for i, b in enumerate(d.get("blockers", ())))
    clutter = tuple((Point2(float(x), float(y)), float(rcs))
                    for x, y, rcs in d.get("static_clutter", ()))
    scene = Scene(users=users, reflectors=reflectors, blockers=blockers,
                  static_clutter=clutter,
                  duration=float(d.get("duration", 10.0)),
                  seed=int(d.get("seed", 0)))
    try:
        validate_scene(scene)
    except ValueError as e:
        raise ConfigError(f"scene: {e}") from e
    return scene


def _config_with_overrides(default, overrides: dict, path: str):
    names = {f.name for f in dataclasses.fields(default)}
    fixed = {}
    for k, v in overrides.items():
        if k not in names:
            raise ConfigError(f"{path}.{k}: unknown field")
        if k == "mount_offset":
            v = Point2(float(v[0]), float(v[1]))
        fixed[k] = v
    try:
        return dataclasses.replace(default, **fixed)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from e


def config_from_dict(d: dict) -> ExperimentConfig:
    allowed = {"scenario", "seed", "scene", "radar", "radio", "strategies",
               "recal_period", "timestep", "output_dir"}
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown config key {k!r}")

    if ("scenario" in d) == ("scene" in d):
        raise ConfigError("config needs exactly one of 'scenario' or 'scene'")
    if "scenario" in d:
        name = d["scenario"]
        if name not in GENERATORS:
            raise ConfigError(f"scenario {name!r} not in "
                              f"{sorted(GENERATORS)}")
        scene = GENERATORS[name](seed=int(d.get("seed", 0)))
    else:
        scene = _scene_from_dict(d["scene"])

    radar = _config_with_overrides(RadarConfig(), d.get("radar", {}), "radar")
    radio = _config_with_overrides(RadioConfig(), d.get("radio", {}), "radio")

    strategies = tuple(d.get("strategies", STRATEGIES))
    for s in strategies:
        if s not in STRATEGIES:
            raise ConfigError(f"strategies: unknown strategy {s!r}")
    if not strategies:
        raise ConfigError("strategies: need at least one")

    recal = d.get("recal_period", 0.5)
    if recal is not None:
        recal = float(recal)
        if recal <= 0:
            raise ConfigError("recal_period must be positive or null")
    timestep = float(d.get("timestep", 0.01))
    if timestep <= 0:
        raise ConfigError("timestep must be positive")

    return ExperimentConfig(scene=scene, radar=radar, radio=radio,
                            strategies=strategies, recal_period=recal,
                            timestep=timestep,
                            output_dir=d.get("output_dir"))


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """JSON-serializable round-trip form (the scene is always explicit)."""
    scene = {
        "users": [{"user_id": u.user_id,
                   "waypoints": [[t, p.x, p.y] for t, p in u.waypoints],
                   "rcs": u.rcs} for u in cfg.scene.users],
        "reflectors": [{"p1": [r.p1.x, r.p1.y], "p2": [r.p2.x, r.p2.y],
                        "reflection_coeff": r.reflection_coeff}
                       for r in cfg.scene.reflectors],
        "blockers": [{"waypoints": [[t, p.x, p.y] for t, p in b.waypoints],
                      "length": b.length, "attenuation_db": b.attenuation_db,
                      "rcs": b.rcs} for b in cfg.scene.blockers],
        "static_clutter": [[p.x, p.y, rcs]
                           for p, rcs in cfg.scene.static_clutter],
        "duration": cfg.scene.duration,
        "seed": cfg.scene.seed,
    }
    radar = dataclasses.asdict(cfg.radar)
    radar["mount_offset"] = [cfg.radar.mount_offset.x, cfg.radar.mount_offset.y]
    return {
        "scene": scene,
        "radar": radar,
        "radio": dataclasses.asdict(cfg.radio),
        "strategies": list(cfg.strategies),
        "recal_period": cfg.recal_period,
        "timestep": cfg.timestep,
        "output_dir": cfg.output_dir,
    }


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot load config {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# simulation loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AngleErrorRecord:
    t: float
    strategy: str
    user_id: int
    error_deg: float


@dataclass(frozen=True)
class EventRecord:
    """Blockage predictions and recalibration instants, as they were seen.

    kind="blockage": a controller's current forecast for user_id right
    after the radar frame at t.  kind="recalibration": the controller
    consumed a beam scan at t (user_id and blocker_id are -1, duration 0).
    """
    t: float
    kind: str
    strategy: str
    user_id: int
    path: str
    t_arrival: float
    duration: float
    blocker_id: int


@dataclass(frozen=True)
class TrackSnapshot:
    """Tracker state versus ground truth, logged at frame and scan times."""
    t: float
    trigger: str        # "frame" or "scan"
    strategy: str
    user_id: int
    x: float
    y: float
    true_x: float
    true_y: float


@dataclass
class RunResult:
    config: ExperimentConfig
    samples: list[ThroughputSample] = field(default_factory=list)
    angle_errors: list[AngleErrorRecord] = field(default_factory=list)
    events: list[EventRecord] = field(default_factory=list)
    track_snapshots: list[TrackSnapshot] = field(default_factory=list)
    track_log: list[TrackLogRow] = field(default_factory=list)
    controllers: dict[str, StrategyController] = field(default_factory=dict)


def _exact_steps(period: float, dt: float, label: str) -> int:
    n = period / dt
    r = round(n)
    if r <= 0 or abs(n - r) > 1e-6:
        raise ConfigError(
            f"{label} ({period} s) must be a positive multiple of the "
            f"timestep ({dt} s)")
    return r


def _log_events(result: RunResult, ctrl: StrategyController, t: float) -> None:
    for uid, ev in sorted(ctrl.events.items()):
        result.events.append(EventRecord(
            t=t, kind="blockage", strategy=ctrl.strategy, user_id=uid,
            path=ev.path, t_arrival=ev.t_arrival, duration=ev.duration,
            blocker_id=ev.blocker_id))


def _log_tracks(result: RunResult, ctrl: StrategyController, t: float,
                trigger: str, snapshot) -> None:
    for tr in ctrl.tracks:
        truth = snapshot.users.get(tr.user_id)
        if truth is None:
            continue
        result.track_snapshots.append(TrackSnapshot(
            t=t, trigger=trigger, strategy=ctrl.strategy,
            user_id=tr.user_id, x=tr.position.x, y=tr.position.y,
            true_x=truth.position.x, true_y=truth.position.y))


def run_scenario(config: ExperimentConfig) -> RunResult:
    try:
        validate_scene(config.scene)
    except ValueError as e:
        raise ConfigError(f"scene: {e}") from e
    dt = config.timestep
    n_steps = int(math.floor(config.scene.duration / dt + 1e-9))
    frame_steps = _exact_steps(config.radar.frame_period, dt,
                               "radar.frame_period")
    recal_steps = (None if config.recal_period is None else
                   _exact_steps(config.recal_period, dt, "recal_period"))

    ss = np.random.SeedSequence(config.scene.seed)
    radar_rng, radio_rng = (np.random.default_rng(s) for s in ss.spawn(2))

    result = RunResult(config=config)
    result.controllers = {
        s: StrategyController(s, config.radio, config.radar,
                              config.recal_period)
        for s in config.strategies}
    # one tracker's per-frame log is representative; all radar strategies
    # see identical frames and scans, so pick the first
    log_strategy = next((n for n, c in result.controllers.items()
                         if c.uses_radar), None)

    for k in range(n_steps):
        t = k * dt
        snapshot = sample_scene(config.scene, t)

        if k % frame_steps == 0:
            frame = synthesize_frame(snapshot, config.radar, radar_rng)
            ra = range_angle_map(frame, config.radar)
            for ctrl in result.controllers.values():
                if ctrl.uses_radar:
                    ctrl.on_radar_frame(t, ra)
                    _log_events(result, ctrl, t)
                    _log_tracks(result, ctrl, t, "frame", snapshot)
                    if ctrl.strategy == log_strategy:
                        result.track_log.extend(
                            track_log_row(t, tr, ctrl.reflectors)
                            for tr in ctrl.tracks)

        if k == 0 or (recal_steps is not None and k % recal_steps == 0):
            report = run_beam_scan(snapshot, config.radio, radio_rng)
            for ctrl in result.controllers.values():
                if ctrl.strategy == "oracle":
                    continue
                if ctrl.strategy == "non_collaborative" and k != 0:
                    continue
                ctrl.on_beam_scan(t, report)
                result.events.append(EventRecord(
                    t=t, kind="recalibration", strategy=ctrl.strategy,
                    user_id=-1, path="", t_arrival=t, duration=0.0,
                    blocker_id=-1))
                if ctrl.uses_radar:
                    _log_tracks(result, ctrl, t, "scan", snapshot)

        channels = {
            uid: channel_from_paths(
                compute_paths(snapshot, uid, config.radio.wavelength),
                config.radio)
            for uid in sorted(snapshot.users)}
        for name, ctrl in result.controllers.items():
            for uid, dec, samp in controller_step(ctrl, t, channels):
                result.samples.append(samp)
                truth = max(channels[uid].paths, key=lambda p: abs(p.gain))
                err = min(abs(b.angle - truth.angle) for b in dec.beams)
                result.angle_errors.append(
                    AngleErrorRecord(t=t, strategy=name, user_id=uid,
                                     error_deg=err))
    return result


# ---------------------------------------------------------------------------
# metrics and outputs
# ---------------------------------------------------------------------------

def _dist(values) -> dict:
    """mean/median/p20/p90 with numpy's linear percentile interpolation."""
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return {"mean": None, "median": None, "p20": None, "p90": None}
    p20, p50, p90 = np.percentile(a, (20, 50, 90))
    return {"mean": float(a.mean()), "median": float(p50),
            "p20": float(p20), "p90": float(p90)}


def _cdf(values) -> list:
    """Value at every integer percentile 0..100 (an inverse-CDF table)."""
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return []
    return [float(v) for v in np.percentile(a, np.arange(101))]


def summarize(result: RunResult) -> dict:
    out: dict = {"n_samples": len(result.samples),
                 "duration": result.config.scene.duration,
                 "timestep": result.config.timestep,
                 "strategies": {}}
    for name, ctrl in result.controllers.items():
        samples = [s for s in result.samples if s.strategy == name]
        errors = [e.error_deg for e in result.angle_errors
                  if e.strategy == name]
        thr = [s.throughput_mbps for s in samples]
        n = max(len(samples), 1)
        out["strategies"][name] = {
            "throughput_mbps": _dist(thr),
            "snr_db": _dist([s.snr_db for s in samples]),
            "angle_error_deg": _dist(errors),
            "outage_fraction": sum(s.path_used == "outage"
                                   for s in samples) / n,
            "in_overhead_fraction": sum(s.in_overhead for s in samples) / n,
            "overhead_fraction": ctrl.charged_overhead,
            "cdf": {"throughput_mbps": _cdf(thr),
                    "angle_error_deg": _cdf(errors)},
        }
    return out


def write_samples_csv(path: str, samples: list[ThroughputSample]) -> None:
    with open(path, "w", newline="") as f:
        f.write("t,strategy,user_id,snr_db,throughput_mbps,"
                "in_overhead,path_used\n")
        for s in samples:
            f.write(f"{s.t:.4f},{s.strategy},{s.user_id},{s.snr_db:.6f},"
                    f"{s.throughput_mbps:.6f},{int(s.in_overhead)},"
                    f"{s.path_used}\n")


def write_angle_errors_csv(path: str, errors: list[AngleErrorRecord]) -> None:
    with open(path, "w", newline="") as f:
        f.write("t,strategy,user_id,error_deg\n")
        for e in errors:
            f.write(f"{e.t:.4f},{e.strategy},{e.user_id},"
                    f"{e.error_deg:.6f}\n")


def write_events_csv(path: str, events: list[EventRecord]) -> None:
    with open(path, "w", newline="") as f:
        f.write("t,kind,strategy,user_id,path,t_arrival,duration,"
                "blocker_id\n")
        for ev in events:
            f.write(f"{ev.t:.4f},{ev.kind},{ev.strategy},{ev.user_id},"
                    f"{ev.path},{ev.t_arrival:.4f},{ev.duration:.4f},"
                    f"{ev.blocker_id}\n")


def write_summary_json(path: str, summary: dict) -> None:
    with open(path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")


def run_and_write(config: ExperimentConfig) -> RunResult:
    """Run and, when an output directory is configured, persist everything."""
    result = run_scenario(config)
    if config.output_dir:
        os.makedirs(config.output_dir, exist_ok=True)
        j = os.path.join
        write_samples_csv(j(config.output_dir, "samples.csv"), result.samples)
        write_angle_errors_csv(j(config.output_dir, "angle_errors.csv"),
                               result.angle_errors)
        write_events_csv(j(config.output_dir, "events.csv"), result.events)
        if result.track_log:
            write_track_log_csv(j(config.output_dir, "tracks.csv"),
                                result.track_log)
        write_summary_json(j(config.output_dir, "summary.json"),
                           summarize(result))
        with open(j(config.output_dir, "config.json"), "w") as f:
            json.dump(config_to_dict(config), f, indent=2, sort_keys=True)
            f.write("\n")
        for ctrl in result.controllers.values():
            if ctrl.uses_radar:
                write_reflectors_csv(j(config.output_dir, "reflectors.csv"),
                                     ctrl.reflectors)
                break
    return result
