"""Experiment harness: configs, the simulation loop, metrics, and the CLI."""

import json
import math
import os

import numpy as np
import pytest

from radarbeam.cli import main
from radarbeam.geometry import Point2
from radarbeam.harness import (
    ConfigError,
    EventRecord,
    ExperimentConfig,
    RunResult,
    _exact_steps,
    config_from_dict,
    config_to_dict,
    load_config,
    run_and_write,
    run_scenario,
    summarize,
)
from radarbeam.link import STRATEGIES, StrategyController, ThroughputSample
from radarbeam.radar import RadarConfig
from radarbeam.radio import RadioConfig
from radarbeam.scene import Scene, UserSpec, sample_scene


def tiny_scene_dict(duration=1.0):
    return {
        "users": [{"user_id": 1,
                   "waypoints": [[0.0, 0.0, 6.0], [duration, 0.0, 6.0]]}],
        "duration": duration,
        "seed": 5,
    }


def tiny_config(strategies=("oracle", "reactive"), duration=1.0,
                timestep=0.05, **extra):
    d = {"scene": tiny_scene_dict(duration), "strategies": list(strategies),
         "timestep": timestep, "recal_period": 0.5}
    d.update(extra)
    return config_from_dict(d)


# ----------------------------------------------------------------------
# configuration handling
# ----------------------------------------------------------------------

def test_config_round_trip():
    cfg = tiny_config(radar={"bandwidth": 100e6, "mount_offset": [0.1, 0.0]},
                      radio={"codebook_size": 61})
    assert cfg.radar.bandwidth == 100e6
    assert cfg.radar.mount_offset == Point2(0.1, 0.0)
    assert cfg.radio.codebook_size == 61
    again = config_from_dict(config_to_dict(cfg))
    assert again == cfg


def test_config_scenario_shortcut():
    cfg = config_from_dict({"scenario": "crossing_2users", "seed": 4})
    assert cfg.scene.seed == 4
    assert len(cfg.scene.users) == 2


@pytest.mark.parametrize("raw,fragment", [
    ({"scenario": "crossing_2users", "bogus": 1}, "unknown config key"),
    ({}, "exactly one"),
    ({"scenario": "x", "scene": {}}, "exactly one"),
    ({"scenario": "no_such_scene"}, "not in"),
    ({"scenario": "crossing_2users", "strategies": ["psychic"]}, "unknown"),
    ({"scenario": "crossing_2users", "strategies": []}, "at least one"),
    ({"scenario": "crossing_2users", "recal_period": -1}, "positive"),
    ({"scenario": "crossing_2users", "timestep": 0}, "positive"),
    ({"scene": {"weather": "wet"}}, "unknown key"),
    ({"scene": {"users": [{"user_id": 1, "waypoints": [[0.0, 1.0]]}]}},
     "waypoints"),
    ({"scenario": "crossing_2users", "radar": {"n_lasers": 4}},
     "unknown field"),
    ({"scenario": "crossing_2users", "radar": {"bandwidth": -1.0}},
     "radar"),
])
def test_config_rejections(raw, fragment):
    with pytest.raises(ConfigError, match=fragment):
        config_from_dict(raw)


def test_config_rejects_a_physically_invalid_scene():
    d = {"scene": {"users": [{"user_id": 1,
                              "waypoints": [[0.0, 0.0, 5.0],
                                            [1.0, 9.0, 5.0]]}],
                   "duration": 1.0}}
    with pytest.raises(ConfigError, match="speed"):
        config_from_dict(d)


def test_load_config_error_paths(tmp_path):
    with pytest.raises(ConfigError, match="cannot load"):
        load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="root"):
        load_config(str(bad))
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"scenario": "crossing_2users"}))
    assert load_config(str(good)).scene.duration == 8.0


def test_exact_steps_guards_the_schedules():
    assert _exact_steps(0.5, 0.01, "recal") == 50
    assert _exact_steps(0.2, 0.05, "frame") == 4
    with pytest.raises(ConfigError):
        _exact_steps(0.505, 0.01, "recal")
    with pytest.raises(ConfigError):
        _exact_steps(-0.5, 0.01, "recal")
    cfg = tiny_config(timestep=0.04)  # 0.5 s scans don't land on 0.04 s steps
    with pytest.raises(ConfigError, match="recal_period"):
        run_scenario(cfg)
    with pytest.raises(ConfigError, match="frame_period"):
        run_scenario(tiny_config(timestep=0.3))


# ----------------------------------------------------------------------
# the simulation loop
# ----------------------------------------------------------------------

def test_every_user_strategy_pair_gets_one_sample_per_step():
    cfg = tiny_config(duration=2.0, timestep=0.05)
    result = run_scenario(cfg)
    n_steps = 40
    assert len(result.samples) == n_steps * len(cfg.strategies)
    for s in cfg.strategies:
        times = [x.t for x in result.samples if x.strategy == s]
        assert times == sorted(times)
        assert len(set(times)) == n_steps
        assert times[0] == 0.0
        assert times[-1] == pytest.approx(2.0 - 0.05)
    assert len(result.angle_errors) == len(result.samples)


def test_oracle_angle_error_is_zero():
    result = run_scenario(tiny_config(strategies=("oracle",)))
    assert all(e.error_deg == 0.0 for e in result.angle_errors)


def test_recalibration_events_follow_the_schedule():
    cfg = tiny_config(strategies=("commrad_single", "non_collaborative"),
                      duration=1.5, timestep=0.05)
    result = run_scenario(cfg)
    recals = [e for e in result.events if e.kind == "recalibration"]
    by_strategy = {}
    for e in recals:
        by_strategy.setdefault(e.strategy, []).append(e.t)
        assert e.user_id == -1 and e.duration == 0.0 and e.path == ""
    assert by_strategy["commrad_single"] == [0.0, 0.5, 1.0]
    assert by_strategy["non_collaborative"] == [0.0]   # initial access only
    kinds = {e.kind for e in result.events}
    assert kinds <= {"recalibration", "blockage"}


def test_track_snapshots_compare_against_ground_truth():
    cfg = tiny_config(strategies=("commrad_single",), duration=1.0,
                      timestep=0.05)
    result = run_scenario(cfg)
    assert result.track_snapshots
    assert {s.trigger for s in result.track_snapshots} <= {"frame", "scan"}
    for snap in result.track_snapshots:
        truth = sample_scene(cfg.scene, snap.t).users[snap.user_id].position
        assert truth.x == pytest.approx(snap.true_x)
        assert truth.y == pytest.approx(snap.true_y)
        assert math.hypot(snap.x - snap.true_x,
                          snap.y - snap.true_y) < 2.0
    assert result.track_log
    assert all(r.user_id == 1 for r in result.track_log)


def test_run_rejects_an_invalid_scene_late():
    scene = Scene(users=(UserSpec(1, ((0.0, Point2(0, 5)),
                                      (1.0, Point2(9, 5)))),),
                  duration=1.0)
    with pytest.raises(ConfigError, match="speed"):
        run_scenario(ExperimentConfig(scene=scene))


# ----------------------------------------------------------------------
# metrics
# ----------------------------------------------------------------------

def synthetic_result(values, strategy="oracle"):
    cfg = tiny_config(strategies=(strategy,))
    result = RunResult(config=cfg)
    result.controllers = {
        strategy: StrategyController(strategy, RadioConfig(), RadarConfig(),
                                     0.5)}
    for i, v in enumerate(values):
        result.samples.append(ThroughputSample(
            t=0.01 * i, strategy=strategy, user_id=1, snr_db=10.0,
            throughput_mbps=float(v), in_overhead=False, path_used="direct"))
    return result


def test_summary_percentiles_and_cdf():
    summary = summarize(synthetic_result([0.0] * 100 + [1000.0] * 100))
    s = summary["strategies"]["oracle"]
    thr = s["throughput_mbps"]
    assert thr["median"] == pytest.approx(500.0)
    assert thr["p20"] == 0.0
    assert thr["p90"] == 1000.0
    assert thr["mean"] == pytest.approx(500.0)
    cdf = s["cdf"]["throughput_mbps"]
    assert len(cdf) == 101
    assert cdf[0] == 0.0 and cdf[100] == 1000.0
    assert cdf == sorted(cdf)
    assert s["outage_fraction"] == 0.0
    assert s["in_overhead_fraction"] == 0.0
    assert s["angle_error_deg"]["median"] is None
    assert summary["n_samples"] == 200


def test_summary_of_a_constant_series_is_flat():
    s = summarize(synthetic_result([42.0] * 50))["strategies"]["oracle"]
    assert s["throughput_mbps"] == {"mean": 42.0, "median": 42.0,
                                    "p20": 42.0, "p90": 42.0}
    assert set(s["cdf"]["throughput_mbps"]) == {42.0}


# ----------------------------------------------------------------------
# persistence and determinism
# ----------------------------------------------------------------------

EXPECTED_FILES = ("samples.csv", "angle_errors.csv", "events.csv",
                  "tracks.csv", "summary.json", "config.json",
                  "reflectors.csv")


def run_to(tmp_path, name):
    d = {"scene": tiny_scene_dict(), "strategies": ["oracle",
                                                    "commrad_single"],
         "timestep": 0.05, "recal_period": 0.5,
         "output_dir": str(tmp_path / name)}
    return config_from_dict(d)


def test_outputs_are_written_and_byte_identical_across_reruns(tmp_path):
    run_and_write(run_to(tmp_path, "a"))
    run_and_write(run_to(tmp_path, "b"))
    for fn in EXPECTED_FILES:
        pa, pb = tmp_path / "a" / fn, tmp_path / "b" / fn
        assert pa.exists(), fn
        if fn == "config.json":   # embeds the differing output_dir
            da, db = (json.loads(x.read_text()) for x in (pa, pb))
            da.pop("output_dir"), db.pop("output_dir")
            assert da == db
        else:
            assert pa.read_bytes() == pb.read_bytes(), fn
    header = (tmp_path / "a" / "samples.csv").read_text().splitlines()[0]
    assert header == ("t,strategy,user_id,snr_db,throughput_mbps,"
                      "in_overhead,path_used")
    ev_header = (tmp_path / "a" / "events.csv").read_text().splitlines()[0]
    assert ev_header == ("t,kind,strategy,user_id,path,t_arrival,duration,"
                         "blocker_id")
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert set(summary["strategies"]) == {"oracle", "commrad_single"}


def test_different_seeds_diverge(tmp_path):
    base = run_to(tmp_path, "s5")
    import dataclasses
    other_scene = dataclasses.replace(base.scene, seed=6)
    other = dataclasses.replace(base, scene=other_scene,
                                output_dir=str(tmp_path / "s6"))
    run_and_write(base)
    run_and_write(other)
    assert ((tmp_path / "s5" / "samples.csv").read_bytes()
            != (tmp_path / "s6" / "samples.csv").read_bytes())


# ----------------------------------------------------------------------
# command line
# ----------------------------------------------------------------------

def write_cli_config(tmp_path, **extra):
    d = {"scene": tiny_scene_dict(), "strategies": ["oracle", "reactive"],
         "timestep": 0.05}
    d.update(extra)
    p = tmp_path / "config.json"
    p.write_text(json.dumps(d))
    return str(p)


def test_cli_run_writes_and_reports(tmp_path, capsys):
    cfg = write_cli_config(tmp_path)
    out = str(tmp_path / "out")
    assert main(["run", cfg, "--output", out]) == 0
    printed = capsys.readouterr().out
    assert "strategy" in printed and "oracle" in printed
    assert os.path.exists(os.path.join(out, "summary.json"))
    assert main(["report", os.path.join(out, "summary.json")]) == 0
    assert "oracle" in capsys.readouterr().out


def test_cli_sweep_rolls_up_seeds(tmp_path, capsys):
    cfg = write_cli_config(tmp_path)
    assert main(["sweep", cfg, "--seeds", "2", "--quiet",
                 "--output", str(tmp_path / "sweep")]) == 0
    printed = capsys.readouterr().out
    assert "mean of per-seed median" in printed
    assert os.path.exists(tmp_path / "sweep" / "seed001" / "samples.csv")


def test_cli_exit_codes(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert main(["run", missing]) == 2
    assert main(["report", missing]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"scenario": "crossing_2users",
                               "timestep": -1}))
    assert main(["run", str(bad)]) == 2
    capsys.readouterr()
