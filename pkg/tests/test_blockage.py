"""Blockage forecasting from object tracks and the mitigation policy."""

import math

import numpy as np
import pytest

from radarbeam.blockage import (
    DEFAULT_HORIZON,
    DEFAULT_LEAD_TIME,
    DEFAULT_REGION_WIDTH,
    BlockageEvent,
    PathOption,
    blockage_region,
    event_window,
    mitigate,
    predict_blockage,
    predict_center,
)
from radarbeam.geometry import (
    Point2,
    point_in_convex_polygon,
    segment_intersects_polygon,
)
from radarbeam.scene import BLOCKER_DEPTH
from radarbeam.tracking import new_track


def moving_track(pos: Point2, vel: Point2, t: float = 0.0, uid: int = -1):
    tr = new_track(uid, pos, t)
    tr.state[2] = vel.x
    tr.state[3] = vel.y
    return tr


def corners_set(region):
    return set((round(c.x, 9), round(c.y, 9)) for c in region.corners)


# ----------------------------------------------------------------------
# the protected corridor
# ----------------------------------------------------------------------

def test_region_for_a_boresight_link():
    region = blockage_region(Point2(0, 0), Point2(0, 10), width=0.4)
    assert corners_set(region) == {(-0.2, 0.0), (0.2, 0.0),
                                   (-0.2, 10.0), (0.2, 10.0)}


def test_region_rotates_with_the_link():
    region = blockage_region(Point2(0, 0), Point2(10, 0), width=0.4)
    assert corners_set(region) == {(0.0, -0.2), (0.0, 0.2),
                                   (10.0, -0.2), (10.0, 0.2)}


def test_region_area_is_length_times_width(rng):
    for _ in range(20):
        user = Point2(*rng.uniform(-10, 10, 2))
        if user.norm() < 0.5:
            continue
        w = float(rng.uniform(0.1, 1.0))
        c = blockage_region(Point2(0, 0), user, width=w).corners
        area2 = sum(c[i].cross(c[(i + 1) % 4]) for i in range(4))
        assert abs(area2) / 2 == pytest.approx(user.norm() * w, rel=1e-9)


def test_region_contains_the_link_segment(rng):
    for _ in range(20):
        user = Point2(*rng.uniform(-10, 10, 2))
        if user.norm() < 0.5:
            continue
        region = blockage_region(Point2(0, 0), user)
        poly = list(region.corners)
        for s in np.linspace(0.0, 1.0, 11):
            assert point_in_convex_polygon(user * float(s), poly)


def test_region_rejects_degenerate_inputs():
    with pytest.raises(ValueError):
        blockage_region(Point2(1, 1), Point2(1, 1))
    with pytest.raises(ValueError):
        blockage_region(Point2(0, 0), Point2(0, 5), width=0.0)


# ----------------------------------------------------------------------
# arrival-time prediction
# ----------------------------------------------------------------------

def boresight_region():
    return blockage_region(Point2(0, 0), Point2(0, 10), width=0.4)


def test_arrival_time_closed_form():
    # blocker at (2,5) walking -x at 1 m/s with a 0.5 m footprint meets the
    # half-width 0.2 corridor when its leading edge reaches x=0.45
    tr = moving_track(Point2(2.0, 5.0), Point2(-1.0, 0.0), uid=-3)
    ev = predict_blockage(tr, boresight_region(), blocker_length=0.5, now=0.0)
    assert ev is not None
    assert ev.t_arrival == pytest.approx(1.55, abs=1e-9)
    assert ev.duration == pytest.approx(0.5, abs=1e-12)
    assert ev.blocker_id == -3


def test_duration_is_length_over_speed():
    tr = moving_track(Point2(3.0, 5.0), Point2(-2.0, 0.0))
    ev = predict_blockage(tr, boresight_region(), blocker_length=0.6, now=0.0)
    assert ev.duration == pytest.approx(0.3)


def test_parallel_motion_outside_the_corridor_is_clear():
    tr = moving_track(Point2(2.0, 8.0), Point2(0.0, -1.0))
    assert predict_blockage(tr, boresight_region(), 0.5, now=0.0) is None


def test_crossing_beyond_the_horizon_is_ignored():
    tr = moving_track(Point2(20.0, 5.0), Point2(-1.0, 0.0))
    assert predict_blockage(tr, boresight_region(), 0.5, now=0.0) is None
    ev = predict_blockage(tr, boresight_region(), 0.5, now=0.0, horizon=25.0)
    assert ev is not None and ev.t_arrival == pytest.approx(19.55)


def test_blocker_already_in_the_corridor_arrives_now():
    tr = moving_track(Point2(0.0, 5.0), Point2(-1.0, 0.0), t=3.0)
    ev = predict_blockage(tr, boresight_region(), 0.5, now=3.0)
    assert ev is not None
    assert ev.t_arrival == 3.0


def test_blocker_that_already_left_is_clear():
    tr = moving_track(Point2(-2.0, 5.0), Point2(-1.0, 0.0))
    assert predict_blockage(tr, boresight_region(), 0.5, now=0.0) is None


def test_standing_blocker_inside_is_persistent():
    tr = moving_track(Point2(0.05, 5.0), Point2(0.0, 0.0))
    ev = predict_blockage(tr, boresight_region(), 0.5, now=1.0)
    assert ev is not None
    assert ev.t_arrival == 1.0
    assert ev.duration == DEFAULT_HORIZON
    standing_out = moving_track(Point2(3.0, 5.0), Point2(0.0, 0.0))
    assert predict_blockage(standing_out, boresight_region(), 0.5, 0.0) is None


def test_prediction_extrapolates_from_the_track_timestamp():
    # track last updated at t=1; by now=2 the blocker has already advanced
    tr = moving_track(Point2(2.0, 5.0), Point2(-1.0, 0.0), t=1.0)
    assert predict_center(tr, 2.0).x == pytest.approx(1.0)
    ev = predict_blockage(tr, boresight_region(), 0.5, now=2.0)
    assert ev.t_arrival == pytest.approx(2.0 + 0.55)


def brute_force_arrival(tr, region, half_len: float, now: float,
                        horizon: float, dt: float = 1e-3):
    """1 ms sweep: first time the footprint segment touches the region."""
    v = tr.velocity
    walk = v.unit()
    poly = list(region.corners)
    steps = int(horizon / dt) + 1
    for k in range(steps):
        t = now + k * dt
        c = predict_center(tr, t)
        a = c - walk * half_len
        b = c + walk * half_len
        if segment_intersects_polygon(a, b, poly):
            return t
    return None


def test_arrival_matches_time_stepped_sweep(rng):
    checked = 0
    while checked < 25:
        user = Point2(float(rng.uniform(-6, 6)), float(rng.uniform(4, 12)))
        region = blockage_region(Point2(0, 0), user)
        start = Point2(float(rng.uniform(-8, 8)), float(rng.uniform(0, 12)))
        # aim roughly at the link so most draws produce an event and the
        # sweep terminates early; stray headings still exercise the miss path
        aim = user * float(rng.uniform(0.1, 0.9)) - start
        speed = float(rng.uniform(0.8, 2.0))
        heading = math.atan2(aim.y, aim.x) + float(rng.uniform(-0.6, 0.6))
        vel = Point2(speed * math.cos(heading), speed * math.sin(heading))
        length = float(rng.uniform(0.3, 0.9))
        tr = moving_track(start, vel)
        ev = predict_blockage(tr, region, length, now=0.0)
        bf = brute_force_arrival(tr, region, 0.5 * length, 0.0,
                                 DEFAULT_HORIZON)
        if ev is None and bf is None:
            continue
        checked += 1
        assert ev is not None and bf is not None
        assert ev.t_arrival == pytest.approx(bf, abs=0.01)
        assert ev.duration == pytest.approx(length / speed, rel=1e-9)


# ----------------------------------------------------------------------
# mitigation policy
# ----------------------------------------------------------------------

DIRECT = PathOption(kind="direct", angle=0.0, gain=1.0)
BOUNCE = PathOption(kind="reflected:0", angle=40.0, gain=0.6)
WEAK = PathOption(kind="reflected:1", angle=-25.0, gain=0.3)


def direct_block(t_arrival: float, duration: float) -> BlockageEvent:
    return BlockageEvent(user_id=1, path="direct", t_arrival=t_arrival,
                         duration=duration, blocker_id=-1)


def test_mitigation_timeline_switch_and_revert():
    ev = direct_block(2.0, 1.0)
    paths = [DIRECT, BOUNCE, WEAK]
    for now, kind in [(1.5, "direct"),        # before the window
                      (1.95, "reflected:0"),  # lead time engaged
                      (2.5, "reflected:0"),   # inside the blockage
                      (3.05, "reflected:0"),  # trailing lead
                      (3.2, "direct")]:       # reverted
        d = mitigate(ev, paths, now)
        assert d.path_used == kind, f"at t={now}"
        assert not d.outage


def test_mitigation_picks_the_strongest_clear_alternative():
    ev = direct_block(0.0, 1.0)
    d = mitigate(ev, [DIRECT, WEAK, BOUNCE], now=0.5)
    assert d.path_used == "reflected:0"
    assert d.beams[0].angle == 40.0


def test_mitigation_skips_alternatives_flagged_blocked():
    ev = direct_block(0.0, 1.0)
    bounced = PathOption(kind="reflected:0", angle=40.0, gain=0.6,
                         blocked=True)
    d = mitigate(ev, [DIRECT, bounced, WEAK], now=0.5)
    assert d.path_used == "reflected:1"


def test_mitigation_with_no_alternative_holds_and_flags_outage():
    ev = direct_block(0.0, 1.0)
    bounced = PathOption(kind="reflected:0", angle=40.0, gain=0.6,
                         blocked=True)
    d = mitigate(ev, [DIRECT, bounced], now=0.5)
    assert d.outage
    assert d.path_used == "outage"
    assert d.beams[0].angle == 0.0  # holds the previously best beam


def test_mitigation_ignores_past_and_absent_events():
    ev = direct_block(0.0, 1.0)
    after = mitigate(ev, [DIRECT, BOUNCE], now=5.0)
    assert after.path_used == "direct"
    none = mitigate(None, [DIRECT, BOUNCE], now=0.5)
    assert none.path_used == "direct"


def test_mitigation_requires_candidates():
    with pytest.raises(ValueError):
        mitigate(None, [], now=0.0)


def test_mitigation_never_uses_the_blocked_path_inside_the_window(rng):
    for _ in range(50):
        ev = direct_block(float(rng.uniform(0, 2)), float(rng.uniform(0.2, 1)))
        paths = [PathOption(kind="direct", angle=0.0,
                            gain=float(rng.uniform(0.5, 1.5))),
                 PathOption(kind="reflected:0", angle=30.0,
                            gain=float(rng.uniform(0.1, 1.5)),
                            blocked=bool(rng.uniform() < 0.3))]
        t0, t1 = event_window(ev)
        now = float(rng.uniform(t0, t1))
        d = mitigate(ev, paths, now)
        if d.outage:
            continue
        assert d.path_used != ev.path
        chosen = next(p for p in paths if p.kind == d.path_used)
        assert not chosen.blocked


def test_event_window_extends_by_the_lead_time():
    ev = direct_block(2.0, 1.0)
    t0, t1 = event_window(ev)
    assert (t0, t1) == pytest.approx((2.0 - DEFAULT_LEAD_TIME,
                                      3.0 + DEFAULT_LEAD_TIME))


def test_event_log_csv_round_trip(tmp_path):
    from radarbeam.blockage import write_event_log_csv
    ev = BlockageEvent(user_id=2, path="direct", t_arrival=1.55,
                       duration=0.5, blocker_id=-4)
    out = tmp_path / "events.csv"
    write_event_log_csv(str(out), [(1.0, ev)])
    lines = out.read_text().splitlines()
    assert lines[0] == "t_predicted,user_id,path,t_arrival,duration"
    assert lines[1] == "1.0000,2,direct,1.5500,0.5000"
