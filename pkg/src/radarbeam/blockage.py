"""Proactive blockage prediction and beam-level mitigation.

A link is guarded by a rectangular region between the base station and the
user.  Tracked foreign objects are extrapolated along their velocity; the
first time the object's footprint enters the region gives the predicted
blockage arrival, and the crossing lasts length/speed.  Mitigation swaps
communication onto the strongest path that is not affected for the duration
of the event, with a lead margin on both sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import (
    Point2,
    convex_hull,
    ensure_ccw,
    point_in_convex_polygon,
    ray_convex_interval,
)
from .radio import BeamDecision, single_beam
from .tracking import Track

DEFAULT_REGION_WIDTH = 0.4       # m
DEFAULT_HORIZON = 5.0            # s
DEFAULT_LEAD_TIME = 0.1          # s
MIN_BLOCKER_SPEED = 1e-6         # below this the object counts as standing
ASSUMED_BLOCKER_LENGTH = 0.6     # m, footprint assumed for an unknown object


@dataclass(frozen=True)
class BlockageRegion:
    corners: tuple[Point2, Point2, Point2, Point2]  # CCW order


@dataclass(frozen=True)
class BlockageEvent:
    user_id: int
    path: str           # "direct" | "reflected:<i>"
    t_arrival: float    # s, absolute
    duration: float     # s
    blocker_id: int = 0


def blockage_region(bs: Point2, user: Point2,
                    width: float = DEFAULT_REGION_WIDTH) -> BlockageRegion:
    """Axis-aligned-to-the-link rectangle covering the LoS corridor."""
    axis = user - bs
    if axis.norm() < 1e-9:
        raise ValueError("base station and user coincide")
    if width <= 0.0:
        raise ValueError("width must be positive")
    u = axis.unit()
    n = u.perp() * (0.5 * width)
    corners = ensure_ccw([bs + n, bs - n, user - n, user + n])
    return BlockageRegion(corners=tuple(corners))


def _footprint_polygon(region: BlockageRegion, half_len: float,
                       walk: Point2) -> list[Point2]:
    """Minkowski sum of the region with the blocker footprint, a segment of
    half-length `half_len` along the walk direction; entering this polygon
    is equivalent to the footprint touching the region."""
    pts = []
    for c in region.corners:
        pts.append(c + walk * half_len)
        pts.append(c - walk * half_len)
    return convex_hull(pts)


def predict_blockage(blocker_track: Track, region: BlockageRegion,
                     blocker_length: float, now: float,
                     horizon: float = DEFAULT_HORIZON,
                     user_id: int = 0, path: str = "direct") -> BlockageEvent | None:
    """First future intersection of the blocker footprint with the region.

    The footprint spans half the blocker length to both sides of its center
    along the walk axis, so the crossing of any transverse line lasts
    exactly length/speed, which is the event duration.  A standing blocker
    already inside the region yields a persistent event (duration=horizon);
    otherwise no event is returned within the horizon.
    """
    v = blocker_track.velocity
    speed = v.norm()
    p0 = predict_center(blocker_track, now)

    if speed < MIN_BLOCKER_SPEED:
        if point_in_convex_polygon(p0, list(region.corners)):
            return BlockageEvent(user_id=user_id, path=path, t_arrival=now,
                                 duration=horizon,
                                 blocker_id=blocker_track.user_id)
        return None

    poly = _footprint_polygon(region, 0.5 * blocker_length, v.unit())
    interval = ray_convex_interval(p0, v, poly)
    if interval is None:
        return None
    s_in, s_out = interval
    if s_out < 0.0 or s_in > horizon:
        return None
    return BlockageEvent(user_id=user_id, path=path,
                         t_arrival=now + max(s_in, 0.0),
                         duration=blocker_length / speed,
                         blocker_id=blocker_track.user_id)


def predict_center(track: Track, t: float) -> Point2:
    """Constant-velocity extrapolation of the track center."""
    dt = t - track.last_update
    return track.position + track.velocity * dt


def event_window(event: BlockageEvent,
                 lead: float = DEFAULT_LEAD_TIME) -> tuple[float, float]:
    return event.t_arrival - lead, event.t_arrival + event.duration + lead


@dataclass(frozen=True)
class PathOption:
    """A candidate communication path as the controller believes it."""
    kind: str        # "direct" | "reflected:<i>"
    angle: float     # degrees off boresight
    gain: float      # believed linear amplitude
    blocked: bool = False


def mitigate(event: BlockageEvent | None, available_paths: list[PathOption],
             now: float, lead: float = DEFAULT_LEAD_TIME) -> BeamDecision:
    """Single-beam mitigation policy.

    Outside the event window (or with no event) the strongest path wins.
    Inside it, the strongest path not affected by the event wins; if every
    path is unavailable the current best beam is held and the decision is
    flagged as an outage.
    """
    if not available_paths:
        raise ValueError("no candidate paths")
    best = max(available_paths, key=lambda p: p.gain)
    if event is None:
        return single_beam(best.angle, path_used=best.kind)
    t0, t1 = event_window(event, lead)
    if not (t0 <= now <= t1):
        return single_beam(best.angle, path_used=best.kind)
    clear = [p for p in available_paths if not p.blocked and p.kind != event.path]
    if not clear:
        return single_beam(best.angle, path_used="outage", outage=True)
    pick = max(clear, key=lambda p: p.gain)
    return single_beam(pick.angle, path_used=pick.kind)


def write_event_log_csv(path: str, entries) -> None:
    """Persist forecasts as (time-of-prediction, event) pairs."""
    with open(path, "w", newline="") as f:
        f.write("t_predicted,user_id,path,t_arrival,duration\n")
        for t, ev in entries:
            f.write(f"{t:.4f},{ev.user_id},{ev.path},"
                    f"{ev.t_arrival:.4f},{ev.duration:.4f}\n")
