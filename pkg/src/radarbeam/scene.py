"""Ground-truth 2-D world model.

A Scene holds piecewise-linear trajectories for mobile users and blockers,
static wall reflectors, and point clutter.  `sample_scene` freezes it at a
time instant and `compute_paths` derives the geometric propagation paths
(direct plus one specular bounce per wall) that the sensor models consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import (
    C0,
    ORIGIN,
    Point2,
    bearing_deg,
    ensure_ccw,
    segment_intersects_polygon,
    specular_point,
)

DEFAULT_MAX_SPEED = 2.0          # m/s, pedestrian bound enforced by validation
BLOCKER_DEPTH = 0.3              # m, occupancy depth along the walk direction
DEFAULT_WAVELENGTH = C0 / 28e9   # radio carrier wavelength (m)

Waypoints = tuple[tuple[float, Point2], ...]


@dataclass(frozen=True)
class UserSpec:
    user_id: int
    waypoints: Waypoints
    rcs: float = 1.0


@dataclass(frozen=True)
class ReflectorSpec:
    p1: Point2
    p2: Point2
    reflection_coeff: float = 0.7


@dataclass(frozen=True)
class BlockerSpec:
    waypoints: Waypoints
    length: float = 0.6
    attenuation_db: float = 30.0
    rcs: float = 0.8


@dataclass(frozen=True)
class Scene:
    users: tuple[UserSpec, ...]
    reflectors: tuple[ReflectorSpec, ...] = ()
    blockers: tuple[BlockerSpec, ...] = ()
    static_clutter: tuple[tuple[Point2, float], ...] = ()
    duration: float = 10.0
    seed: int = 0


def _check_waypoints(wps: Waypoints, label: str, max_speed: float) -> None:
    if not wps:
        raise ValueError(f"{label}: needs at least one waypoint")
    times = [t for t, _ in wps]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError(f"{label}: waypoint times must be strictly increasing")
    for (t0, p0), (t1, p1) in zip(wps, wps[1:]):
        speed = (p1 - p0).norm() / (t1 - t0)
        if speed > max_speed + 1e-9:
            raise ValueError(
                f"{label}: implied speed {speed:.3f} m/s exceeds {max_speed} m/s")


def validate_scene(scene: Scene, max_speed: float = DEFAULT_MAX_SPEED) -> None:
    """Raise ValueError on ill-formed scenes (bad waypoints, too-fast entities)."""
    if scene.duration <= 0:
        raise ValueError("duration must be positive")
    seen: set[int] = set()
    for u in scene.users:
        if u.user_id in seen:
            raise ValueError(f"duplicate user_id {u.user_id}")
        seen.add(u.user_id)
        _check_waypoints(u.waypoints, f"user {u.user_id}", max_speed)
    for i, b in enumerate(scene.blockers):
        _check_waypoints(b.waypoints, f"blocker {i}", max_speed)
        if b.length <= 0:
            raise ValueError(f"blocker {i}: length must be positive")
    for i, r in enumerate(scene.reflectors):
        if (r.p2 - r.p1).norm() < 1e-9:
            raise ValueError(f"reflector {i}: endpoints coincide")
        if not (0.0 < r.reflection_coeff <= 1.0):
            raise ValueError(f"reflector {i}: reflection_coeff out of (0, 1]")


def _interp(wps: Waypoints, t: float) -> tuple[Point2, Point2]:
    """Piecewise-linear position and velocity; clamps beyond the end points."""
    if t <= wps[0][0]:
        return wps[0][1], Point2(0.0, 0.0)
    if t >= wps[-1][0]:
        return wps[-1][1], Point2(0.0, 0.0)
    for (t0, p0), (t1, p1) in zip(wps, wps[1:]):
        if t0 <= t <= t1:
            a = (t - t0) / (t1 - t0)
            vel = (p1 - p0) * (1.0 / (t1 - t0))
            return p0 + (p1 - p0) * a, vel
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class UserState:
    user_id: int
    position: Point2
    velocity: Point2
    rcs: float


@dataclass(frozen=True)
class BlockerState:
    position: Point2
    velocity: Point2
    length: float
    attenuation_db: float
    rcs: float


@dataclass(frozen=True)
class SceneSnapshot:
    t: float
    users: dict[int, UserState]
    blockers: tuple[BlockerState, ...]
    reflectors: tuple[ReflectorSpec, ...]
    static_clutter: tuple[tuple[Point2, float], ...]


def sample_scene(scene: Scene, t: float) -> SceneSnapshot:
    """Interpolate every entity at time t.  t must lie inside [0, duration]."""
    if not (0.0 <= t <= scene.duration):
        raise ValueError(f"t={t} outside scene horizon [0, {scene.duration}]")
    users = {}
    for u in scene.users:
        pos, vel = _interp(u.waypoints, t)
        users[u.user_id] = UserState(u.user_id, pos, vel, u.rcs)
    blockers = []
    for b in scene.blockers:
        pos, vel = _interp(b.waypoints, t)
        blockers.append(BlockerState(pos, vel, b.length, b.attenuation_db, b.rcs))
    return SceneSnapshot(t=t, users=users, blockers=tuple(blockers),
                         reflectors=scene.reflectors,
                         static_clutter=scene.static_clutter)


def blocker_occupancy(state: BlockerState) -> list[Point2]:
    """Occupancy rectangle: width `length` across the walk direction, fixed
    depth along it.  A standing blocker defaults to facing +x."""
    if state.velocity.norm() > 1e-9:
        walk = state.velocity.unit()
    else:
        walk = Point2(1.0, 0.0)
    across = walk.perp()
    half_w = 0.5 * state.length
    half_d = 0.5 * BLOCKER_DEPTH
    c = state.position
    corners = [
        c + across * half_w + walk * half_d,
        c - across * half_w + walk * half_d,
        c - across * half_w - walk * half_d,
        c + across * half_w - walk * half_d,
    ]
    return ensure_ccw(corners)


@dataclass(frozen=True)
class Path:
    kind: str                      # "direct" | "reflected"
    reflector_index: int | None
    departure_angle: float         # degrees off boresight
    length: float                  # m
    gain: complex                  # linear amplitude, excluding blockage
    tof: float                     # s
    blocked: bool
    blockage_db: float = 0.0       # total attenuation from intersecting blockers


def _polyline_blockage_db(points: list[Point2],
                          blockers: tuple[BlockerState, ...]) -> float:
    total = 0.0
    for b in blockers:
        rect = blocker_occupancy(b)
        for a, c in zip(points, points[1:]):
            if segment_intersects_polygon(a, c, rect):
                total += b.attenuation_db
                break
    return total


def compute_paths(snapshot: SceneSnapshot, user_id: int,
                  wavelength: float = DEFAULT_WAVELENGTH) -> list[Path]:
    """Geometric paths from the base station (origin) to one user.

    The direct path always exists.  One specular path is added per reflector
    whose image-source reflection point falls strictly between its endpoints.
    Gains are free-space amplitudes wavelength/(4 pi d), scaled by the wall
    reflection coefficient; the phase each path picks up at the carrier is
    applied by the channel synthesis, so gains here are real-positive.
    """
    if user_id not in snapshot.users:
        raise LookupError(f"user {user_id} not in snapshot")
    pos = snapshot.users[user_id].position
    d = pos.norm()
    if d < 1e-6:
        raise ValueError("user sits on top of the base station")

    paths: list[Path] = []
    db = _polyline_blockage_db([ORIGIN, pos], snapshot.blockers)
    paths.append(Path(
        kind="direct", reflector_index=None,
        departure_angle=bearing_deg(pos), length=d,
        gain=complex(wavelength / (4.0 * math.pi * d)),
        tof=d / C0, blocked=db > 0.0, blockage_db=db))

    for idx, refl in enumerate(snapshot.reflectors):
        direction = refl.p2 - refl.p1
        spec = specular_point(ORIGIN, pos, refl.p1, direction)
        if spec is None:
            continue
        seg_len = direction.norm()
        s = (spec - refl.p1).dot(direction.unit())
        if not (1e-9 < s < seg_len - 1e-9):
            continue  # reflection point must fall strictly between endpoints
        length = spec.norm() + (pos - spec).norm()
        db = _polyline_blockage_db([ORIGIN, spec, pos], snapshot.blockers)
        paths.append(Path(
            kind="reflected", reflector_index=idx,
            departure_angle=bearing_deg(spec), length=length,
            gain=complex(refl.reflection_coeff * wavelength / (4.0 * math.pi * length)),
            tof=length / C0, blocked=db > 0.0, blockage_db=db))
    return paths


def friis_rss(distance: float, wavelength: float, tx_power_dbm: float = 0.0,
              tx_gain_db: float = 0.0, rx_gain_db: float = 0.0) -> float:
    """Free-space received power in dBm."""
    if distance <= 0.0:
        raise ValueError("distance must be positive")
    if wavelength <= 0.0:
        raise ValueError("wavelength must be positive")
    fspl_db = 20.0 * math.log10(4.0 * math.pi * distance / wavelength)
    return tx_power_dbm + tx_gain_db + rx_gain_db - fspl_db
