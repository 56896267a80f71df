"""Radar-domain tracking with identity anchoring from the radio.

Static background is removed with an exponential-moving-average clutter
profile in linear power.  Users are followed by constant-velocity Kalman
filters that search a bounding box around their prediction in the
decluttered range-angle map; identity labels come exclusively from the
radio contexts, re-attached at every recalibration by a one-to-one optimal
assignment.  Wall estimates turn into virtual (mirrored) base stations so a
tracked user position maps straight to the reflected-path departure angle.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .context import ReflectorEstimate, UserContext
from .geometry import (
    ORIGIN,
    Point2,
    bearing_deg,
    direction_from_orientation,
    mirror_across_line,
    segment_line_crossing,
    unit_from_bearing,
)
from .radar import RadarConfig, RangeAngleMap, find_peaks, peak_to_global, resolution_params

SIGMA_ACCEL = 0.5           # m/s^2, white-acceleration process noise
BBOX_HALF_EXTENT = 1.5      # m, search box half side
MAX_MISSES = 5
DETECT_MARGIN_DB = 6.0      # above the decluttered noise floor
CONTEXT_SIGMA = 0.3         # m, position noise of a radio context
ENDPOINT_MARGIN = 0.5       # m, slack beyond estimated wall endpoints


@dataclass
class ClutterProfile:
    """Running average of the static background, in linear power."""
    avg: np.ndarray | None = None
    n_frames_averaged: int = 0
    alpha: float = 0.1


def remove_clutter(ra_map: RangeAngleMap, profile: ClutterProfile) -> RangeAngleMap:
    """Subtract the averaged background in linear power, floor the residual,
    and fold the new frame into the profile.  The first frame passes through
    unchanged and seeds the average."""
    lin = 10.0 ** (ra_map.power_db / 10.0)
    if profile.n_frames_averaged == 0 or profile.avg is None:
        profile.avg = lin
        profile.n_frames_averaged = 1
        return ra_map
    residual = np.maximum(lin - profile.avg, 1e-30)
    profile.avg = (1.0 - profile.alpha) * profile.avg + profile.alpha * lin
    profile.n_frames_averaged += 1
    return RangeAngleMap(power_db=10.0 * np.log10(residual),
                         range_axis=ra_map.range_axis,
                         angle_axis=ra_map.angle_axis,
                         timestamp=ra_map.timestamp)


@dataclass
class Track:
    user_id: int
    state: np.ndarray       # (4,) x, y, vx, vy
    covariance: np.ndarray  # (4, 4)
    bbox_half_extent: float = BBOX_HALF_EXTENT
    last_update: float = 0.0
    misses: int = 0
    n_hits: int = 1         # measurement updates absorbed so far

    @property
    def position(self) -> Point2:
        return Point2(float(self.state[0]), float(self.state[1]))

    @property
    def velocity(self) -> Point2:
        return Point2(float(self.state[2]), float(self.state[3]))

    @property
    def bbox_center(self) -> Point2:
        return self.position


def new_track(user_id: int, position: Point2, t: float) -> Track:
    state = np.array([position.x, position.y, 0.0, 0.0])
    cov = np.diag([CONTEXT_SIGMA ** 2, CONTEXT_SIGMA ** 2, 1.0, 1.0])
    return Track(user_id=user_id, state=state, covariance=cov, last_update=t)


def _cv_matrices(dt: float) -> tuple[np.ndarray, np.ndarray]:
    f = np.eye(4)
    f[0, 2] = f[1, 3] = dt
    q1 = dt ** 4 / 4.0
    q2 = dt ** 3 / 2.0
    q3 = dt ** 2
    q = SIGMA_ACCEL ** 2 * np.array([[q1, 0, q2, 0],
                                     [0, q1, 0, q2],
                                     [q2, 0, q3, 0],
                                     [0, q2, 0, q3]])
    return f, q


_H = np.array([[1.0, 0.0, 0.0, 0.0],
               [0.0, 1.0, 0.0, 0.0]])


def _kf_predict(track: Track, t: float) -> tuple[np.ndarray, np.ndarray]:
    dt = max(t - track.last_update, 0.0)
    f, q = _cv_matrices(dt)
    return f @ track.state, f @ track.covariance @ f.T + q


def _kf_update(x: np.ndarray, p: np.ndarray, z: np.ndarray,
               r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = _H @ p @ _H.T + r
    k = p @ _H.T @ np.linalg.inv(s)
    x = x + k @ (z - _H @ x)
    p = (np.eye(4) - k @ _H) @ p
    return x, 0.5 * (p + p.T)


def predict_position(track: Track, t: float) -> Point2:
    x, _ = _kf_predict(track, t)
    return Point2(float(x[0]), float(x[1]))


def _measurement_noise(range_m: float, cfg: RadarConfig) -> np.ndarray:
    """Polar resolution cell mapped to Cartesian at the detection bearing.
    Sub-bin peak interpolation localizes well inside a cell, hence the 0.5
    factor on both axes."""
    res = resolution_params(cfg)
    sig_r = 0.5 * res["range_res"]
    sig_t = 0.5 * range_m * math.sin(math.radians(res["angle_res"]))
    return np.diag([sig_r ** 2, sig_t ** 2])


def _rotate_noise(r_polar: np.ndarray, bearing: float) -> np.ndarray:
    ur = unit_from_bearing(bearing)
    rot = np.array([[ur.x, -ur.y], [ur.y, ur.x]])  # radial, tangential axes
    return rot @ r_polar @ rot.T


def _window_peak(ra_map: RangeAngleMap, center: Point2, half: float,
                 cfg: RadarConfig, min_db: float):
    """Strongest sub-bin-refined peak whose cell falls inside the box."""
    best = None
    for pk in find_peaks(ra_map, min_db, max_peaks=16):
        p = peak_to_global(pk, cfg)
        if abs(p.x - center.x) <= half and abs(p.y - center.y) <= half:
            if best is None or pk.power_db > best[0].power_db:
                best = (pk, p)
    return best


def track_step(tracks: list[Track], decluttered: RangeAngleMap, t: float,
               cfg: RadarConfig) -> list[Track]:
    """Advance every track to the frame at time t.

    Each track predicts forward, then looks for the strongest detection
    inside its bounding box; with none above threshold it coasts on the
    prediction and counts a miss.  No births or deaths here: admission and
    identity are recalibration's job.
    """
    floor = float(np.median(decluttered.power_db))
    thr = floor + DETECT_MARGIN_DB
    out = []
    for tr in tracks:
        x, p = _kf_predict(tr, t)
        center = Point2(float(x[0]), float(x[1]))
        hit = _window_peak(decluttered, center, tr.bbox_half_extent, cfg, thr)
        if hit is None:
            out.append(dataclasses.replace(
                tr, state=x, covariance=p, last_update=t, misses=tr.misses + 1))
            continue
        pk, pos = hit
        r = _rotate_noise(_measurement_noise(pk.range_m, cfg), pk.angle_deg)
        x, p = _kf_update(x, p, np.array([pos.x, pos.y]), r)
        out.append(dataclasses.replace(
            tr, state=x, covariance=p, last_update=t, misses=0,
            n_hits=tr.n_hits + 1))
    return out


def recalibrate(tracks: list[Track], contexts: list[UserContext],
                t: float) -> list[Track]:
    """Re-anchor track identities to the radio contexts.

    Solves the one-to-one assignment minimizing total Euclidean distance
    between predicted track positions and context positions (ties fall to
    the lower user_id through the sorted context order), relabels matched
    tracks and snaps them with a position update, spawns tracks for
    unmatched contexts, and drops unmatched tracks that have been coasting
    longer than MAX_MISSES frames.
    """
    contexts = sorted(contexts, key=lambda c: c.user_id)
    ctx_pos = [ORIGIN + unit_from_bearing(c.angle) * c.distance for c in contexts]

    matched_tracks: dict[int, Track] = {}
    used_tracks: set[int] = set()
    if tracks and contexts:
        cost = np.zeros((len(tracks), len(contexts)))
        for i, tr in enumerate(tracks):
            tp = predict_position(tr, t)
            for j, cp in enumerate(ctx_pos):
                cost[i, j] = (tp - cp).norm()
        rows, cols = linear_sum_assignment(cost)
        for i, j in zip(rows, cols):
            tr, ctx, cp = tracks[i], contexts[j], ctx_pos[j]
            x, p = _kf_predict(tr, t)
            r = np.diag([CONTEXT_SIGMA ** 2, CONTEXT_SIGMA ** 2])
            x, p = _kf_update(x, p, np.array([cp.x, cp.y]), r)
            matched_tracks[ctx.user_id] = dataclasses.replace(
                tr, user_id=ctx.user_id, state=x, covariance=p,
                last_update=t, misses=0, n_hits=tr.n_hits + 1)
            used_tracks.add(i)

    out = [matched_tracks[c.user_id] for c in contexts if c.user_id in matched_tracks]
    for c, cp in zip(contexts, ctx_pos):
        if c.user_id not in matched_tracks:
            out.append(new_track(c.user_id, cp, t))
    taken = {tr.user_id for tr in out}
    for i, tr in enumerate(tracks):
        if i in used_tracks:
            continue
        if tr.misses <= MAX_MISSES and tr.user_id not in taken:
            out.append(tr)
            taken.add(tr.user_id)
    out.sort(key=lambda tr: tr.user_id)
    return out


def update_object_tracks(obj_tracks: list[Track], decluttered: RangeAngleMap,
                         t: float, exclude: list[tuple[Point2, float]],
                         cfg: RadarConfig, next_id: int = -1,
                         max_object_range: float = 25.0
                         ) -> tuple[list[Track], int]:
    """Anonymous moving-object tracks (blockers and the like).

    Peaks inside any exclusion box (the user tracks) are ignored, as are
    antenna sidelobes: any peak with a >=6 dB stronger peak on the same
    range ring gets dropped.  The survivors feed a greedy nearest-neighbor
    association; unclaimed ones spawn tracks with negative ids so they can
    never collide with user labels.
    """
    res = resolution_params(cfg)
    floor = float(np.median(decluttered.power_db))
    peaks = find_peaks(decluttered, floor + DETECT_MARGIN_DB + 3.0, max_peaks=12)
    cands: list[tuple[Point2, float, float]] = []
    for pk in peaks:
        p = peak_to_global(pk, cfg)
        if pk.range_m > max_object_range:
            continue
        if any(abs(pk.range_m - other.range_m) <= 2.0 * res["range_res"]
               and other.power_db >= pk.power_db + 6.0 for other in peaks):
            continue
        if any(abs(p.x - c.x) <= h and abs(p.y - c.y) <= h for c, h in exclude):
            continue
        cands.append((p, pk.range_m, pk.angle_deg))

    out: list[Track] = []
    claimed: set[int] = set()
    for tr in obj_tracks:
        x, p = _kf_predict(tr, t)
        center = Point2(float(x[0]), float(x[1]))
        best_j, best_d = -1, 1.2
        for j, (cp, _, _) in enumerate(cands):
            if j in claimed:
                continue
            d = (cp - center).norm()
            if d < best_d:
                best_j, best_d = j, d
        if best_j >= 0:
            cp, rng_m, ang = cands[best_j]
            claimed.add(best_j)
            r = _rotate_noise(_measurement_noise(rng_m, cfg), ang)
            x, p = _kf_update(x, p, np.array([cp.x, cp.y]), r)
            out.append(dataclasses.replace(tr, state=x, covariance=p,
                                           last_update=t, misses=0,
                                           n_hits=tr.n_hits + 1))
        elif tr.misses < MAX_MISSES:
            out.append(dataclasses.replace(tr, state=x, covariance=p,
                                           last_update=t, misses=tr.misses + 1))
    for j, (cp, _, _) in enumerate(cands):
        if j not in claimed:
            out.append(new_track(next_id, cp, t))
            next_id -= 1
    return out, next_id


# ----------------------------------------------------------------------
# reflected-path geometry from accumulated wall estimates
# ----------------------------------------------------------------------

def virtual_bs(reflector: ReflectorEstimate) -> Point2:
    """Base station mirrored across the estimated wall line."""
    return mirror_across_line(ORIGIN, reflector.point,
                              direction_from_orientation(reflector.orientation_phi))


def reflected_path_angle(track: "Track | Point2",
                         reflector: ReflectorEstimate) -> float | None:
    """Departure angle of the wall bounce toward a tracked user.

    Intersects the virtual-BS-to-user segment with the wall line and checks
    the crossing lies within the observed endpoints (with a small margin);
    returns None when the geometry walks off the known wall extent.
    """
    pos = track.position if isinstance(track, Track) else track
    direction = direction_from_orientation(reflector.orientation_phi)
    v = virtual_bs(reflector)
    q = segment_line_crossing(v, pos, reflector.point, direction)
    if q is None:
        return None
    e1, e2 = reflector.endpoints
    seg = e2 - e1
    seg_len = seg.norm()
    if seg_len < 1e-12:
        if (q - e1).norm() > ENDPOINT_MARGIN:
            return None
    else:
        s = (q - e1).dot(seg.unit())
        if not (-ENDPOINT_MARGIN <= s <= seg_len + ENDPOINT_MARGIN):
            return None
    return bearing_deg(q)


@dataclass(frozen=True)
class TrackLogRow:
    """One per-frame line of the exported track log."""
    t: float
    user_id: int
    x: float
    y: float
    direct_angle: float
    reflected_angle: float | None
    misses: int


def track_log_row(t: float, track: Track,
                  reflectors=()) -> TrackLogRow:
    """Snapshot a track for the log, resolving the bounce angle if any
    learned wall currently offers one (walls are kept sorted by support,
    so the first usable one wins)."""
    refl = None
    for est in reflectors:
        ang = reflected_path_angle(track, est)
        if ang is not None:
            refl = ang
            break
    return TrackLogRow(t=t, user_id=track.user_id,
                       x=track.position.x, y=track.position.y,
                       direct_angle=bearing_deg(track.position)
                       if track.position.norm() > 1e-12 else 0.0,
                       reflected_angle=refl, misses=track.misses)


def write_track_log_csv(path: str, rows) -> None:
    with open(path, "w", newline="") as f:
        f.write("t,user_id,x,y,direct_angle,reflected_angle,misses\n")
        for r in rows:
            refl = "" if r.reflected_angle is None else f"{r.reflected_angle:.4f}"
            f.write(f"{r.t:.4f},{r.user_id},{r.x:.4f},{r.y:.4f},"
                    f"{r.direct_angle:.4f},{refl},{r.misses}\n")
