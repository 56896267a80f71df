"""User context acquisition from joint radio/radar observations.

The radio side gives identity-resolved measurements (each user reports its
own beam-scan), the radar side gives accurate range.  This module fuses the
two into per-user contexts, decomposes the scanned channel into discrete
paths with a beamspace MUSIC stage followed by a delay MUSIC stage, and
turns reflected paths into wall estimates via ellipse geometry: the locus of
reflection points with a known path length is an ellipse with foci at the
base station and the user, and the wall must be tangent to it.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    C0,
    Point2,
    direction_from_orientation,
    orientation_diff_deg,
    point_to_line_distance,
    unit_from_bearing,
    wrap_orientation_deg,
)
from .radar import RadarConfig, RangeAngleMap, find_peaks, peak_to_global, resolution_params
from .radio import BeamScanReport, RadioConfig, codebook_angles, gain_matrix

ANGLE_GRID_STEP_DEG = 0.5
DELAY_GRID_STEP = 0.5e-9        # s
MAX_PATHS = 3
EIG_RATIO_DB = 20.0             # signal/noise eigenvalue split
PEAK_ABOVE_MEDIAN_DB = 6.0      # pseudospectrum peak acceptance
REFINE_PEAK_MARGIN_DB = 6.0     # radar peaks considered for range refinement
GROW_RESIDUAL = 0.05            # unexplained-norm share worth growing for
GROW_SHARE = 0.08               # residual energy one cell must concentrate
SEED_MIN_ENERGY = 0.25          # a from-scratch seed must explain this share


class EstimationError(RuntimeError):
    """Raised when a channel decomposition finds no usable path."""


class GeometryError(ValueError):
    """Raised when reflector geometry degenerates (e.g. path length <= LoS)."""


@dataclass(frozen=True)
class UserContext:
    user_id: int
    angle: float          # degrees off boresight
    distance: float       # m
    timestamp: float
    radar_refined: bool = True


@dataclass(frozen=True)
class PathEstimate:
    angle: float          # degrees off boresight
    rel_tof: float        # s, relative to the first-arriving path
    is_direct: bool
    amplitude: float = 1.0


@dataclass(frozen=True)
class ReflectorEstimate:
    point: Point2                      # a reflection point on the wall
    orientation_phi: float             # slope angle vs +x axis, (-90, 90]
    endpoints: tuple[Point2, Point2]   # observed extent
    n_observations: int


# ----------------------------------------------------------------------
# context acquisition
# ----------------------------------------------------------------------

def acquire_user_context(report: BeamScanReport, user_id: int,
                         radar_map: RangeAngleMap | None,
                         radio_cfg: RadioConfig, radar_cfg: RadarConfig,
                         cal_db: float = 0.0) -> UserContext:
    """Angle from the best beam, distance from inverted free-space loss,
    refined by the nearest radar peak within a coarse gate.

    The Friis inversion assumes the aligned beam gain sqrt(N); `cal_db`
    absorbs any fixed link calibration error.  Multipath makes the RSS-only
    distance unreliable, which is exactly why the radar refinement exists:
    the refined range is taken from the radar peak closest to the coarse
    position, gated by max(2 * range_res, 0.25 * coarse distance).
    """
    if user_id not in report.users:
        raise LookupError(f"user {user_id} not in beam-scan report")
    scan = report.users[user_id]
    best = int(np.argmax(scan.rss))
    angle = float(codebook_angles(radio_cfg)[best])

    # invert: rss = tx + 10 log10(N) - 20 log10(4 pi d / lambda) + cal
    link_db = (radio_cfg.tx_power_dbm + 10.0 * math.log10(radio_cfg.n_antennas)
               + cal_db - float(scan.rss[best]))
    coarse = radio_cfg.wavelength / (4.0 * math.pi) * 10.0 ** (link_db / 20.0)

    distance, refined = coarse, False
    if radar_map is not None:
        res = resolution_params(radar_cfg)
        gate = max(2.0 * res["range_res"], 0.25 * coarse)
        target = unit_from_bearing(angle) * coarse
        floor = float(np.median(radar_map.power_db))
        best_d = math.inf
        for pk in find_peaks(radar_map, floor + REFINE_PEAK_MARGIN_DB, max_peaks=12):
            d = (peak_to_global(pk, radar_cfg) - target).norm()
            if d <= gate and d < best_d:
                best_d = d
                distance, refined = pk.range_m, True
    return UserContext(user_id=user_id, angle=angle, distance=distance,
                       timestamp=report.timestamp, radar_refined=refined)


# ----------------------------------------------------------------------
# multipath decomposition (beamspace MUSIC + delay MUSIC)
# ----------------------------------------------------------------------

@functools.lru_cache(maxsize=8)
def _angle_grid(cfg: RadioConfig) -> np.ndarray:
    n = int(round(2 * cfg.fov_deg / ANGLE_GRID_STEP_DEG)) + 1
    return np.linspace(-cfg.fov_deg, cfg.fov_deg, n)


@functools.lru_cache(maxsize=8)
def _grid_gains(cfg: RadioConfig) -> np.ndarray:
    return gain_matrix(cfg, _angle_grid(cfg))  # (codebook, grid)


@functools.lru_cache(maxsize=8)
def _delay_grid(cfg: RadioConfig) -> np.ndarray:
    return np.arange(0.0, 1.0 / cfg.subcarrier_spacing, DELAY_GRID_STEP)


@functools.lru_cache(maxsize=8)
def _delay_atoms(cfg: RadioConfig,
                 n_sub: int) -> tuple[np.ndarray, np.ndarray]:
    """Delay steering atoms over the grid: smoothing-window and full-band."""
    taus = _delay_grid(cfg)
    phase = -2j * np.pi * cfg.subcarrier_spacing * taus[None, :]
    e_grid = np.exp(np.arange(n_sub // 2)[:, None] * phase)
    e_full = np.exp(np.arange(n_sub)[:, None] * phase)
    return e_grid, e_full


def _signal_dim(evals_desc: np.ndarray, cap: int) -> int:
    """Eigenvalues within EIG_RATIO_DB of the largest count as signal."""
    thr = evals_desc[0] * 10.0 ** (-EIG_RATIO_DB / 10.0)
    return int(np.clip(np.sum(evals_desc > thr), 1, cap))


def _spectrum_peaks(p_db: np.ndarray, max_peaks: int) -> list[int]:
    p = np.asarray(p_db)
    thr = float(np.median(p)) + PEAK_ABOVE_MEDIAN_DB
    rises = np.empty(p.shape, dtype=bool)
    rises[0], rises[1:] = True, p[1:] > p[:-1]
    falls = np.empty(p.shape, dtype=bool)
    falls[-1], falls[:-1] = True, p[:-1] >= p[1:]
    idx = np.flatnonzero(rises & falls & (p >= thr))
    idx = idx[np.argsort(-p[idx], kind="stable")][:max_peaks]
    return [int(i) for i in idx]


def _mask_cells(cfg: RadioConfig) -> int:
    """Grid cells hidden around an existing pick: half the array resolution.

    Two atoms closer than this are one physical path as far as the scanning
    array can tell, so pick stages never place them that close.
    """
    half_res = 0.5 * math.degrees(2.0 / cfg.n_antennas)
    return max(2, int(half_res / ANGLE_GRID_STEP_DEG))


def _clean_pick(resid: np.ndarray, g: np.ndarray, taken: list[int],
                mask: int, min_energy: float) -> int | None:
    """Strongest matched-filter angle cell away from already-taken cells.

    Returns the grid index whose beamspace response explains the most
    residual energy, or None if even the best cell explains less than
    min_energy (absolute, same units as ``norm(resid)**2``).
    """
    score = np.sum(np.abs(g.T @ resid) ** 2, axis=1) / np.sum(g * g, axis=0)
    for gi in taken:
        score[max(0, gi - mask):gi + mask + 1] = -1.0
    best = int(np.argmax(score))
    if score[best] <= min_energy:
        return None
    return best


def _fit_paths(csi: np.ndarray, g: np.ndarray, angle_idx: list[int],
               taus: np.ndarray, e_grid: np.ndarray, e_full: np.ndarray,
               m: int):
    """Joint delay/amplitude fit for a fixed set of angle cells.

    The paths are mutually coherent and often inside one natural delay
    resolution cell, so each path's delay is estimated on the csi with
    every other current path estimate subtracted, alternating twice;
    amplitudes come from a joint least-squares fit after every update.
    Returns (delays, coeff, atoms, residual).
    """
    n_paths = len(angle_idx)
    delays = [0.0] * n_paths
    atoms: list[np.ndarray | None] = [None] * n_paths
    coeff = np.zeros(n_paths, dtype=complex)
    flat = csi.ravel()
    for _sweep in range(2):
        for i, gi in enumerate(angle_idx):
            resid = flat.copy()
            for j in range(n_paths):
                if j != i and atoms[j] is not None:
                    resid -= atoms[j] * coeff[j]
            s = g[:, gi] @ resid.reshape(csi.shape)
            delays[i] = _single_delay(s, e_grid, e_full, taus, m)
            atoms[i] = np.outer(
                g[:, gi],
                e_full[:, int(round(delays[i] / DELAY_GRID_STEP))]).ravel()
            live = [j for j in range(n_paths) if atoms[j] is not None]
            a = np.stack([atoms[j] for j in live], axis=1)
            sol, *_ = np.linalg.lstsq(a, flat, rcond=None)
            for j, c in zip(live, sol):
                coeff[j] = c
    resid = flat - np.stack(atoms, axis=1) @ coeff
    return delays, coeff, atoms, resid


def estimate_paths(report: BeamScanReport, user_id: int,
                   cfg: RadioConfig) -> list[PathEstimate]:
    """Decompose one user's scanned channel into up to MAX_PATHS paths.

    Angles: beamspace MUSIC on the beam-domain covariance, using subcarriers
    as snapshots, scanned on a 0.5 degree grid.  Delays: per angle, the CSI
    (minus the other reconstructed paths) is projected onto that beamspace
    response and a smoothed MUSIC runs over the subcarrier dimension on a
    [0, 1/df) grid; amplitudes come from a joint least-squares fit.

    Paths whose delays differ by much less than the inverse scanned band
    stay coherent across every subcarrier, which collapses the beam-domain
    covariance to rank one and can hide well-separated angles from MUSIC.
    When that happens (flat pseudospectrum, or a fit that leaves more than
    GROW_RESIDUAL of the energy unexplained) the path set is seeded/grown
    by a matched filter on the residual and the angle cells are re-picked
    by alternating cancellation until the fit is self-consistent.

    Output is sorted by relative time of flight; the earliest (ties broken
    toward the stronger path) is marked direct.
    """
    if user_id not in report.users:
        raise LookupError(f"user {user_id} not in beam-scan report")
    csi = report.users[user_id].csi
    n_beams, n_sub = csi.shape
    if n_sub < 2:
        raise ValueError("need at least two subcarriers")

    # --- angle stage -------------------------------------------------
    cov = csi @ csi.conj().T / n_sub
    evals, evecs = np.linalg.eigh(cov)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    dim = _signal_dim(evals, MAX_PATHS)
    # with fewer snapshots than beams the sample covariance is rank
    # deficient; the structural null space beyond the data rank carries no
    # noise information and must stay out of the noise subspace
    rank = min(n_beams, n_sub)
    noise_sub = evecs[:, dim:rank]

    grid = _angle_grid(cfg)
    g = _grid_gains(cfg)                                   # (B, G)
    proj = np.abs(noise_sub.conj().T @ g) ** 2             # (B-dim, G)
    denom = np.maximum(proj.sum(axis=0), 1e-30)
    p_db = 10.0 * np.log10(np.sum(g * g, axis=0) / denom)

    angle_idx = _spectrum_peaks(p_db, MAX_PATHS)
    total = float(np.linalg.norm(csi))
    taus = _delay_grid(cfg)
    m = n_sub // 2                                         # smoothing window
    e_grid, e_full = _delay_atoms(cfg, n_sub)

    mask = _mask_cells(cfg)
    rescued = False
    if not angle_idx:
        seed = _clean_pick(csi, g, [], mask, SEED_MIN_ENERGY * total * total)
        if seed is None:
            raise EstimationError("no path found in the angle pseudospectrum")
        angle_idx = [seed]
        rescued = True

    # --- delay stage -------------------------------------------------
    delays, coeff, atoms, resid = _fit_paths(csi, g, angle_idx, taus,
                                             e_grid, e_full, m)

    def refine():
        # a collapsed pseudospectrum peak can sit between the true angles;
        # re-pick each path's angle cell and delay jointly by the matched
        # filter with the other paths cancelled, until nothing moves.  This
        # is an exhaustive two-dimensional alternation, so coherent paths
        # converge to the grid cells an oracle grid search would find.
        nonlocal delays, coeff, atoms, resid
        flat = csi.ravel()
        gnorm = np.sqrt(np.sum(g * g, axis=0))
        for _sweep in range(3):
            moved = False
            for i in range(len(angle_idx)):
                part = flat.copy()
                for j in range(len(angle_idx)):
                    if j != i:
                        part -= atoms[j] * coeff[j]
                scores = np.abs((g.T @ part.reshape(csi.shape))
                                @ e_full.conj()) / gnorm[:, None]
                for j, cj in enumerate(angle_idx):
                    if j != i:
                        scores[max(0, cj - mask):cj + mask + 1] = -1.0
                ci, di = np.unravel_index(int(np.argmax(scores)),
                                          scores.shape)
                if ci != angle_idx[i] or taus[di] != delays[i]:
                    moved = True
                angle_idx[i] = int(ci)
                delays[i] = float(taus[di])
                atoms[i] = np.outer(g[:, ci], e_full[:, di]).ravel()
                a = np.stack(atoms, axis=1)
                coeff, *_ = np.linalg.lstsq(a, flat, rcond=None)
            resid = flat - np.stack(atoms, axis=1) @ coeff
            if not moved:
                break

    if rescued:
        refine()

    # model growth: a material residual that concentrates in one angle cell
    # is a path the angle stage under-counted; diffuse residuals are noise
    # and off-grid quantization leftovers are never material.  Every added
    # cell is followed by a refinement pass so that a mispicked compromise
    # angle moves out of the way before the model grows any further.
    while len(angle_idx) < MAX_PATHS:
        rn = float(np.linalg.norm(resid))
        if rn <= GROW_RESIDUAL * total:
            break
        extra = _clean_pick(resid.reshape(csi.shape), g, angle_idx, mask,
                            GROW_SHARE * rn * rn)
        if extra is None:
            break
        fit = _fit_paths(csi, g, angle_idx + [extra], taus,
                         e_grid, e_full, m)
        if np.linalg.norm(fit[3]) >= 0.98 * rn:
            break
        angle_idx.append(extra)
        delays, coeff, atoms, resid = fit
        rescued = True
        refine()

    angles = [float(grid[i]) for i in angle_idx]
    amps = np.abs(coeff)
    order = sorted(range(len(angles)), key=lambda i: (delays[i], -amps[i]))
    t0 = delays[order[0]]
    return [PathEstimate(angle=angles[i], rel_tof=delays[i] - t0,
                         is_direct=(j == 0), amplitude=float(amps[i]))
            for j, i in enumerate(order)]


def _single_delay(s: np.ndarray, e_grid: np.ndarray, e_full: np.ndarray,
                  taus: np.ndarray, m: int) -> float:
    """Delay of the dominant tone in a projected subcarrier series.

    Forward-backward spatial smoothing over sliding windows decorrelates
    what coherence remains, MUSIC proposes candidates, and the matched
    filter picks the strongest of them.
    """
    windows = np.lib.stride_tricks.sliding_window_view(s, m)  # (K-m+1, m)
    cov_d = windows.T @ windows.conj() / windows.shape[0]
    rev = np.eye(m)[::-1]
    cov_d = 0.5 * (cov_d + rev @ cov_d.conj() @ rev)
    ev_d, vec_d = np.linalg.eigh(cov_d)
    ev_d, vec_d = ev_d[::-1], vec_d[:, ::-1]
    dim_d = _signal_dim(ev_d, MAX_PATHS)
    noise_d = vec_d[:, dim_d:]
    p_tau = 1.0 / np.maximum(np.sum(np.abs(noise_d.conj().T @ e_grid) ** 2,
                                    axis=0), 1e-30)
    cand = _spectrum_peaks(10.0 * np.log10(p_tau), MAX_PATHS)
    if not cand:
        cand = [int(np.argmax(p_tau))]
    mf = np.abs(s.conj() @ e_full[:, cand]) ** 2
    return float(taus[cand[int(np.argmax(mf))]])


# ----------------------------------------------------------------------
# reflector geometry
# ----------------------------------------------------------------------

def estimate_reflector_point(bs: Point2, user: UserContext,
                             refl: PathEstimate) -> tuple[Point2, float]:
    """Reflection point and wall orientation from one reflected path.

    The reflected path length (LoS distance + c0 * rel_tof) fixes an ellipse
    with foci at the base station and the user; the reflection point is where
    the departure ray from the base station meets it, and the wall must lie
    along the tangent there.  Since the ray starts at a focus it crosses the
    ellipse exactly once going forward.
    """
    if refl.is_direct:
        raise ValueError("need a reflected path, got the direct one")
    user_pos = bs + unit_from_bearing(user.angle) * user.distance
    d_vec = user_pos - bs
    d = d_vec.norm()
    total = user.distance + C0 * refl.rel_tof
    if total <= d + 1e-9:
        raise GeometryError(
            f"path length {total:.3f} m does not exceed LoS {d:.3f} m")

    u = unit_from_bearing(refl.angle)
    t = (total * total - d * d) / (2.0 * (total - u.dot(d_vec)))
    if t <= 0.0:
        raise GeometryError("departure ray never meets the path-length ellipse")
    point = bs + u * t

    normal = (point - bs).unit() + (point - user_pos).unit()
    tangent = normal.perp()
    phi = wrap_orientation_deg(math.degrees(math.atan2(tangent.y, tangent.x)))
    return point, phi


# ----------------------------------------------------------------------
# reflector accumulation
# ----------------------------------------------------------------------

_CLUSTER_MAX_ORIENT_DIFF = 10.0  # degrees
_CLUSTER_MAX_LINE_DIST = 0.5     # m


def _mean_orientation(phis: list[float]) -> float:
    """Circular mean on the half-circle (orientations live mod 180)."""
    c = sum(math.cos(2.0 * math.radians(p)) for p in phis)
    s = sum(math.sin(2.0 * math.radians(p)) for p in phis)
    return wrap_orientation_deg(0.5 * math.degrees(math.atan2(s, c)))


class _Cluster:
    def __init__(self, point: Point2, phi: float):
        self.points: list[Point2] = [point]
        self.phis: list[float] = [phi]
        self.anchor = point
        self.direction = direction_from_orientation(phi)

    def distance_to_line(self, p: Point2) -> float:
        return point_to_line_distance(p, self.anchor, self.direction)

    @property
    def orientation(self) -> float:
        return wrap_orientation_deg(
            math.degrees(math.atan2(self.direction.y, self.direction.x)))

    def add(self, point: Point2, phi: float) -> None:
        self.points.append(point)
        self.phis.append(phi)
        self._refit()

    def _refit(self) -> None:
        xs = np.array([p.x for p in self.points])
        ys = np.array([p.y for p in self.points])
        cx, cy = float(xs.mean()), float(ys.mean())
        self.anchor = Point2(cx, cy)
        cov = np.cov(np.stack([xs - cx, ys - cy]), bias=True)
        evals, evecs = np.linalg.eigh(np.atleast_2d(cov))
        # total least squares needs the points spread well past their own
        # scatter; tight clusters keep the per-observation tangent average
        if evals[-1] > 0.15:
            v = evecs[:, -1]
            self.direction = Point2(float(v[0]), float(v[1]))
        else:
            self.direction = direction_from_orientation(_mean_orientation(self.phis))


def accumulate_reflector(history: list[tuple[Point2, float]]) -> list[ReflectorEstimate]:
    """Greedy clustering of (reflection point, orientation) observations.

    An observation joins the first cluster whose orientation is within 10
    degrees and whose fitted line passes within 0.5 m; clusters refit their
    line by total least squares after every addition.  Endpoints are the
    extreme projections of member points; a single-observation cluster has
    coincident endpoints (treat it as low confidence).
    """
    clusters: list[_Cluster] = []
    for point, phi in history:
        for c in clusters:
            if (orientation_diff_deg(phi, c.orientation) <= _CLUSTER_MAX_ORIENT_DIFF
                    and c.distance_to_line(point) <= _CLUSTER_MAX_LINE_DIST):
                c.add(point, phi)
                break
        else:
            clusters.append(_Cluster(point, phi))

    out = []
    for c in clusters:
        u = c.direction.unit()
        t = [(p - c.anchor).dot(u) for p in c.points]
        e1 = c.anchor + u * min(t)
        e2 = c.anchor + u * max(t)
        out.append(ReflectorEstimate(point=c.anchor,
                                     orientation_phi=c.orientation,
                                     endpoints=(e1, e2),
                                     n_observations=len(c.points)))
    out.sort(key=lambda r: (-r.n_observations, r.point.x, r.point.y))
    return out


def observation_matches(est: ReflectorEstimate, point: Point2,
                        phi: float) -> bool:
    """Whether an observation lies on the same wall as an estimate, using the
    clustering thresholds."""
    if orientation_diff_deg(phi, est.orientation_phi) > _CLUSTER_MAX_ORIENT_DIFF:
        return False
    d = point_to_line_distance(point, est.point,
                               direction_from_orientation(est.orientation_phi))
    return d <= _CLUSTER_MAX_LINE_DIST


def write_reflectors_csv(path: str, estimates: list[ReflectorEstimate]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x1", "y1", "x2", "y2", "orientation_phi", "n_observations"])
        for r in estimates:
            (e1, e2) = r.endpoints
            w.writerow([f"{e1.x:.6g}", f"{e1.y:.6g}", f"{e2.x:.6g}",
                        f"{e2.y:.6g}", f"{r.orientation_phi:.6g}",
                        r.n_observations])
