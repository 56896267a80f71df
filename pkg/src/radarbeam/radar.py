"""FMCW MIMO radar simulation.

The radar is mounted a small offset away from the radio array and shares its
boresight.  Each frame is synthesized directly in the deramped (beat-signal)
domain: every scatterer contributes a complex tone whose frequency encodes
its range and whose inter-antenna phase ramp encodes its angle across the
n_tx * n_rx virtual uniform linear array.  Absolute calibration is not
modeled; amplitudes follow sqrt(rcs)/r^2 in arbitrary units.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import C0, Point2, bearing_deg, unit_from_bearing
from .scene import SceneSnapshot

log = logging.getLogger(__name__)

_FLOOR_LIN = 1e-30  # power floor so empty maps stay finite in dB


@dataclass(frozen=True)
class RadarConfig:
    carrier_freq: float = 24e9        # Hz
    bandwidth: float = 200e6          # Hz swept per chirp
    samples_per_chirp: int = 1000
    chirp_slope: float = 2e12         # Hz/s
    ramp_time: float = 100e-6         # s
    chirp_duration: float = 200e-6    # s
    chirps_per_frame: int = 200
    frame_period: float = 0.2         # s
    n_tx: int = 2
    n_rx: int = 8
    noise_floor_db: float = -60.0     # per-sample noise power, dB (arbitrary ref)
    mount_offset: Point2 = Point2(0.15, 0.0)  # radar position in radio coordinates
    velocity_res: float = 0.75        # m/s, carried as a platform constant
    angle_bins: int = 128

    def __post_init__(self) -> None:
        if self.bandwidth <= 0 or self.carrier_freq <= 0:
            raise ValueError("carrier_freq and bandwidth must be positive")
        if self.samples_per_chirp < 1 or self.chirps_per_frame < 1:
            raise ValueError("samples_per_chirp and chirps_per_frame must be >= 1")
        if self.n_tx < 1 or self.n_rx < 1:
            raise ValueError("n_tx and n_rx must be >= 1")
        if not 0.0 < self.ramp_time <= self.chirp_duration:
            raise ValueError("need 0 < ramp_time <= chirp_duration")
        if self.frame_period < self.chirps_per_frame * self.chirp_duration:
            raise ValueError("frame_period shorter than the chirps it contains")
        if self.angle_bins < self.n_tx * self.n_rx:
            raise ValueError("angle_bins must cover the virtual array")

    @property
    def n_virtual(self) -> int:
        return self.n_tx * self.n_rx

    @property
    def wavelength(self) -> float:
        return C0 / self.carrier_freq


def resolution_params(cfg: RadarConfig) -> dict[str, float]:
    """Closed-form resolution figures for the configured waveform."""
    range_res = C0 / (2.0 * cfg.bandwidth)
    return {
        "range_res": range_res,
        "max_range": range_res * cfg.samples_per_chirp,
        "angle_res": math.degrees(2.0 / cfg.n_virtual),
        "velocity_res": cfg.velocity_res,
    }


@dataclass(frozen=True)
class RadarFrame:
    timestamp: float
    raw: np.ndarray  # complex, (n_virtual, samples_per_chirp)


def synthesize_frame(snapshot: SceneSnapshot, cfg: RadarConfig,
                     rng: np.random.Generator) -> RadarFrame:
    """One deramped frame of the scene: users, blockers, and static clutter.

    Scatterers beyond the unambiguous range are dropped (logged at debug).
    Chirp-level integration is folded into the per-frame tone; Doppler
    processing is out of scope here.
    """
    res = resolution_params(cfg)
    n_ant, n_s = cfg.n_virtual, cfg.samples_per_chirp
    raw = np.zeros((n_ant, n_s), dtype=complex)

    scatterers: list[tuple[Point2, float]] = []
    for uid in sorted(snapshot.users):
        u = snapshot.users[uid]
        scatterers.append((u.position, u.rcs))
    for b in snapshot.blockers:
        scatterers.append((b.position, b.rcs))
    scatterers.extend(snapshot.static_clutter)

    s_idx = np.arange(n_s)
    ant = np.arange(n_ant)
    for pos, rcs in scatterers:
        rel = pos - cfg.mount_offset
        r = rel.norm()
        if r <= 1e-6:
            continue
        if r > res["max_range"]:
            log.debug("dropping scatterer at %.1f m beyond max range %.1f m",
                      r, res["max_range"])
            continue
        amp = math.sqrt(max(rcs, 0.0)) / (r * r)
        tone = np.exp(2j * np.pi * (r / res["range_res"]) * s_idx / n_s)
        ramp = np.exp(-1j * np.pi * ant * math.sin(math.radians(bearing_deg(rel))))
        raw += amp * np.outer(ramp, tone)

    sigma = math.sqrt(10.0 ** (cfg.noise_floor_db / 10.0) / 2.0)
    raw += sigma * (rng.standard_normal(raw.shape) + 1j * rng.standard_normal(raw.shape))
    return RadarFrame(timestamp=snapshot.t, raw=raw)


@dataclass(frozen=True)
class RangeAngleMap:
    power_db: np.ndarray   # (n_range, n_angle)
    range_axis: np.ndarray  # m, monotone increasing
    angle_axis: np.ndarray  # degrees, monotone increasing
    timestamp: float


def range_angle_map(frame: RadarFrame, cfg: RadarConfig) -> RangeAngleMap:
    """2-D DFT of a raw frame: range over fast-time samples, angle over the
    virtual array zero-padded to `angle_bins` (uniform in sin space)."""
    res = resolution_params(cfg)
    rng_fft = np.fft.fft(frame.raw, axis=1)                     # (ant, range)
    full = np.fft.fft(rng_fft, n=cfg.angle_bins, axis=0)        # (angle, range)
    full = np.fft.fftshift(full, axes=0)

    # the steering phase is exp(-j pi n sin(theta)), so the DFT peak lands at
    # frequency -sin(theta)/2; flip to make the angle axis increase
    u = -2.0 * np.fft.fftshift(np.fft.fftfreq(cfg.angle_bins))
    order = np.argsort(u)
    u = u[order]
    power = np.abs(full[order, :].T) ** 2                       # (range, angle)

    return RangeAngleMap(
        power_db=10.0 * np.log10(np.maximum(power, _FLOOR_LIN)),
        range_axis=np.arange(cfg.samples_per_chirp) * res["range_res"],
        angle_axis=np.degrees(np.arcsin(np.clip(u, -1.0, 1.0))),
        timestamp=frame.timestamp)


@dataclass(frozen=True)
class MapPeak:
    range_m: float
    angle_deg: float
    power_db: float


def _parabolic_offset(left: float, mid: float, right: float) -> float:
    den = left - 2.0 * mid + right
    if abs(den) < 1e-12:
        return 0.0
    return float(np.clip(0.5 * (left - right) / den, -0.5, 0.5))


def find_peaks(ra_map: RangeAngleMap, min_db: float,
               max_peaks: int | None = None) -> list[MapPeak]:
    """Local maxima of the map above `min_db`, strongest first.

    Peak positions are refined to sub-bin accuracy with a parabolic fit in
    the range-bin and sin-angle dimensions.
    """
    p = ra_map.power_db
    local_max = p == ndimage.maximum_filter(p, size=3, mode="nearest")
    rows, cols = np.nonzero(local_max & (p >= min_db))
    order = np.argsort(p[rows, cols])[::-1]
    if max_peaks is not None:
        order = order[:max_peaks]

    dr = float(ra_map.range_axis[1] - ra_map.range_axis[0])
    u_axis = np.sin(np.radians(ra_map.angle_axis))
    du = float(u_axis[1] - u_axis[0])

    peaks = []
    for i in order:
        r, c = int(rows[i]), int(cols[i])
        off_r = off_c = 0.0
        if 0 < r < p.shape[0] - 1:
            off_r = _parabolic_offset(p[r - 1, c], p[r, c], p[r + 1, c])
        if 0 < c < p.shape[1] - 1:
            off_c = _parabolic_offset(p[r, c - 1], p[r, c], p[r, c + 1])
        rng_m = float(ra_map.range_axis[r]) + off_r * dr
        u = float(np.clip(u_axis[c] + off_c * du, -1.0, 1.0))
        peaks.append(MapPeak(range_m=rng_m,
                             angle_deg=math.degrees(math.asin(u)),
                             power_db=float(p[r, c])))
    return peaks


def peak_to_global(peak: MapPeak, cfg: RadarConfig) -> Point2:
    """Convert a radar-relative detection into radio (global) coordinates."""
    return cfg.mount_offset + unit_from_bearing(peak.angle_deg) * peak.range_m


_HEADER = struct.Struct("<IId")  # n_ant, n_range, timestamp


def dump_frame(frame: RadarFrame, path: str) -> None:
    """Write a frame as little-endian complex64 with a small binary header."""
    raw = np.ascontiguousarray(frame.raw.astype(np.complex64))
    with open(path, "wb") as f:
        f.write(_HEADER.pack(raw.shape[0], raw.shape[1], frame.timestamp))
        f.write(raw.tobytes())


def load_frame(path: str) -> RadarFrame:
    with open(path, "rb") as f:
        n_ant, n_range, timestamp = _HEADER.unpack(f.read(_HEADER.size))
        data = np.frombuffer(f.read(), dtype=np.complex64)
    if data.size != n_ant * n_range:
        raise ValueError(f"frame payload truncated: {data.size} samples for "
                         f"{n_ant}x{n_range} header")
    return RadarFrame(timestamp=timestamp, raw=data.reshape(n_ant, n_range))
