"""mmWave radio front end: analog beam codebook and exhaustive beam scans.

The base station sweeps a codebook of `codebook_size` beams spaced uniformly
in angle (not in sin-space) across +-fov, dwelling one OFDM symbol per beam.
Each scanned user reports per-beam RSS and per-subcarrier CSI sampled from
the geometric channel of the current scene snapshot.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .geometry import C0
from .scene import SceneSnapshot, compute_paths


@dataclass(frozen=True)
class RadioConfig:
    carrier_freq: float = 28e9        # Hz
    n_antennas: int = 8               # BS uniform linear array, lambda/2 spacing
    codebook_size: int = 121
    fov_deg: float = 60.0             # half field of view
    symbol_duration: float = 12.5e-6  # s, dwell per beam
    n_subcarriers: int = 64
    subcarrier_spacing: float = 480e3  # Hz
    comm_bandwidth: float = 400e6     # Hz, used for capacity
    tx_power_dbm: float = 10.0
    noise_power_dbm: float = -85.0

    def __post_init__(self) -> None:
        if self.carrier_freq <= 0:
            raise ValueError("carrier_freq must be positive")
        if self.n_antennas < 1 or self.codebook_size < 2:
            raise ValueError("need n_antennas >= 1 and codebook_size >= 2")
        if not 0.0 < self.fov_deg < 90.0:
            raise ValueError("fov_deg must lie in (0, 90)")
        if self.n_subcarriers < 8:
            raise ValueError("n_subcarriers must be >= 8")
        if min(self.symbol_duration, self.subcarrier_spacing,
               self.comm_bandwidth) <= 0:
            raise ValueError("durations, spacings, and bandwidths must be positive")

    @property
    def wavelength(self) -> float:
        return C0 / self.carrier_freq


@functools.lru_cache(maxsize=8)
def codebook_angles(cfg: RadioConfig) -> np.ndarray:
    return np.linspace(-cfg.fov_deg, cfg.fov_deg, cfg.codebook_size)


def steering_vector(n_antennas: int, phi_deg: float) -> np.ndarray:
    """lambda/2 ULA response with the phase center at the array middle,
    a_n = exp(-j pi (n - (N-1)/2) sin(phi)), so inner products between
    responses at different angles come out real."""
    n = np.arange(n_antennas) - 0.5 * (n_antennas - 1)
    return np.exp(-1j * np.pi * n * math.sin(math.radians(phi_deg)))


def _array_factor_mag(n_antennas: int, delta_sin: np.ndarray) -> np.ndarray:
    """|sum_n exp(j pi n delta)| via the Dirichlet kernel, elementwise."""
    delta_sin = np.asarray(delta_sin, dtype=float)
    num = np.sin(0.5 * np.pi * n_antennas * delta_sin)
    den = np.sin(0.5 * np.pi * delta_sin)
    out = np.full(delta_sin.shape, float(n_antennas))
    ok = np.abs(den) > 1e-12
    out[ok] = np.abs(num[ok] / den[ok])
    return out


def beam_gain(cfg: RadioConfig, beam_index: int, phi_deg: float) -> float:
    """Amplitude gain of codebook beam `beam_index` toward angle phi.

    Normalized so a perfectly aligned beam gives sqrt(n_antennas).
    """
    if not (0 <= beam_index < cfg.codebook_size):
        raise IndexError(f"beam index {beam_index} out of range")
    b = codebook_angles(cfg)[beam_index]
    delta = math.sin(math.radians(b)) - math.sin(math.radians(phi_deg))
    return float(_array_factor_mag(cfg.n_antennas, np.array([delta]))[0]
                 / math.sqrt(cfg.n_antennas))


def gain_matrix(cfg: RadioConfig, phis_deg: np.ndarray) -> np.ndarray:
    """Beam gains for every codebook beam x every angle: (codebook, len(phis))."""
    beams = np.sin(np.radians(codebook_angles(cfg)))[:, None]
    targets = np.sin(np.radians(np.asarray(phis_deg, dtype=float)))[None, :]
    return _array_factor_mag(cfg.n_antennas, beams - targets) / math.sqrt(cfg.n_antennas)


def scan_duration(cfg: RadioConfig) -> float:
    """Time to sweep the whole codebook once."""
    return cfg.codebook_size * cfg.symbol_duration


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


@dataclass(frozen=True)
class Beam:
    angle: float                 # degrees off boresight
    amplitude: float             # relative weight, decision-normalized
    phase: float | None = None   # radians; None means phase-coherent ideal


@dataclass(frozen=True)
class BeamDecision:
    """Transmit choice for one user: a single steered beam or a small set of
    simultaneously weighted beams.  Amplitudes are normalized to unit total
    power.  `outage` marks a decision made with no usable path."""
    mode: str                    # "single" | "multi"
    beams: tuple[Beam, ...]
    path_used: str = "direct"    # "direct" | "reflected:<i>" | "outage"
    outage: bool = False

    def primary_angle(self) -> float:
        return max(self.beams, key=lambda b: b.amplitude).angle


def single_beam(angle: float, path_used: str = "direct",
                outage: bool = False) -> BeamDecision:
    return BeamDecision(mode="single", beams=(Beam(angle, 1.0, None),),
                        path_used=path_used, outage=outage)


def multi_beam(weighted: list[tuple[float, float]], path_used: str = "direct",
               phases: list[float] | None = None,
               outage: bool = False) -> BeamDecision:
    """Build a multi-beam decision from (angle, relative amplitude) pairs."""
    if not weighted:
        raise ValueError("multi-beam decision needs at least one beam")
    norm = math.sqrt(sum(a * a for _, a in weighted))
    if norm <= 0.0:
        raise ValueError("beam amplitudes must not all be zero")
    beams = []
    for i, (ang, amp) in enumerate(weighted):
        ph = phases[i] if phases is not None else None
        beams.append(Beam(ang, amp / norm, ph))
    return BeamDecision(mode="multi", beams=tuple(beams), path_used=path_used,
                        outage=outage)


@dataclass(frozen=True)
class UserChannelScan:
    rss: np.ndarray  # dBm per beam, (codebook_size,)
    csi: np.ndarray  # complex, (codebook_size, n_subcarriers)


@dataclass(frozen=True)
class BeamScanReport:
    timestamp: float
    users: dict[int, UserChannelScan]


def run_beam_scan(snapshot: SceneSnapshot, cfg: RadioConfig,
                  rng: np.random.Generator) -> BeamScanReport:
    """Synthesize one full codebook sweep for every user in the snapshot.

    csi[b, k] = sum_paths gain(b, phi_l) * gamma_l * exp(-j 2 pi (f_c + k df) tau_l)
    scaled to sqrt(mW) so |csi|^2 averages to the RSS in dBm.  Blocked paths
    enter with their blocker attenuation applied.  Noise is complex Gaussian
    at the configured noise power, drawn per user in user-id order so runs
    are reproducible for a fixed generator state.
    """
    amp_tx = math.sqrt(dbm_to_mw(cfg.tx_power_dbm))
    sigma = math.sqrt(dbm_to_mw(cfg.noise_power_dbm) / 2.0)
    k = np.arange(cfg.n_subcarriers)
    freqs = cfg.carrier_freq + k * cfg.subcarrier_spacing

    users: dict[int, UserChannelScan] = {}
    for uid in sorted(snapshot.users):
        paths = compute_paths(snapshot, uid, cfg.wavelength)
        angles = np.array([p.departure_angle for p in paths])
        gamma = np.array([p.gain * 10.0 ** (-p.blockage_db / 20.0) for p in paths])
        tof = np.array([p.tof for p in paths])

        gains = gain_matrix(cfg, angles)                       # (B, L)
        phase = np.exp(-2j * np.pi * freqs[None, :] * tof[:, None])  # (L, K)
        csi = amp_tx * (gains @ (gamma[:, None] * phase))
        noise = rng.standard_normal(csi.shape) + 1j * rng.standard_normal(csi.shape)
        csi = csi + sigma * noise
        rss = 10.0 * np.log10(np.mean(np.abs(csi) ** 2, axis=1))
        users[uid] = UserChannelScan(rss=rss, csi=csi)
    return BeamScanReport(timestamp=snapshot.t, users=users)
