"""Link-level evaluation and the beam-management strategy controller.

SNR is always evaluated against the ground-truth geometric channel by
forming the actual array response: h = sum_paths a(phi_l) * gamma_l with
blockage attenuation folded into gamma.  A decision's beamforming vector is
built from its beams and scored as |w^H h|^2 / ||w||^2 * Ps / Pn, so a
single aligned beam on an isolated path gets the full array gain N and a
multi-beam decision whose weights match the channel reaches the
maximum-ratio optimum ||h||^2 * Ps / Pn exactly.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import blockage as _blockage
from . import context as _context
from . import tracking as _tracking
from .blockage import BlockageEvent, PathOption, event_window, mitigate, predict_blockage
from .geometry import C0, ORIGIN, Point2, bearing_deg
from .radar import RadarConfig, RangeAngleMap
from .radio import (
    BeamDecision,
    BeamScanReport,
    RadioConfig,
    codebook_angles,
    dbm_to_watt,
    multi_beam,
    scan_duration,
    single_beam,
    steering_vector,
)

FEEDBACK_TIME = 0.85e-3        # s, context feedback cost per recalibration
ASSUMED_BLOCKAGE_DB = 30.0     # what the controller assumes a body costs
MIN_OBJECT_HITS = 3            # radar hits before an object can raise events
CONTEXT_GATE = 2.5             # m, max radio-context jump from a mature track
MATURE_HITS = 5                # hits before a track can veto its context

STRATEGIES = ("oracle", "commrad_single", "commrad_multi",
              "non_collaborative", "reactive")


@dataclass(frozen=True)
class ChannelPath:
    angle: float      # degrees off boresight
    gain: complex     # effective linear amplitude (blockage applied)
    blocked: bool
    kind: str = "direct"


@dataclass(frozen=True)
class ChannelState:
    paths: tuple[ChannelPath, ...]
    signal_power_w: float
    noise_power_w: float


@dataclass(frozen=True)
class ThroughputSample:
    t: float
    strategy: str
    user_id: int
    snr_db: float
    throughput_mbps: float
    in_overhead: bool
    path_used: str


def channel_vector(channel: ChannelState, n_antennas: int) -> np.ndarray:
    h = np.zeros(n_antennas, dtype=complex)
    for p in channel.paths:
        h += steering_vector(n_antennas, p.angle) * p.gain
    return h


def optimal_snr(channel: ChannelState, n_antennas: int) -> float:
    """Maximum-ratio beamforming bound, ||h||^2 * Ps / Pn."""
    if not channel.paths:
        return 0.0
    h = channel_vector(channel, n_antennas)
    g = float(np.real(np.vdot(h, h)))
    return g * channel.signal_power_w / channel.noise_power_w


def snr(channel: ChannelState, decision: BeamDecision, n_antennas: int) -> float:
    """SNR of one decision against the true channel (linear)."""
    if not channel.paths:
        return 0.0
    h = channel_vector(channel, n_antennas)
    w = np.zeros(n_antennas, dtype=complex)
    for b in decision.beams:
        if b.phase is None:
            # phase-coherent combining: use the phase of the path this beam
            # is pointed at (phase estimation error is out of scope)
            nearest = min(channel.paths, key=lambda p: abs(p.angle - b.angle))
            ph = 0.0 if nearest.gain == 0 else math.atan2(nearest.gain.imag,
                                                          nearest.gain.real)
        else:
            ph = b.phase
        w += steering_vector(n_antennas, b.angle) * (
            b.amplitude * complex(math.cos(ph), math.sin(ph)))
    nw = np.linalg.norm(w)
    if nw < 1e-15:
        return 0.0
    coupling = abs(np.vdot(w, h)) ** 2 / (nw * nw)
    return float(coupling * channel.signal_power_w / channel.noise_power_w)


def capacity_mbps(snr_linear: float, bandwidth_hz: float) -> float:
    if snr_linear < 0.0:
        raise ValueError("SNR must be non-negative")
    if bandwidth_hz <= 0.0:
        raise ValueError("bandwidth must be positive")
    return bandwidth_hz * math.log2(1.0 + snr_linear) / 1e6


def overhead_fraction(recal_period: float, scan_time: float,
                      feedback_time: float) -> float:
    """Share of air time spent on scanning plus context feedback."""
    if recal_period <= 0.0 or scan_time < 0.0 or feedback_time < 0.0:
        raise ValueError("durations must be positive")
    busy = scan_time + feedback_time
    if busy >= recal_period:
        raise ValueError(
            f"recalibration period {recal_period} s cannot fit the "
            f"{busy} s scan+feedback budget")
    return busy / recal_period


def channel_from_paths(paths, radio_cfg: RadioConfig) -> ChannelState:
    """Ground-truth channel for one user from propagation paths."""
    chan = []
    for p in paths:
        att = 10.0 ** (-p.blockage_db / 20.0)
        phase = -2.0 * math.pi * radio_cfg.carrier_freq * p.tof
        gain = p.gain * att * complex(math.cos(phase), math.sin(phase))
        chan.append(ChannelPath(angle=p.departure_angle, gain=gain,
                                blocked=p.blocked, kind=p.kind))
    return ChannelState(paths=tuple(chan),
                        signal_power_w=dbm_to_watt(radio_cfg.tx_power_dbm),
                        noise_power_w=dbm_to_watt(radio_cfg.noise_power_dbm))


class StrategyController:
    """Stateful beam manager implementing one strategy.

    The harness feeds it radar frames and beam-scan reports on their own
    schedules; ``decide`` is called every link timestep and must only use
    information the strategy is allowed to have.  Ground-truth channels are
    passed in solely for the oracle reference.
    """

    def __init__(self, strategy: str, radio_cfg: RadioConfig,
                 radar_cfg: RadarConfig, recal_period: float | None,
                 lead_time: float = _blockage.DEFAULT_LEAD_TIME,
                 feedback_time: float = FEEDBACK_TIME,
                 assumed_blockage_db: float = ASSUMED_BLOCKAGE_DB):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}, "
                             f"expected one of {STRATEGIES}")
        self.strategy = strategy
        self.radio_cfg = radio_cfg
        self.radar_cfg = radar_cfg
        self.recal_period = recal_period
        self.lead_time = lead_time
        self.feedback_time = feedback_time
        self.assumed_blockage_db = assumed_blockage_db

        self.uses_radar = strategy in ("commrad_single", "commrad_multi",
                                       "non_collaborative")
        self.uses_periodic_scan = strategy in ("commrad_single",
                                               "commrad_multi", "reactive")
        if self.uses_periodic_scan and recal_period is not None:
            self.charged_overhead = overhead_fraction(
                recal_period, scan_duration(radio_cfg), feedback_time)
        else:
            self.charged_overhead = 0.0

        self.clutter = _tracking.ClutterProfile()
        self.tracks: list[_tracking.Track] = []
        self.object_tracks: list[_tracking.Track] = []
        self.reflectors: list[_context.ReflectorEstimate] = []
        self.refl_coeffs: list[float] = []
        self._refl_obs: list[tuple[Point2, float, float]] = []
        self._next_obj_id = -1
        self.events: dict[int, BlockageEvent] = {}
        self.last_best_beam: dict[int, float] = {}
        self.last_context: dict[int, _context.UserContext] = {}
        self._last_map: RangeAngleMap | None = None

    # ---- sensing inputs -------------------------------------------------

    def on_radar_frame(self, t: float, ra_map: RangeAngleMap) -> None:
        if not self.uses_radar:
            return
        cleaned = _tracking.remove_clutter(ra_map, self.clutter)
        self._last_map = cleaned
        self.tracks = _tracking.track_step(self.tracks, cleaned, t,
                                           self.radar_cfg)
        exclude = [(tr.bbox_center, tr.bbox_half_extent) for tr in self.tracks]
        self.object_tracks, self._next_obj_id = _tracking.update_object_tracks(
            self.object_tracks, cleaned, t, exclude, self.radar_cfg,
            self._next_obj_id)
        self._refresh_events(t)

    def on_beam_scan(self, t: float, report: BeamScanReport) -> None:
        contexts = []
        for uid in sorted(report.users):
            scan = report.users[uid]
            best = int(np.argmax(scan.rss))
            self.last_best_beam[uid] = float(
                codebook_angles(self.radio_cfg)[best])
            if not self.uses_radar:
                continue
            ctx = _context.acquire_user_context(
                report, uid, self._last_map, self.radio_cfg, self.radar_cfg)
            # a context that teleports away from an established radar track
            # is a mis-identification (typically a blocked LoS leaving only
            # the bounce); trust the radar until the radio returns
            if not self._context_consistent(ctx, t):
                continue
            ctx = self._refine_and_learn(report, ctx)
            contexts.append(ctx)
            self.last_context[uid] = ctx
        if self.uses_radar and contexts:
            self.tracks = _tracking.recalibrate(self.tracks, contexts, t)
            self._refresh_events(t)

    def _context_consistent(self, ctx: _context.UserContext,
                            now: float) -> bool:
        tr = next((t for t in self.tracks if t.user_id == ctx.user_id), None)
        if tr is None or tr.n_hits < MATURE_HITS:
            return True
        pred = _tracking.predict_position(tr, now)
        rad = math.radians(ctx.angle)
        cpos = Point2(math.sin(rad), math.cos(rad)) * ctx.distance
        return (pred - cpos).norm() <= CONTEXT_GATE

    def _refine_and_learn(self, report: BeamScanReport,
                          ctx: _context.UserContext) -> _context.UserContext:
        try:
            paths = _context.estimate_paths(report, ctx.user_id,
                                            self.radio_cfg)
        except _context.EstimationError:
            return ctx
        if not paths or not paths[0].is_direct:
            return ctx
        direct = paths[0]
        # multipath ripple can pull the scan's argmax beam several degrees
        # off; the decomposed direct path pins the angle far tighter
        ctx = dataclasses.replace(ctx, angle=direct.angle)
        grew = False
        for p in paths[1:]:
            try:
                pt, phi = _context.estimate_reflector_point(ORIGIN, ctx, p)
            except _context.GeometryError:
                continue
            total_len = ctx.distance + C0 * p.rel_tof
            ratio = p.amplitude / max(direct.amplitude, 1e-12)
            coeff = ratio * total_len / max(ctx.distance, 1e-9)
            self._refl_obs.append((pt, phi, min(max(coeff, 0.05), 1.0)))
            grew = True
        if grew:
            self._rebuild_reflectors()
        return ctx

    def _rebuild_reflectors(self) -> None:
        obs = [(pt, phi) for pt, phi, _ in self._refl_obs]
        self.reflectors = _context.accumulate_reflector(obs)
        self.refl_coeffs = []
        for est in self.reflectors:
            matched = [c for pt, phi, c in self._refl_obs
                       if _context.observation_matches(est, pt, phi)]
            self.refl_coeffs.append(
                float(np.median(matched)) if matched else 0.7)

    def _refresh_events(self, now: float) -> None:
        self.events = {}
        user_positions = [tr.position for tr in self.tracks]
        for tr in self.tracks:
            if tr.position.norm() < 1e-6:
                continue
            region = _blockage.blockage_region(ORIGIN, tr.position)
            best: BlockageEvent | None = None
            for obj in self.object_tracks:
                # noise blips die before maturity, and an "object" sitting
                # on top of a user is almost surely that user's own echo
                if obj.n_hits < MIN_OBJECT_HITS:
                    continue
                if any((obj.position - up).norm() < 1.0
                       for up in user_positions):
                    continue
                ev = predict_blockage(
                    obj, region, _blockage.ASSUMED_BLOCKER_LENGTH, now,
                    user_id=tr.user_id, path="direct")
                if ev is not None and (best is None
                                       or ev.t_arrival < best.t_arrival):
                    best = ev
            if best is not None:
                self.events[tr.user_id] = best

    # ---- decisions ------------------------------------------------------

    def _snap(self, angle: float) -> float:
        angles = codebook_angles(self.radio_cfg)
        return float(angles[int(np.argmin(np.abs(angles - angle)))])

    def _path_options(self, pos: Point2, uid: int,
                      now: float) -> list[PathOption]:
        ev = self.events.get(uid)
        in_window = False
        if ev is not None:
            w0, w1 = event_window(ev, self.lead_time)
            in_window = w0 <= now <= w1
        lam = self.radio_cfg.wavelength
        d = pos.norm()
        opts = [PathOption(kind="direct", angle=bearing_deg(pos),
                           gain=lam / (4.0 * math.pi * max(d, 1e-9)),
                           blocked=in_window and ev.path == "direct")]
        for idx, est in enumerate(self.reflectors):
            ang = _tracking.reflected_path_angle(pos, est)
            if ang is None:
                continue
            plen = (pos - _tracking.virtual_bs(est)).norm()
            opts.append(PathOption(
                kind=f"reflected:{idx}", angle=ang,
                gain=self.refl_coeffs[idx] * lam / (4.0 * math.pi
                                                    * max(plen, 1e-9)),
                blocked=in_window and ev.path == f"reflected:{idx}"))
        return opts

    def _believed_position(self, uid: int, now: float) -> Point2 | None:
        for tr in self.tracks:
            if tr.user_id == uid:
                return _tracking.predict_position(tr, now)
        ctx = self.last_context.get(uid)
        if ctx is not None:
            rad = math.radians(ctx.angle)
            return Point2(math.sin(rad), math.cos(rad)) * ctx.distance
        return None

    def _fallback_decision(self, uid: int) -> BeamDecision:
        return single_beam(self.last_best_beam.get(uid, 0.0))

    def decide(self, t: float, uid: int,
               channel: ChannelState) -> BeamDecision:
        if self.strategy == "oracle":
            if not channel.paths:
                return single_beam(0.0, outage=True, path_used="outage")
            strongest = max(channel.paths, key=lambda p: abs(p.gain))
            return single_beam(strongest.angle, path_used=strongest.kind)
        if self.strategy == "reactive":
            return self._fallback_decision(uid)

        pos = self._believed_position(uid, t)
        if pos is None or pos.norm() < 1e-6:
            return self._fallback_decision(uid)
        opts = self._path_options(pos, uid, t)
        ev = self.events.get(uid)

        if self.strategy in ("commrad_single", "non_collaborative"):
            dec = mitigate(ev, opts, t, lead=self.lead_time)
            return single_beam(self._snap(dec.beams[0].angle),
                               path_used=dec.path_used, outage=dec.outage)

        # commrad_multi: split power across direct and strongest reflection,
        # weighting each leg by its believed gain after assumed blockage loss
        att = 10.0 ** (-self.assumed_blockage_db / 20.0)
        weighted = [(o, o.gain * att if o.blocked else o.gain) for o in opts]
        direct = next((og for og in weighted if og[0].kind == "direct"),
                      weighted[0])
        refl = max((og for og in weighted if og[0].kind != "direct"),
                   key=lambda og: og[1], default=None)
        pairs = [(self._snap(direct[0].angle), direct[1])]
        if refl is not None:
            pairs.append((self._snap(refl[0].angle), refl[1]))
        all_blocked = all(o.blocked for o, _ in weighted)
        used = max(weighted, key=lambda og: og[1])[0].kind
        return multi_beam(pairs,
                          path_used="outage" if all_blocked else used,
                          outage=all_blocked)

    def sample(self, t: float, uid: int, channel: ChannelState,
               decision: BeamDecision) -> ThroughputSample:
        if self.strategy == "oracle":
            s = optimal_snr(channel, self.radio_cfg.n_antennas)
        else:
            s = snr(channel, decision, self.radio_cfg.n_antennas)
        cap = capacity_mbps(s, self.radio_cfg.comm_bandwidth)
        return ThroughputSample(
            t=t, strategy=self.strategy, user_id=uid,
            snr_db=10.0 * math.log10(max(s, 1e-30)),
            throughput_mbps=cap * (1.0 - self.charged_overhead),
            in_overhead=self._in_overhead(t),
            path_used=decision.path_used)

    def _in_overhead(self, t: float) -> bool:
        busy = scan_duration(self.radio_cfg) + self.feedback_time
        if self.strategy == "non_collaborative":
            return t < busy
        if not self.uses_periodic_scan or self.recal_period is None:
            return False
        return (t % self.recal_period) < busy


def controller_step(controller: StrategyController, t: float,
                    channels: dict[int, ChannelState]
                    ) -> list[tuple[int, BeamDecision, ThroughputSample]]:
    """Decide and score every user at one timestep."""
    out = []
    for uid in sorted(channels):
        dec = controller.decide(t, uid, channels[uid])
        out.append((uid, dec, controller.sample(t, uid, channels[uid], dec)))
    return out
