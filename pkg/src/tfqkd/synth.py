"""Monte Carlo photon-click streams of the unlocked interferometer.

Clicks are Poisson arrivals whose detector is drawn from the instantaneous
interference phase ``Phi(t) = 2 pi nu t + phi0 + dphi_A(t) - dphi_B(t)``.
White frequency noise is sampled exactly as Brownian motion at the event
times; every other PSD component (fiber channels, tabulated laser spectra)
is synthesized as a sampled trajectory and interpolated linearly.

Random draws come from counter-based Philox generators. Each consumer
(arrivals, detector choice, dark counts, noise trajectories, encoding) gets
its own substream derived from the run seed, so changing one part of a run
does not reshuffle the others.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.fft import irfft, next_fast_len

from .channel import ChannelModel
from .keyrate import DecoyParams
from .noise_model import FrameSchedule, LinkNoise, PsdModel
from .sifting import SlotTable

D0, D1 = 0, 1

_STREAMS = {"arrivals": 0, "detector": 1, "dark": 2, "laser": 3, "fiber_a": 4, "fiber_b": 5,
            "encoding": 6, "clicks": 7, "jitter": 8, "trajectory": 9}


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent Philox generator for the named consumer of a run seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_STREAMS[name],))
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------
# domain types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BeatCarrier:
    """Beat note between the two free-running lasers."""

    nu: float
    phi0: float = 0.0
    drift: float = 0.0
    band: tuple[float, float] = (50e6, 200e6)

    def __post_init__(self):
        lo, hi = self.band
        if not (lo <= self.nu <= hi):
            raise ValueError(f"beat frequency {self.nu} Hz outside plausible band {self.band}")
        if not (0.0 <= self.phi0 < 2 * math.pi):
            raise ValueError("phi0 must lie in [0, 2 pi)")

    def phase(self, times_ps) -> np.ndarray:
        """Deterministic part of the interference phase, reduced mod 2 pi."""
        t = np.asarray(times_ps, dtype=np.float64) * 1e-12
        cycles = np.mod(self.nu * t + 0.5 * self.drift * t * t, 1.0)
        return np.mod(2 * math.pi * cycles + self.phi0, 2 * math.pi)


@dataclass(frozen=True)
class PhaseTrajectory:
    sample_period: float
    samples: np.ndarray
    seed: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("trajectory samples must be finite")

    @property
    def duration(self) -> float:
        return (len(self.samples) - 1) * self.sample_period

    def at(self, t_seconds) -> np.ndarray:
        """Linear interpolation between samples."""
        grid = np.arange(len(self.samples)) * self.sample_period
        return np.interp(t_seconds, grid, self.samples)


@dataclass(frozen=True)
class DetectionEvent:
    time: int
    detector: int


@dataclass(frozen=True)
class RateProfile:
    """Per-detector count rates (counts/s) in R-frames, Q-frames and dark."""

    r_rate: float
    q_rate: float = 0.0
    dark_rate: float = 0.0

    def __post_init__(self):
        if min(self.r_rate, self.q_rate, self.dark_rate) < 0:
            raise ValueError("rates must be >= 0")


@dataclass
class EventStream:
    """Time-sorted detection events (integer picoseconds, detector 0/1)."""

    times_ps: np.ndarray
    detectors: np.ndarray
    schedule: FrameSchedule | None = None
    n_frames: int = 0
    seed: int | None = None

    def __post_init__(self):
        self.times_ps = np.asarray(self.times_ps, dtype=np.int64)
        self.detectors = np.asarray(self.detectors, dtype=np.uint8)
        if self.times_ps.shape != self.detectors.shape:
            raise ValueError("times and detectors must have the same length")
        if np.any(np.diff(self.times_ps) < 0):
            raise ValueError("event times must be nondecreasing")
        if np.any(self.detectors > 1):
            raise ValueError("detector must be 0 or 1")

    def __len__(self) -> int:
        return len(self.times_ps)

    def __iter__(self) -> Iterator[DetectionEvent]:
        for t, d in zip(self.times_ps.tolist(), self.detectors.tolist()):
            yield DetectionEvent(t, d)

    def window(self, start_ps: int, end_ps: int) -> tuple[np.ndarray, np.ndarray]:
        """Events with ``start_ps <= t < end_ps``."""
        i, j = np.searchsorted(self.times_ps, [start_ps, end_ps], side="left")
        return self.times_ps[i:j], self.detectors[i:j]


def beat_probability(phi):
    """Click probabilities ``(p0, p1)`` of the two detectors at phase ``phi``."""
    c = np.cos(phi)
    p0 = (1 + c) / 2
    return p0, 1 - p0


# --------------------------------------------------------------------------
# phase-noise synthesis
# --------------------------------------------------------------------------


def _phase_psd(psd: PsdModel, f: np.ndarray) -> np.ndarray:
    return psd.frequency_noise(f) / f**2


def synthesize_trajectory(psd: PsdModel, duration: float, sample_period: float, seed: int,
                          max_samples: int = 1 << 26) -> PhaseTrajectory:
    """Gaussian phase trajectory whose spectrum follows ``psd``.

    White Gaussian noise is shaped in the frequency domain (Hermitian
    spectrum, inverse real FFT over twice the duration to avoid wrap-around)
    and band-limited to ``[1/duration, 1/(2 sample_period))``.
    """
    if duration <= 0 or sample_period <= 0:
        raise ValueError("duration and sample_period must be positive")
    n = int(math.ceil(duration / sample_period)) + 1
    if n > max_samples:
        raise ValueError(f"trajectory needs {n} samples (> {max_samples})")
    if psd.is_zero:
        return PhaseTrajectory(sample_period, np.zeros(n), seed)
    m = next_fast_len(2 * n, real=True)
    df = 1.0 / (m * sample_period)
    f = np.arange(m // 2 + 1) * df
    s = np.zeros_like(f)
    band = (f >= 1.0 / duration) & (f < 0.5 / sample_period)
    s[band] = _phase_psd(psd, f[band])
    rng = substream(seed, "trajectory")
    spec = (rng.standard_normal(f.size) + 1j * rng.standard_normal(f.size)) * np.sqrt(s * df / 4.0) * m
    x = irfft(spec, m)[:n]
    return PhaseTrajectory(sample_period, x, seed)


def _split_brownian(psd: PsdModel) -> tuple[float, list[PsdModel]]:
    """White-frequency leaves over an unbounded band, and everything else."""
    h, rest = 0.0, []
    for leaf in psd.leaves():
        if leaf.kind == "white_frequency" and leaf.band[0] == 0 and math.isinf(leaf.band[1]):
            h += leaf.h_w
        elif not leaf.is_zero:
            rest.append(leaf)
    return h, rest


class PhaseNoiseSampler:
    """Samples ``dphi_A(t) - dphi_B(t)`` at sorted event times."""

    def __init__(self, noise: LinkNoise, duration: float, seed: int, sample_period: float = 10e-9):
        h_a, rest_a = _split_brownian(noise.laser_a)
        h_b, rest_b = _split_brownian(noise.laser_b)
        self.h_w = h_a + h_b
        self.seed = seed
        self.trajectories: list[tuple[float, PhaseTrajectory]] = []
        parts = [(+1.0, p, "laser") for p in rest_a] + [(-1.0, p, "laser") for p in rest_b]
        for sign, fib, name in ((+1.0, noise.fiber_a, "fiber_a"), (-1.0, noise.fiber_b, "fiber_b")):
            if fib.is_zero:
                continue
            if fib.psd is None:
                raise ValueError("Monte Carlo fiber noise needs a phase PSD, not a sigma_L table")
            parts.append((sign, fib.psd, name))
        for i, (sign, psd, name) in enumerate(parts):
            sub = int(substream(seed, name).integers(2**63)) + i
            self.trajectories.append((sign, synthesize_trajectory(psd, duration, sample_period, sub)))

    def sample(self, times_ps: np.ndarray) -> np.ndarray:
        t = np.asarray(times_ps, dtype=np.float64) * 1e-12
        out = np.zeros_like(t)
        if self.h_w > 0 and t.size:
            dt = np.diff(t, prepend=0.0)
            rng = substream(self.seed, "laser")
            out += np.cumsum(np.sqrt(2 * math.pi**2 * self.h_w * dt) * rng.standard_normal(t.size))
        for sign, traj in self.trajectories:
            out += sign * traj.at(t)
        return out


# --------------------------------------------------------------------------
# characterization runs
# --------------------------------------------------------------------------


def _frame_count(schedule: FrameSchedule, duration: float | None, n_frames: int | None) -> int:
    if n_frames is None:
        if duration is None:
            raise ValueError("give duration or n_frames")
        n_frames = int((duration - schedule.t_r) // schedule.period)
    if n_frames < 1:
        raise ValueError("run must contain at least one Q-frame")
    return n_frames


def _poisson_times(rng: np.random.Generator, starts: np.ndarray, length_ps: int, rate: float) -> np.ndarray:
    if rate <= 0 or starts.size == 0:
        return np.empty(0, dtype=np.int64)
    counts = rng.poisson(rate * length_ps * 1e-12, size=starts.size)
    offsets = rng.integers(0, length_ps, size=int(counts.sum()))
    return np.repeat(starts, counts) + offsets


def _reference_clicks(carrier: BeatCarrier, noise: LinkNoise, schedule: FrameSchedule, rates: RateProfile,
                      n: int, seed: int, max_events: int, sample_period: float,
                      probe_ps: np.ndarray | None = None):
    """Light and dark clicks of ``n`` periods; also the noise phase at ``probe_ps``."""
    per = schedule.period_ps
    r_len = schedule.r_frame_ps(0)[1]
    q0, q1 = schedule.q_frame_ps(0)
    q_len = q1 - q0
    total = 2 * ((n + 1) * r_len * rates.r_rate + n * q_len * rates.q_rate) * 1e-12
    total += 2 * ((n + 1) * r_len + n * q_len) * rates.dark_rate * 1e-12
    if total > max_events:
        raise ValueError(f"expected {total:.3g} events exceeds the cap of {max_events}")

    r_starts = np.arange(n + 1, dtype=np.int64) * per
    q_starts = np.arange(n, dtype=np.int64) * per + q0
    rng = substream(seed, "arrivals")
    light = np.sort(np.concatenate([
        _poisson_times(rng, r_starts, r_len, 2 * rates.r_rate),
        _poisson_times(rng, q_starts, q_len, 2 * rates.q_rate),
    ]))
    probe = np.empty(0, np.int64) if probe_ps is None else np.asarray(probe_ps, np.int64)
    joint = np.concatenate([light, probe])
    order = np.argsort(joint, kind="stable")
    sampler = PhaseNoiseSampler(noise, (n * per + r_len) * 1e-12, seed, sample_period)
    dphi = np.empty(joint.size)
    dphi[order] = sampler.sample(joint[order])

    phi = carrier.phase(light) + dphi[: light.size]
    p0, _ = beat_probability(phi)
    det = (substream(seed, "detector").random(light.size) >= p0).astype(np.uint8)

    rng_d = substream(seed, "dark")
    dark = np.concatenate([
        _poisson_times(rng_d, r_starts, r_len, 2 * rates.dark_rate),
        _poisson_times(rng_d, q_starts, q_len, 2 * rates.dark_rate),
    ])
    dark_det = rng_d.integers(0, 2, size=dark.size).astype(np.uint8)
    return np.concatenate([light, dark]), np.concatenate([det, dark_det]), dphi[light.size:]


def _finalize(times, dets, schedule, n, seed, jitter_ps) -> EventStream:
    if jitter_ps > 0:
        times = times + np.rint(substream(seed, "jitter").normal(0.0, jitter_ps, times.size)).astype(np.int64)
    order = np.argsort(times, kind="stable")
    return EventStream(times[order], dets[order], schedule, n, seed)


def simulate_run(carrier: BeatCarrier, noise: LinkNoise, schedule: FrameSchedule, rates: RateProfile,
                 duration: float | None = None, seed: int = 0, *, n_frames: int | None = None,
                 jitter_ps: float = 0.0, max_events: int = 50_000_000,
                 trajectory_sample_period: float = 10e-9) -> EventStream:
    """Click stream of a characterization run (light in both frame types).

    The run holds ``n_frames`` periods plus a closing R-frame, so every
    Q-frame is bracketed by two R-frames. Buffers emit nothing; dark counts
    are spread uniformly over both detectors during R- and Q-frames.
    """
    n = _frame_count(schedule, duration, n_frames)
    times, dets, _ = _reference_clicks(carrier, noise, schedule, rates, n, seed, max_events,
                                       trajectory_sample_period)
    return _finalize(times, dets, schedule, n, seed, jitter_ps)


# --------------------------------------------------------------------------
# encoded SNS runs
# --------------------------------------------------------------------------


def q_frame_pulse_tags(schedule: FrameSchedule, pulse_period: float, frame: int = 0) -> np.ndarray:
    """Slot centres (ps) of the pulses inside Q-frame ``frame``.

    Slots sit at the middle of ``t_q / pulse_period`` equal cells.
    """
    if pulse_period <= 0:
        raise ValueError("pulse_period must be positive")
    ratio = schedule.t_q / pulse_period
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-6 * max(ratio, 1.0):
        raise ValueError(f"pulse period {pulse_period} s does not divide t_q = {schedule.t_q} s")
    q0, q1 = schedule.q_frame_ps(frame)
    return q0 + ((2 * np.arange(n, dtype=np.int64) + 1) * (q1 - q0)) // (2 * n)


@dataclass
class EncodedRun:
    stream: EventStream
    slots: SlotTable
    params: DecoyParams
    channel: ChannelModel
    pulse_period: float
    extra: dict = field(default_factory=dict)


def _draw_windows(rng: np.random.Generator, params: DecoyParams, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Window (0 = Z, 1 = X) and source (0 = o, 1 = x, 2 = y) per slot for one party."""
    u = rng.random(n)
    p = params
    window = (u >= p.p_z).astype(np.uint8)
    source = np.zeros(n, dtype=np.uint8)
    source[u < p.p_z * p.epsilon] = 2
    source[(u >= p.p_z) & (u < p.p_z + p.p_x)] = 1
    return window, source


def simulate_encoded_run(carrier: BeatCarrier, noise: LinkNoise, schedule: FrameSchedule,
                         rates: RateProfile, params: DecoyParams, channel: ChannelModel,
                         n_frames: int, seed: int = 0, *, pulse_period: float = 1.6e-9,
                         phase_levels: int = 16, jitter_ps: float = 0.0, max_events: int = 50_000_000,
                         trajectory_sample_period: float = 10e-9) -> EncodedRun:
    """SNS run: bright R-frames plus encoded weak pulses in every Q-frame.

    Each party draws window, source and a random ``phase_levels``-level phase
    per slot. Detector ``i`` clicks with probability ``1 - exp(-m_i)`` where
    ``m_0,1 = (m_a + m_b +/- 2 sqrt(m_a m_b) cos(Phi + theta_a - theta_b)) / 2``
    and ``m = eta * mu``. Background counts at ``rates.dark_rate`` arrive
    continuously during Q-frames and are rejected later by gating.
    """
    tags0 = q_frame_pulse_tags(schedule, pulse_period)
    per = schedule.period_ps
    slot_t = (np.arange(n_frames, dtype=np.int64)[:, None] * per + tags0[None, :]).ravel()
    n_slots = slot_t.size

    rng = substream(seed, "encoding")
    a_win, a_src = _draw_windows(rng, params, n_slots)
    b_win, b_src = _draw_windows(rng, params, n_slots)
    a_ph = rng.integers(0, phase_levels, n_slots).astype(np.uint8)
    b_ph = rng.integers(0, phase_levels, n_slots).astype(np.uint8)
    slots = SlotTable(slot_t, a_win, a_src, a_ph, b_win, b_src, b_ph, phase_levels=phase_levels)

    # R-frames carry reference light only; Q-frame background is added below
    ref_t, ref_d, dphi = _reference_clicks(carrier, noise, schedule, RateProfile(rates.r_rate), n_frames,
                                           seed, max_events, trajectory_sample_period, probe_ps=slot_t)
    mu = np.array([params.mu_o, params.mu_x, params.mu_y])
    ma = channel.eta * mu[a_src]
    mb = channel.eta * mu[b_src]
    phi = (carrier.phase(slot_t) + dphi
           + 2 * math.pi * (a_ph.astype(float) - b_ph.astype(float)) / phase_levels)
    cross = 2 * np.sqrt(ma * mb) * np.cos(phi)
    m0 = np.maximum((ma + mb + cross) / 2, 0.0)
    m1 = np.maximum((ma + mb - cross) / 2, 0.0)
    rc = substream(seed, "clicks")
    c0 = rc.random(n_slots) < -np.expm1(-m0)
    c1 = rc.random(n_slots) < -np.expm1(-m1)
    click_t = np.concatenate([slot_t[c0], slot_t[c1]])
    click_d = np.concatenate([np.zeros(c0.sum(), np.uint8), np.ones(c1.sum(), np.uint8)])

    rng_d = substream(seed, "dark")
    q0, q1 = schedule.q_frame_ps(0)
    q_starts = np.arange(n_frames, dtype=np.int64) * per + q0
    dark = _poisson_times(rng_d, q_starts, q1 - q0, 2 * rates.dark_rate)
    dark_d = rng_d.integers(0, 2, size=dark.size).astype(np.uint8)

    stream = _finalize(np.concatenate([ref_t, click_t, dark]), np.concatenate([ref_d, click_d, dark_d]),
                       schedule, n_frames, seed, jitter_ps)
    return EncodedRun(stream, slots, params, channel, pulse_period,
                      extra={"signal_clicks": int(c0.sum() + c1.sum()), "background_clicks": int(dark.size)})
