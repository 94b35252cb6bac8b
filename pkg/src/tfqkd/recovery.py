"""FFT carrier recovery from sparse R-frame clicks.

Clicks are mapped to +1 (D0) / -1 (D1), summed into fixed-width time bins
and zero padded; the strongest spectral line inside the search window gives
the beat frequency, its argument the phase. Duplexing places the two
R-frames around a Q-frame at their true times (the Q-frame in between stays
zero) and estimates them jointly.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.signal import CZT

from .noise_model import FrameSchedule


@dataclass(frozen=True)
class RecoveryConfig:
    """Estimator settings.

    With ``pad`` the series is zero padded to the next power of two at or
    above ``1 / (bin_width * target_resolution)`` samples. ``fixed_frequency``
    skips the search and evaluates the spectrum at that frequency only.
    """

    bin_width: float = 100e-12
    search_window: tuple[float, float] = (50e6, 200e6)
    target_resolution: float = 0.01e6
    duplex: bool = True
    pad: bool = True
    refine: bool = False
    fixed_frequency: float | None = None

    def __post_init__(self):
        lo, hi = self.search_window
        if not (0 <= lo < hi):
            raise ValueError("search window needs f_lo < f_hi")
        if self.target_resolution <= 0 or self.bin_width <= 0:
            raise ValueError("bin width and target resolution must be positive")
        if hi > 0.5 / self.bin_width:
            raise ValueError("search window extends beyond the Nyquist frequency of the bins")
        if round(self.bin_width * 1e12) < 1:
            raise ValueError("bin width must be at least 1 ps")

    @property
    def bin_ps(self) -> int:
        return int(round(self.bin_width * 1e12))

    def fft_length(self, n: int) -> int:
        if not self.pad:
            return n
        need = max(n, math.ceil(1.0 / (self.bin_width * self.target_resolution)))
        return 1 << (need - 1).bit_length()


@dataclass(frozen=True)
class BinSeries:
    bin_width: float
    origin_ps: int
    values: np.ndarray

    @property
    def t_ref_ps(self) -> float:
        """Centre of the first bin: the time the estimated phase refers to."""
        return self.origin_ps + self.bin_width * 1e12 / 2

    @property
    def n_events(self) -> int:
        return int(np.abs(self.values).sum())


@dataclass(frozen=True)
class CarrierEstimate:
    nu_hat: float
    phi0_hat: float
    frame_index: int
    peak_amplitude: float
    n_events: int
    t_ref_ps: float


def map_and_bin(times_ps: np.ndarray, detectors: np.ndarray, start_ps: int, end_ps: int,
                cfg: RecoveryConfig, n_bins: int | None = None) -> BinSeries:
    """Sum +1 (D0) / -1 (D1) per bin over ``[start_ps, end_ps)``."""
    times_ps = np.asarray(times_ps, dtype=np.int64)
    bw = cfg.bin_ps
    if n_bins is None:
        n_bins = -(-(end_ps - start_ps) // bw)
    if times_ps.size and (times_ps.min() < start_ps or times_ps.max() >= end_ps):
        raise ValueError("events outside the frame interval")
    x = np.where(np.asarray(detectors) == 0, 1, -1)
    idx = (times_ps - start_ps) // bw
    values = np.bincount(idx, weights=x, minlength=n_bins).astype(np.int64)
    return BinSeries(cfg.bin_width, start_ps, values)


@lru_cache(maxsize=16)
def _czt(n: int, m: int, k0: int, length: int) -> CZT:
    w = np.exp(-2j * np.pi / length)
    a = np.exp(2j * np.pi * k0 / length)
    return CZT(n, m, w, a)


def _dft_at(values: np.ndarray, freq: float, bin_width: float) -> complex:
    j = np.flatnonzero(values)
    return complex(np.sum(values[j] * np.exp(-2j * np.pi * freq * bin_width * j)))


def estimate_carrier(series: BinSeries, cfg: RecoveryConfig, frame_index: int = -1) -> CarrierEstimate:
    """Strongest spectral line of ``series`` inside the search window.

    The phase refers to ``series.t_ref_ps``: the model is
    ``cos(2 pi nu_hat (t - t_ref) + phi0_hat)``. Exact magnitude ties go to
    the lowest frequency.
    """
    x = np.asarray(series.values)
    n_events = series.n_events
    if not np.any(x):
        raise ValueError("all-zero bin series")
    bw = series.bin_width
    if cfg.fixed_frequency is not None:
        nu = cfg.fixed_frequency
        spec = _dft_at(x, nu, bw)
        return CarrierEstimate(nu, float(np.angle(spec)) % (2 * np.pi), frame_index,
                               2 * abs(spec) / n_events, n_events, series.t_ref_ps)

    length = cfg.fft_length(x.size)
    lo, hi = cfg.search_window
    k0 = math.ceil(lo * length * bw)
    k1 = math.floor(hi * length * bw)
    if k1 < k0:
        raise ValueError("no spectral component inside the search window")
    spec = _czt(x.size, k1 - k0 + 1, k0, length)(x.astype(np.float64))
    mag = np.abs(spec)
    i = int(np.argmax(mag))
    nu = (k0 + i) / (length * bw)
    value = spec[i]
    if cfg.refine and 0 < i < mag.size - 1:
        a, b, c = mag[i - 1], mag[i], mag[i + 1]
        den = a - 2 * b + c
        if den < 0:
            nu += 0.5 * (a - c) / den / (length * bw)
            value = _dft_at(x, nu, bw)
    return CarrierEstimate(nu, float(np.angle(value)) % (2 * np.pi), frame_index,
                           2 * abs(value) / n_events, n_events, series.t_ref_ps)


def duplex_series(stream, schedule: FrameSchedule, k: int, cfg: RecoveryConfig) -> BinSeries:
    """Bins of R-frames ``k`` and ``k + 1`` on one time axis, Q-frame zeroed."""
    a0, a1 = schedule.r_frame_ps(k)
    b0, b1 = schedule.r_frame_ps(k + 1)
    ta, da = stream.window(a0, a1)
    tb, db = stream.window(b0, b1)
    return map_and_bin(np.concatenate([ta, tb]), np.concatenate([da, db]), a0, b1, cfg)


def duplex_estimate(stream, schedule: FrameSchedule, k: int, cfg: RecoveryConfig) -> CarrierEstimate:
    """Joint estimate from the two R-frames enclosing Q-frame ``k``."""
    if stream.n_frames and not (0 <= k < stream.n_frames):
        raise ValueError(f"Q-frame {k} is not enclosed by two R-frames of this run")
    return estimate_carrier(duplex_series(stream, schedule, k, cfg), cfg, k)


def single_estimate(stream, schedule: FrameSchedule, k: int, cfg: RecoveryConfig) -> CarrierEstimate:
    """Estimate for Q-frame ``k`` from the preceding R-frame only."""
    a0, a1 = schedule.r_frame_ps(k)
    t, d = stream.window(a0, a1)
    return estimate_carrier(map_and_bin(t, d, a0, a1, cfg), cfg, k)


def recover_stream(stream, schedule: FrameSchedule, cfg: RecoveryConfig, frames=None,
                   threads: int = 1) -> dict[int, CarrierEstimate]:
    """Estimates for every Q-frame (frames without usable clicks are skipped)."""
    frames = range(stream.n_frames) if frames is None else frames
    one = duplex_estimate if cfg.duplex else single_estimate

    def work(k):
        try:
            return k, one(stream, schedule, k, cfg)
        except ValueError:
            return k, None

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, frames))
    else:
        results = [work(k) for k in frames]
    return {k: e for k, e in results if e is not None}


def predict_phase(est: CarrierEstimate, t_ps):
    """Interference phase ``2 pi nu_hat (t - t_ref) + phi0_hat`` mod 2 pi."""
    dt = (np.asarray(t_ps, dtype=np.float64) - est.t_ref_ps) * 1e-12
    cycles = np.mod(est.nu_hat * dt, 1.0)
    out = np.mod(2 * np.pi * cycles + est.phi0_hat, 2 * np.pi)
    return float(out) if np.ndim(t_ps) == 0 else out


ESTIMATE_COLUMNS = ("frame_index", "nu_hat_hz", "phi0_hat_rad", "n_events", "peak_amplitude", "t_ref_ps")


def write_estimates(estimates: dict[int, CarrierEstimate], path: str | Path, header: list[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ESTIMATE_COLUMNS)
        for k in sorted(estimates):
            e = estimates[k]
            w.writerow([k, repr(float(e.nu_hat)), repr(float(e.phi0_hat)), int(e.n_events),
                        repr(float(e.peak_amplitude)), repr(float(e.t_ref_ps))])


def read_estimates(path: str | Path) -> dict[int, CarrierEstimate]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or tuple(rows[0]) != ESTIMATE_COLUMNS:
        raise ValueError(f"{path}: unexpected estimate header")
    out = {}
    for r in rows[1:]:
        k = int(r[0])
        out[k] = CarrierEstimate(float(r[1]), float(r[2]), k, float(r[4]), int(r[3]), float(r[5]))
    return out
