"""Phase-noise spectral models and the analytic interference-error chain.

Noise sources are described by one-sided power spectral densities. A laser is
usually a white frequency-noise floor ``h_w`` (Hz^2/Hz, Lorentzian linewidth
``pi * h_w``); fiber channels are tabulated phase-noise curves (rad^2/Hz).

From the PSDs we build the phase structure function ``D(tau) = <dphi^2(tau)>``
of the two-sided link, the residual variance left after estimating the phase
as the mean over the two R-frames that bracket a Q-frame, and finally the
interference error rate averaged over the Q-frame.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline

C_LIGHT = 299_792_458.0
#: optical carrier at 1550.12 nm
NU0_DEFAULT = C_LIGHT / 1550.12e-9

QUAD_RTOL = 1e-6


class PsdBandWarning(UserWarning):
    """A PSD was evaluated outside the band it is defined on (value clamped)."""


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _gauss_legendre(func, knots: np.ndarray) -> float:
    """Composite 16-point Gauss-Legendre rule over consecutive ``knots``."""
    a = knots[:-1, None]
    b = knots[1:, None]
    half = 0.5 * (b - a)
    x = 0.5 * (a + b) + half * _GL_X[None, :]
    return float(np.sum(half * _GL_W[None, :] * func(x)))


# --------------------------------------------------------------------------
# PSD models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PsdModel:
    """One-sided noise spectral density.

    ``kind`` is ``"white_frequency"`` (constant frequency-noise density
    ``h_w`` in Hz^2/Hz), ``"tabulated"`` (points interpolated linearly in
    log-log space, in units given by ``quantity``) or ``"sum"``.

    Use the constructors :meth:`white`, :meth:`from_linewidth`,
    :meth:`tabulated`, :meth:`sum_of` and :meth:`zero` rather than the raw
    initializer.
    """

    kind: str
    h_w: float = 0.0
    freqs: tuple[float, ...] = ()
    densities: tuple[float, ...] = ()
    quantity: str = "frequency"
    children: tuple["PsdModel", ...] = ()
    band: tuple[float, float] = (0.0, math.inf)

    def __post_init__(self):
        if self.kind not in ("white_frequency", "tabulated", "sum"):
            raise ValueError(f"unknown PSD kind {self.kind!r}")
        if self.quantity not in ("frequency", "phase"):
            raise ValueError(f"quantity must be 'frequency' or 'phase', got {self.quantity!r}")
        lo, hi = self.band
        if not (0.0 <= lo < hi):
            raise ValueError(f"invalid band {self.band}")
        if self.kind == "white_frequency":
            if not (np.isfinite(self.h_w) and self.h_w >= 0):
                raise ValueError("h_w must be finite and >= 0")
        elif self.kind == "tabulated":
            f = np.asarray(self.freqs, float)
            s = np.asarray(self.densities, float)
            if f.size < 2 or f.size != s.size:
                raise ValueError("tabulated PSD needs >= 2 (frequency, density) points")
            if np.any(f <= 0) or np.any(np.diff(f) <= 0):
                raise ValueError("tabulated frequencies must be positive and strictly increasing")
            if not np.all(np.isfinite(s)) or np.any(s < 0):
                raise ValueError("tabulated densities must be finite and >= 0")
        elif self.kind == "sum":
            if any(c.quantity != self.quantity for c in self.children):
                raise ValueError("all children of a sum must share one quantity")

    # -- constructors -----------------------------------------------------

    @classmethod
    def white(cls, h_w: float, band: tuple[float, float] = (0.0, math.inf)) -> "PsdModel":
        return cls(kind="white_frequency", h_w=float(h_w), band=band)

    @classmethod
    def from_linewidth(cls, linewidth_hz: float) -> "PsdModel":
        """White frequency noise of a laser with the given Lorentzian linewidth."""
        if linewidth_hz < 0:
            raise ValueError("linewidth must be >= 0")
        return cls.white(linewidth_hz / math.pi)

    @classmethod
    def tabulated(cls, points: Iterable[tuple[float, float]], quantity: str = "phase") -> "PsdModel":
        pts = [(float(f), float(s)) for f, s in points]
        if not pts:
            raise ValueError("empty PSD table")
        f, s = zip(*pts)
        return cls(kind="tabulated", freqs=tuple(f), densities=tuple(s), quantity=quantity,
                   band=(f[0], f[-1]))

    @classmethod
    def sum_of(cls, *children: "PsdModel") -> "PsdModel":
        if not children:
            return cls.zero()
        q = children[0].quantity
        lo = min(c.band[0] for c in children)
        hi = max(c.band[1] for c in children)
        return cls(kind="sum", children=tuple(children), quantity=q, band=(lo, hi))

    @classmethod
    def zero(cls) -> "PsdModel":
        return cls.white(0.0)

    @classmethod
    def from_file(cls, path: str | Path, quantity: str = "phase") -> "PsdModel":
        """Read a two-column ``frequency density`` text table (``#`` comments)."""
        return cls.tabulated(read_psd_table(path), quantity=quantity)

    # -- evaluation -------------------------------------------------------

    def leaves(self) -> list["PsdModel"]:
        if self.kind == "sum":
            out: list[PsdModel] = []
            for c in self.children:
                out.extend(c.leaves())
            return out
        return [self]

    @property
    def is_zero(self) -> bool:
        return all(
            (leaf.kind == "white_frequency" and leaf.h_w == 0.0)
            or (leaf.kind == "tabulated" and not any(leaf.densities))
            for leaf in self.leaves()
        )

    def _eval_leaf(self, f: np.ndarray) -> np.ndarray:
        if self.kind == "white_frequency":
            return np.full_like(f, self.h_w)
        logf = np.log(np.asarray(self.freqs))
        logs = np.log(np.maximum(np.asarray(self.densities), 1e-300))
        fc = np.clip(f, self.freqs[0], self.freqs[-1])
        out = np.exp(np.interp(np.log(fc), logf, logs))
        return np.where(out < 1e-290, 0.0, out)

    def __call__(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if self.kind == "sum":
            return sum((c(f) for c in self.children), np.zeros_like(f))
        return self._eval_leaf(f)

    def frequency_noise(self, f) -> np.ndarray:
        """Density of frequency fluctuations ``S_dnu(f)`` in Hz^2/Hz."""
        f = np.asarray(f, dtype=float)
        if self.kind == "sum":
            return sum((c.frequency_noise(f) for c in self.children), np.zeros_like(f))
        s = self._eval_leaf(f)
        return s if self.quantity == "frequency" else s * f**2


def psd_eval(model: PsdModel, f):
    """Evaluate ``model`` at frequency ``f`` (Hz), clamping outside the band.

    Returns the density in the model's native units. Frequencies outside the
    band are clamped to the band edge and a :class:`PsdBandWarning` is issued.
    """
    arr = np.asarray(f, dtype=float)
    if np.any(arr < 0) or np.any(~np.isfinite(arr)):
        raise ValueError("frequency must be finite and >= 0")
    lo, hi = model.band
    if np.any(arr < lo) or np.any(arr > hi):
        warnings.warn(f"frequency outside PSD band {model.band}; clamped", PsdBandWarning, stacklevel=2)
        arr = np.clip(arr, lo, hi)
    out = model(arr)
    return float(out) if np.ndim(f) == 0 else out


def linewidth_from_white(h_w: float) -> float:
    """Lorentzian linewidth (Hz) of white frequency noise ``h_w`` (Hz^2/Hz)."""
    if h_w < 0:
        raise ValueError("h_w must be >= 0")
    return math.pi * h_w


def read_psd_table_text(text: str, source: str = "<text>") -> list[tuple[float, float]]:
    """Parse ``frequency density`` rows (whitespace or comma separated, ``#`` comments)."""
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"{source}: expected two columns, got {line!r}")
        rows.append((float(parts[0]), float(parts[1])))
    if not rows:
        raise ValueError(f"{source}: empty PSD table")
    return rows


def read_psd_table(path: str | Path) -> list[tuple[float, float]]:
    return read_psd_table_text(Path(path).read_text(), str(path))


# --------------------------------------------------------------------------
# structure functions
# --------------------------------------------------------------------------


def _oscillatory_knots(lo: float, hi: float, tau: float, per_decade: int = 8) -> np.ndarray:
    """Knots for integrands carrying sin^2(pi f tau): log panels below 1/tau,
    half-period linear panels above."""
    corner = 1.0 / tau
    knots = []
    if lo < corner:
        start = lo if lo > 0 else min(1e-6 * corner, hi)
        n = max(2, int(math.ceil(per_decade * math.log10(min(hi, corner) / start))) + 1)
        knots.append(np.geomspace(start, min(hi, corner), n))
    if hi > corner:
        top = min(hi, 512.0 * corner)
        start = max(lo, corner)
        n = max(2, int(math.ceil((top - start) / (0.5 * corner))) + 1)
        knots.append(np.linspace(start, top, n))
    k = np.unique(np.concatenate(knots))
    return k


def _leaf_phase_variance(leaf: PsdModel, tau: float) -> float:
    """4 * int S_phi(f) sin^2(pi f tau) df over the leaf band."""
    if leaf.is_zero or tau == 0:
        return 0.0
    lo, hi = leaf.band

    def integrand(f):
        return 4.0 * leaf.frequency_noise(f) * np.sin(np.pi * f * tau) ** 2 / f**2

    knots = _oscillatory_knots(lo, hi, tau)
    total = _gauss_legendre(integrand, knots)
    if lo == 0:
        # [0, knots[0]]: sin^2(pi f tau)/f^2 -> (pi tau)^2
        total += 4.0 * float(leaf.frequency_noise(knots[0])) * (math.pi * tau) ** 2 * knots[0]
    top = knots[-1]
    if hi > top:
        # beyond 512/tau the sin^2 factor averages to 1/2
        if math.isinf(hi):
            if leaf.kind != "white_frequency":
                raise ValueError("unbounded band only supported for white frequency noise")
            total += 2.0 * leaf.h_w / top
        else:
            tail = np.geomspace(top, hi, max(2, int(8 * math.log10(hi / top)) + 2))
            total += _gauss_legendre(lambda f: 2.0 * leaf.frequency_noise(f) / f**2, tail)
    return total


def structure_function(psd: PsdModel, tau: float) -> float:
    """Mean-square phase change ``<[phi(t+tau) - phi(t)]^2>`` (rad^2) of a PSD.

    Equivalent to ``4 pi^2 tau^2 int S_dnu(f) sinc^2(pi f tau) df``.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    return sum(_leaf_phase_variance(leaf, tau) for leaf in psd.leaves())


@dataclass(frozen=True)
class FiberPathModel:
    """Optical path-length fluctuation of one fiber arm.

    Either derived from a phase-noise PSD measured at carrier ``nu0`` or given
    as a table of ``(tau, sigma_L^2)`` with sigma_L^2 in m^2.
    """

    psd: PsdModel | None = None
    nu0: float = NU0_DEFAULT
    taus: tuple[float, ...] = ()
    sigma_l2_m2: tuple[float, ...] = ()

    def __post_init__(self):
        if self.psd is not None and self.psd.quantity != "phase":
            raise ValueError("fiber PSD must be a phase-noise PSD")
        if self.taus:
            t = np.asarray(self.taus)
            s = np.asarray(self.sigma_l2_m2)
            if t.size != s.size or t.size < 2 or np.any(np.diff(t) <= 0) or t[0] < 0:
                raise ValueError("sigma_L table needs increasing taus and matching values")
            if np.any(s < 0):
                raise ValueError("sigma_L^2 must be >= 0")

    @classmethod
    def none(cls) -> "FiberPathModel":
        return cls()

    @property
    def is_zero(self) -> bool:
        if self.psd is not None:
            return self.psd.is_zero
        return not self.taus or not any(self.sigma_l2_m2)

    def phase_variance(self, tau: float) -> float:
        """Path term ``4 pi^2 nu0^2 sigma_L^2(tau) / c^2`` in rad^2."""
        if tau <= 0 or self.is_zero:
            return 0.0
        if self.psd is not None:
            return structure_function(self.psd, tau)
        s2 = float(np.interp(tau, (0.0,) + self.taus, (0.0,) + self.sigma_l2_m2))
        return 4.0 * math.pi**2 * self.nu0**2 * s2 / C_LIGHT**2

    def sigma_l2(self, tau: float) -> float:
        """Path-length variance sigma_L^2(tau) in m^2."""
        return self.phase_variance(tau) * C_LIGHT**2 / (4.0 * math.pi**2 * self.nu0**2)


def _cross_term(laser: PsdModel, fiber: FiberPathModel, tau: float, scale: float) -> float:
    """Laser-frequency-noise x path-delay cross term of the one-sided variance.

    ``2 int S_dnu(f) [1 - exp(-2 pi^2 sigma_t^2 f^2)] cos(2 pi f tau) / f^2 df``
    where sigma_t^2 = sigma_L^2 / c^2 is the delay variance.
    """
    if fiber.is_zero or laser.is_zero or tau <= 0:
        return 0.0
    sigma_t2 = fiber.sigma_l2(tau) / C_LIGHT**2
    a = 2.0 * math.pi**2 * sigma_t2
    if a == 0:
        return 0.0
    b = 2.0 * math.pi * tau
    total = 0.0
    for leaf in laser.leaves():
        lo, hi = leaf.band
        if leaf.kind == "white_frequency" and lo == 0 and math.isinf(hi):
            # int_0^inf (1-e^{-a f^2}) cos(b f)/f^2 df = int_0^a sqrt(pi/s)/2 e^{-b^2/4s} ds
            if b * b / (4.0 * a) > 700:
                continue
            val, _ = integrate.quad(lambda s: 0.5 * math.sqrt(math.pi / s) * math.exp(-b * b / (4 * s)),
                                    0.0, a, epsrel=QUAD_RTOL)
            total += 2.0 * leaf.h_w * val
            continue
        # |bracket| <= a f^2, so the term is bounded by 2 a int S_dnu df
        top = hi if math.isfinite(hi) else 1e12
        knots = np.geomspace(max(lo, 1e-3), top, 200)
        bound = 2.0 * a * _gauss_legendre(leaf.frequency_noise, knots)
        if bound <= 1e-12 * max(scale, 1e-300):
            continue
        knots = _oscillatory_knots(max(lo, 1e-3), top, tau)

        def integrand(f):
            return 2.0 * leaf.frequency_noise(f) * -np.expm1(-a * f**2) * np.cos(b * f) / f**2

        total += _gauss_legendre(integrand, knots)
    return total


@dataclass(frozen=True)
class LinkNoise:
    """Independent laser and fiber noise on Alice's and Bob's sides."""

    laser_a: PsdModel = field(default_factory=PsdModel.zero)
    laser_b: PsdModel = field(default_factory=PsdModel.zero)
    fiber_a: FiberPathModel = field(default_factory=FiberPathModel.none)
    fiber_b: FiberPathModel = field(default_factory=FiberPathModel.none)
    nu0: float = NU0_DEFAULT

    @classmethod
    def white_lasers(cls, linewidth_a: float, linewidth_b: float | None = None, **kw) -> "LinkNoise":
        if linewidth_b is None:
            linewidth_b = linewidth_a
        return cls(laser_a=PsdModel.from_linewidth(linewidth_a),
                   laser_b=PsdModel.from_linewidth(linewidth_b), **kw)

    def side_variance(self, side: str, tau: float) -> float:
        laser = self.laser_a if side == "a" else self.laser_b
        fiber = self.fiber_a if side == "a" else self.fiber_b
        v1 = structure_function(laser, tau)
        v2 = fiber.phase_variance(tau)
        v3 = _cross_term(laser, fiber, tau, v1 + v2)
        return v1 + v2 + v3

    @property
    def is_zero(self) -> bool:
        return self.laser_a.is_zero and self.laser_b.is_zero and self.fiber_a.is_zero and self.fiber_b.is_zero


def phase_diff_variance(noise: LinkNoise, tau: float) -> float:
    """Structure function of the Alice-Bob phase difference at lag ``tau`` (s).

    Sum of the one-sided variances: laser frequency-noise term, fiber path
    term and their cross term.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau == 0:
        return 0.0
    return noise.side_variance("a", tau) + noise.side_variance("b", tau)


# --------------------------------------------------------------------------
# frames and slices
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FrameSchedule:
    """R-frame / Q-frame time multiplexing (durations in seconds).

    Period ``k`` starts with R-frame ``k`` at ``k * period``, followed by a
    buffer, Q-frame ``k`` and another buffer. Q-frame ``k`` is bracketed by
    R-frames ``k`` and ``k + 1``.
    """

    t_r: float
    t_q: float
    t_buffer: float = 0.0

    def __post_init__(self):
        if not (self.t_r > 0 and self.t_q > 0 and self.t_buffer >= 0):
            raise ValueError("frame durations must be positive (buffer >= 0)")

    @property
    def period(self) -> float:
        return self.t_q + self.t_r + 2 * self.t_buffer

    @property
    def duty_cycle(self) -> float:
        return self.t_q / self.period

    @property
    def gap(self) -> float:
        """Separation between the two R-frames around a Q-frame."""
        return self.t_q + 2 * self.t_buffer

    # integer-picosecond layout used by the event-level code
    @property
    def period_ps(self) -> int:
        return _to_ps(self.t_r) + _to_ps(self.t_q) + 2 * _to_ps(self.t_buffer)

    def r_frame_ps(self, k: int) -> tuple[int, int]:
        start = k * self.period_ps
        return start, start + _to_ps(self.t_r)

    def q_frame_ps(self, k: int) -> tuple[int, int]:
        start = k * self.period_ps + _to_ps(self.t_r) + _to_ps(self.t_buffer)
        return start, start + _to_ps(self.t_q)

    def q_center_ps(self, k: int) -> int:
        a, b = self.q_frame_ps(k)
        return (a + b) // 2


def _to_ps(seconds: float) -> int:
    return int(round(seconds * 1e12))


@dataclass(frozen=True)
class SliceConfig:
    """Phase-slice acceptance: ``m`` slices, accepted half-width (rad).

    The default half-width ``pi / m`` is the operational sift window;
    :meth:`integration_window` gives the wider ``2 pi / m`` variant.
    """

    m: int = 16
    accept_halfwidth: float | None = None

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.accept_halfwidth is None:
            object.__setattr__(self, "accept_halfwidth", math.pi / self.m)
        if not (0 < self.accept_halfwidth <= math.pi / 2):
            raise ValueError("accept_halfwidth must be in (0, pi/2]")

    @classmethod
    def integration_window(cls, m: int = 16) -> "SliceConfig":
        return cls(m=m, accept_halfwidth=2 * math.pi / m)

    @property
    def floor(self) -> float:
        """Error rate of a noiseless link (pure slicing penalty)."""
        return instantaneous_er(0.0, self)


# --------------------------------------------------------------------------
# residual variance and error rates
# --------------------------------------------------------------------------


class _TabulatedStructure:
    """Cubic-spline cache of ``phase_diff_variance`` on [0, tau_max]."""

    def __init__(self, noise: LinkNoise, tau_max: float, n: int = 257):
        self.tau_max = tau_max
        taus = np.linspace(0.0, tau_max, n)
        vals = np.array([phase_diff_variance(noise, t) for t in taus])
        self._spline = CubicSpline(taus, vals)

    def __call__(self, tau):
        tau = np.asarray(tau, float)
        if np.any(tau < -1e-18) or np.any(tau > self.tau_max * (1 + 1e-9)):
            raise ValueError("lag outside tabulated range")
        return np.maximum(self._spline(np.clip(tau, 0.0, self.tau_max)), 0.0)


@lru_cache(maxsize=64)
def _structure_cache(noise: LinkNoise, tau_max: float) -> _TabulatedStructure:
    return _TabulatedStructure(noise, tau_max)


_S9_X, _S9_W = np.polynomial.legendre.leggauss(96)


def _residual_variance(D, t_r: float, gap: float, t) -> np.ndarray:
    """Residual variance of phi(t) after subtracting its mean over the two
    R-frames ``[-gap/2 - t_r, -gap/2]`` and ``[gap/2, gap/2 + t_r]``."""
    t = np.atleast_1d(np.asarray(t, float))
    s = 0.5 * t_r * (_S9_X + 1.0)
    w = 0.5 * t_r * _S9_W
    first = (D(s[None, :] + gap / 2 + t[:, None]) + D(s[None, :] + gap / 2 - t[:, None])) @ w / (2 * t_r)
    second = np.sum((D(gap + s) + D(gap + 2 * t_r - s) + 2 * D(t_r - s)) * s * w) / (2 * t_r) ** 2
    return first - second


def reference_phase_estimate_variance(noise: LinkNoise, schedule: FrameSchedule, t) -> np.ndarray | float:
    """Mean-square phase error at Q-frame time ``t`` (s, centred on the Q-frame).

    The phase reference is the average of the phase over the two R-frames
    around the Q-frame; the frequency estimate is assumed exact.
    """
    t_arr = np.asarray(t, float)
    if np.any(np.abs(t_arr) > schedule.t_q / 2 * (1 + 1e-12)):
        raise ValueError("t must lie inside the Q-frame [-T_Q/2, T_Q/2]")
    if noise.is_zero:
        return 0.0 if t_arr.ndim == 0 else np.zeros_like(t_arr)
    D = _structure_cache(noise, schedule.gap + 2 * schedule.t_r)
    out = _residual_variance(D, schedule.t_r, schedule.gap, t_arr)
    return float(out[0]) if t_arr.ndim == 0 else out


def instantaneous_er(variance, slice_cfg: SliceConfig):
    """Error probability for Gaussian phase error of the given variance.

    ``sin^2(phi/2)`` averaged over the Gaussian and over the accepted window
    ``|phi_hat| <= w``, which reduces to ``(1 - exp(-v/2) sin(w)/w) / 2``.
    """
    v = np.asarray(variance, float)
    if np.any(v < 0):
        raise ValueError("variance must be >= 0")
    w = slice_cfg.accept_halfwidth
    out = 0.5 * (1.0 - np.exp(-v / 2.0) * math.sin(w) / w)
    return float(out) if out.ndim == 0 else out


_Q_X, _Q_W = np.polynomial.legendre.leggauss(48)


def mean_er_over_qframe(noise: LinkNoise, schedule: FrameSchedule, slice_cfg: SliceConfig) -> float:
    """Interference error rate averaged over the Q-frame, exact frequency assumed."""
    t = 0.5 * schedule.t_q * _Q_X
    var = reference_phase_estimate_variance(noise, schedule, t)
    return float(np.sum(instantaneous_er(var, slice_cfg) * _Q_W) / 2.0)


def max_linewidth_for_er(target_er: float, schedule: FrameSchedule, slice_cfg: SliceConfig,
                         fiber: FiberPathModel | None = None, rtol: float = 1e-3) -> float:
    """Largest per-laser white-noise linewidth (Hz) keeping the Q-frame ER at ``target_er``.

    Both lasers are given the same linewidth; ``fiber`` (optional) is added
    to both sides.
    """
    floor = slice_cfg.floor
    if not (floor < target_er < 0.5):
        raise ValueError(f"target ER must lie in ({floor:.5f}, 0.5)")
    fiber = fiber or FiberPathModel.none()

    def excess(lw: float) -> float:
        noise = LinkNoise.white_lasers(lw, fiber_a=fiber, fiber_b=fiber)
        return mean_er_over_qframe(noise, schedule, slice_cfg) - target_er

    if excess(0.0) >= 0:
        return 0.0
    hi = 1e3
    while excess(hi) < 0:
        hi *= 4
        if hi > 1e12:
            raise ValueError("target ER not reachable")
    return optimize.brentq(excess, 0.0, hi, rtol=rtol * 1e-2, xtol=1e-9)


def residual_variance_generic(noise: LinkNoise, t: float, intervals: Sequence[tuple[float, float]]) -> float:
    """Residual variance for a mean-phase estimate over arbitrary intervals.

    Slow reference path (nested adaptive quadrature); used to cross-check
    the closed two-frame expression and to evaluate single-frame estimators.
    """
    total = sum(b - a for a, b in intervals)

    def D(x):
        return phase_diff_variance(noise, abs(x))

    first = sum(integrate.quad(lambda s: D(t - s), a, b, epsrel=1e-8)[0] for a, b in intervals) / total
    second = 0.0
    for a1, b1 in intervals:
        for a2, b2 in intervals:
            second += integrate.dblquad(lambda y, x: D(x - y), a1, b1, a2, b2, epsrel=1e-7)[0]
    return first - second / (2 * total**2)
