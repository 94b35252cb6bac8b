"""Event sifting against the recovered carrier and SNS count tables.

A Q-frame click is valid when the predicted interference phase lies within
the accepted half-width of 0 or pi (``|cos Phi| >= cos w``); near 0 the
correct detector is D0, near pi it is D1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .keyrate import DETECTED_LABELS, CountTable, DecoyParams
from .noise_model import FrameSchedule, SliceConfig
from .recovery import CarrierEstimate, predict_phase

REJECT, CORRECT, ERROR = 0, 1, 2
_OUTCOME_NAMES = {REJECT: "reject", CORRECT: "correct", ERROR: "error"}
SOURCES = "oxy"
WINDOWS = "ZX"


@dataclass(frozen=True)
class SiftOutcome:
    valid: int
    correct: int
    error: int
    skipped: int = 0

    def __post_init__(self):
        if self.valid != self.correct + self.error:
            raise ValueError("valid must equal correct + error")

    @property
    def er(self) -> float:
        return self.error / self.valid if self.valid else math.nan

    @property
    def stderr(self) -> float:
        """Binomial standard error of :attr:`er`."""
        if not self.valid:
            return math.nan
        p = self.er
        return math.sqrt(p * (1 - p) / self.valid)


def classify_phase(phi, detectors, slice_cfg: SliceConfig) -> np.ndarray:
    """Vectorized outcome codes (REJECT, CORRECT, ERROR) for phases ``phi``."""
    c = np.cos(phi)
    accept = np.abs(c) >= math.cos(slice_cfg.accept_halfwidth)
    expected = np.where(c > 0, 0, 1)
    out = np.where(np.asarray(detectors) == expected, CORRECT, ERROR)
    return np.where(accept, out, REJECT)


def classify_event(t_ps: int, detector: int, est: CarrierEstimate, slice_cfg: SliceConfig,
                   extra_phase: float = 0.0) -> str:
    """``"correct"``, ``"error"`` or ``"reject"`` for one click."""
    phi = predict_phase(est, t_ps) + extra_phase
    return _OUTCOME_NAMES[int(classify_phase(phi, detector, slice_cfg))]


def _estimate_arrays(estimates: dict[int, CarrierEstimate], n: int):
    nu = np.full(n, np.nan)
    phi0 = np.zeros(n)
    tref = np.zeros(n)
    for k, e in estimates.items():
        if 0 <= k < n:
            nu[k], phi0[k], tref[k] = e.nu_hat, e.phi0_hat, e.t_ref_ps
    return nu, phi0, tref


def _phase_from_arrays(t_ps, frame, nu, phi0, tref):
    dt = (t_ps.astype(np.float64) - tref[frame]) * 1e-12
    return 2 * np.pi * np.mod(nu[frame] * dt, 1.0) + phi0[frame]


def q_frame_events(stream, schedule: FrameSchedule):
    """(times, detectors, frame index) of the clicks inside Q-frames."""
    per = schedule.period_ps
    q0, q1 = schedule.q_frame_ps(0)
    t = stream.times_ps
    k = t // per
    off = t - k * per
    n = stream.n_frames if stream.n_frames else int(k.max(initial=-1)) + 1
    m = (off >= q0) & (off < q1) & (k < n)
    return t[m], stream.detectors[m], k[m]


def tally_er(stream, estimates: dict[int, CarrierEstimate], schedule: FrameSchedule,
             slice_cfg: SliceConfig) -> SiftOutcome:
    """Interference error rate of all Q-frame clicks.

    Clicks in frames without an estimate are counted in ``skipped``.
    """
    t, d, k = q_frame_events(stream, schedule)
    n = int(k.max(initial=-1)) + 1
    nu, phi0, tref = _estimate_arrays(estimates, n)
    have = ~np.isnan(nu[k]) if n else np.zeros(0, bool)
    t, d, k_ok = t[have], d[have], k[have]
    codes = classify_phase(_phase_from_arrays(t, k_ok, nu, phi0, tref), d, slice_cfg)
    correct = int(np.count_nonzero(codes == CORRECT))
    error = int(np.count_nonzero(codes == ERROR))
    return SiftOutcome(correct + error, correct, error, int((~have).sum()))


def carrier_estimates(nu: float, phi0: float, n_frames: int) -> dict[int, CarrierEstimate]:
    """Estimates that reproduce a known carrier exactly (reference t = 0)."""
    return {k: CarrierEstimate(nu, phi0, k, 1.0, 0, 0.0) for k in range(n_frames)}


def xx_postselect(theta_a, theta_b, psi_ab, lam: float):
    """Decoy-pair post-selection ``1 - |cos(theta_a - theta_b - psi)| <= lam``."""
    if not (0.0 <= lam <= 1.0):
        raise ValueError("lambda must lie in [0, 1]")
    ok = 1.0 - np.abs(np.cos(np.asarray(theta_a) - theta_b - psi_ab)) <= lam + 1e-12
    return bool(ok) if np.ndim(ok) == 0 else ok


def lambda_for_halfwidth(w: float) -> float:
    """Post-selection threshold accepting the bands ``|delta| <= w`` around 0 and pi."""
    return 1.0 - math.cos(w)


# --------------------------------------------------------------------------
# encoded slots
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SideChoice:
    window: str
    intensity: str
    phase_index: int

    @property
    def sends(self) -> bool:
        """True for a signal window in which the party sends."""
        return self.window == "Z" and self.intensity == "y"


@dataclass(frozen=True)
class EncodedSlot:
    slot_time: int
    side_a: SideChoice
    side_b: SideChoice

    @property
    def label(self) -> str:
        a, b = self.side_a, self.side_b
        return a.window + b.window + a.intensity + b.intensity


@dataclass
class SlotTable:
    """Per-slot choices of both parties (window 0 = Z / 1 = X, source 0/1/2 = o/x/y)."""

    time_ps: np.ndarray
    a_window: np.ndarray
    a_source: np.ndarray
    a_phase: np.ndarray
    b_window: np.ndarray
    b_source: np.ndarray
    b_phase: np.ndarray
    phase_levels: int = 16

    def __post_init__(self):
        self.time_ps = np.asarray(self.time_ps, dtype=np.int64)
        for name in ("a_window", "a_source", "a_phase", "b_window", "b_source", "b_phase"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.uint8))
            if getattr(self, name).shape != self.time_ps.shape:
                raise ValueError(f"{name} length mismatch")
        if np.any(np.diff(self.time_ps) <= 0):
            raise ValueError("slot times must be strictly increasing")
        if np.any(self.a_phase >= self.phase_levels) or np.any(self.b_phase >= self.phase_levels):
            raise ValueError("phase index out of range")
        for w, s in ((self.a_window, self.a_source), (self.b_window, self.b_source)):
            if np.any((w == 0) & (s == 1)) or np.any((w == 1) & (s == 2)):
                raise ValueError("sources inconsistent with windows (Z uses o/y, X uses o/x)")

    def __len__(self) -> int:
        return self.time_ps.size

    def __getitem__(self, i: int) -> EncodedSlot:
        def side(w, s, p):
            return SideChoice(WINDOWS[w[i]], SOURCES[s[i]], int(p[i]))

        return EncodedSlot(int(self.time_ps[i]), side(self.a_window, self.a_source, self.a_phase),
                           side(self.b_window, self.b_source, self.b_phase))

    def labels(self) -> np.ndarray:
        """Table label index (into :data:`DETECTED_LABELS`) of every slot."""
        lookup = {lab: i for i, lab in enumerate(DETECTED_LABELS)}
        table = np.full((2, 3, 2, 3), -1, dtype=np.int64)
        for wa in range(2):
            for sa in range(3):
                for wb in range(2):
                    for sb in range(3):
                        lab = WINDOWS[wa] + WINDOWS[wb] + SOURCES[sa] + SOURCES[sb]
                        table[wa, sa, wb, sb] = lookup.get(lab, -1)
        return table[self.a_window, self.a_source, self.b_window, self.b_source]

    def theta(self, side: str) -> np.ndarray:
        ph = self.a_phase if side == "a" else self.b_phase
        return 2 * np.pi * ph.astype(np.float64) / self.phase_levels

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            np.savez(fh, time_ps=self.time_ps, a_window=self.a_window, a_source=self.a_source,
                     a_phase=self.a_phase, b_window=self.b_window, b_source=self.b_source,
                     b_phase=self.b_phase, phase_levels=np.int64(self.phase_levels))

    @classmethod
    def load(cls, path: str | Path) -> "SlotTable":
        with np.load(path) as z:
            return cls(z["time_ps"], z["a_window"], z["a_source"], z["a_phase"], z["b_window"],
                       z["b_source"], z["b_phase"], int(z["phase_levels"]))


def _nearest(slot_t: np.ndarray, t: np.ndarray) -> np.ndarray:
    if slot_t.size == 1:
        return np.zeros(t.size, np.int64)
    hi = np.clip(np.searchsorted(slot_t, t), 1, slot_t.size - 1)
    lo = hi - 1
    return np.where(t - slot_t[lo] <= slot_t[hi] - t, lo, hi)


def _aopp_tally(alice: np.ndarray, bob: np.ndarray, rng: np.random.Generator):
    """Pairing observables and survivors of odd-parity pairing on raw Z bits."""
    b0 = np.flatnonzero(bob == 0)
    b1 = np.flatnonzero(bob == 1)
    rng.shuffle(b0)
    rng.shuffle(b1)
    n_g = min(b0.size, b1.size)
    i, j = b0[:n_g], b1[:n_g]
    keep = alice[i] != alice[j]
    survived = int(keep.sum())
    errors = int((alice[i][keep] != 0).sum())
    perm = rng.permutation(bob.size)
    half = bob.size // 2
    n_odd = int((bob[perm[:half]] != bob[perm[half:2 * half]]).sum())
    return n_g, n_odd, survived, errors


def build_count_table(slots: SlotTable, stream, estimates: dict[int, CarrierEstimate],
                      params: DecoyParams, schedule: FrameSchedule, *, gate_ps: float = 200.0,
                      lam: float | None = None, seed: int = 0) -> CountTable:
    """Tally an encoded run into a count table.

    Each Q-frame click is assigned to the nearest slot and kept when within
    ``gate_ps / 2`` of it. One-detector slots are heralded events. Decoy-pair
    slots pass the post-selection with ``psi_AB = -Phi_hat(t_slot)`` and
    ``lam`` (default: the band ``|delta| <= pi/16``). Frames without a
    carrier estimate are dropped and reported.
    """
    if lam is None:
        lam = lambda_for_halfwidth(math.pi / 16)
    per = schedule.period_ps
    slot_frame = slots.time_ps // per
    n_frames = int(slot_frame.max(initial=-1)) + 1
    nu, phi0, tref = _estimate_arrays(estimates, n_frames)
    slot_ok = ~np.isnan(nu[slot_frame])
    diag = {"q_frame_clicks": 0, "gated_out": 0, "two_detector_slots": 0,
            "slots_without_estimate": int((~slot_ok).sum()), "clicks_without_estimate": 0}

    t, d, _ = q_frame_events(stream, schedule)
    diag["q_frame_clicks"] = int(t.size)
    c0 = np.zeros(len(slots), np.int64)
    c1 = np.zeros(len(slots), np.int64)
    if t.size and len(slots):
        idx = _nearest(slots.time_ps, t)
        inside = 2 * np.abs(t - slots.time_ps[idx]) <= gate_ps
        diag["gated_out"] = int((~inside).sum())
        diag["clicks_without_estimate"] = int((inside & ~slot_ok[idx]).sum())
        use = inside & slot_ok[idx]
        c0 = np.bincount(idx[use & (d == 0)], minlength=len(slots))
        c1 = np.bincount(idx[use & (d == 1)], minlength=len(slots))
    one = (c0 > 0) ^ (c1 > 0)
    diag["two_detector_slots"] = int(((c0 > 0) & (c1 > 0)).sum())
    det = np.where(c0 > 0, 0, 1)

    lab = slots.labels()
    sent_n = np.bincount(lab[slot_ok], minlength=len(DETECTED_LABELS))
    det_n = np.bincount(lab[slot_ok & one], minlength=len(DETECTED_LABELS))
    sent = {L: float(sent_n[i]) for i, L in enumerate(DETECTED_LABELS)}
    detected = {L: float(det_n[i]) for i, L in enumerate(DETECTED_LABELS)}

    # decoy-decoy post-selection with the recovered reference
    xx = slot_ok & (lab == DETECTED_LABELS.index("XXxx"))
    ix = np.flatnonzero(xx)
    psi = -_phase_from_arrays(slots.time_ps[ix], slot_frame[ix], nu, phi0, tref)
    ta, tb = slots.theta("a")[ix], slots.theta("b")[ix]
    matched = xx_postselect(ta, tb, psi, lam)
    expected = np.where(np.cos(ta - tb - psi) > 0, 0, 1)
    hit = one[ix] & matched
    n_x = int(matched.sum())
    x_matched = int(hit.sum())
    x_correct = int((hit & (det[ix] == expected)).sum())

    # raw Z key: Alice's bit is 1 when she sends, Bob's bit is 0 when he sends
    zz = np.flatnonzero(slot_ok & one & (slots.a_window == 0) & (slots.b_window == 0))
    alice = (slots.a_source[zz] == 2).astype(np.int8)
    bob = (slots.b_source[zz] != 2).astype(np.int8)
    n_t = int(zz.size)
    qber = float((alice != bob).sum() / n_t) if n_t else 0.0
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(99,))))
    n_g, n_odd, survived, errors = _aopp_tally(alice, bob, rng)

    return CountTable(
        n_total=float(slot_ok.sum()), detected=detected, x_matched=x_matched, x_matched_correct=x_correct,
        n_t=n_t, qber_z=qber, n_t_after=survived, qber_after=errors / survived if survived else 0.0,
        n_g=n_g, n_odd=n_odd, sent=sent, n_x_sent=n_x, diagnostics=diag,
    )
