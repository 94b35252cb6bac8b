"""Expected detection counts of a symmetric SNS link (forward model).

Each party's pulse reaches the measurement node with amplitude transmittance
``sqrt(eta)``. For a phase difference ``delta`` the two detectors see mean
photon numbers ``(m_a + m_b +/- 2 sqrt(m_a m_b) cos delta) / 2`` and click
with probability ``1 - (1 - p_d) exp(-m)``. Only one-detector events count.
Windows with independent random phases average over ``delta``; matched
decoy-decoy pairs average over the post-selected band ``|delta| <= w``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import i0e

from .keyrate import DETECTED_LABELS, CountTable, DecoyParams

FIBER_LOSS_DB_PER_KM = 0.19


@dataclass(frozen=True)
class ChannelModel:
    """Symmetric link seen by the measurement node.

    ``loss_db`` is the total fiber loss of both arms (each arm carries half),
    ``dark_prob`` the per-detector noise-click probability inside one gate
    and ``misalignment`` the fraction of interference events that land on
    the wrong detector (residual phase error of the reference).
    """

    loss_db: float
    eta_det: float = 0.70
    insertion_loss_db: float = 1.5
    dark_prob: float = 2e-7
    misalignment: float = 0.03
    postselect_halfwidth: float = math.pi / 16

    def __post_init__(self):
        if self.loss_db < 0 or self.insertion_loss_db < 0:
            raise ValueError("losses must be >= 0 dB")
        if not (0 < self.eta_det <= 1):
            raise ValueError("eta_det must lie in (0, 1]")
        if not (0 <= self.dark_prob < 1) or not (0 <= self.misalignment <= 0.5):
            raise ValueError("dark_prob in [0, 1) and misalignment in [0, 0.5] required")
        if not (0 < self.postselect_halfwidth <= math.pi / 2):
            raise ValueError("postselect_halfwidth must lie in (0, pi/2]")

    @classmethod
    def from_distance(cls, distance_km: float, **kw) -> "ChannelModel":
        return cls(loss_db=FIBER_LOSS_DB_PER_KM * distance_km, **kw)

    @property
    def eta(self) -> float:
        """Per-arm transmittance including detection efficiency."""
        return 10.0 ** (-(self.loss_db / 2 + self.insertion_loss_db) / 10.0) * self.eta_det

    @property
    def match_fraction(self) -> float:
        return 2.0 * self.postselect_halfwidth / math.pi


def one_detector_yield(mu_a: float, mu_b: float, ch: ChannelModel) -> float:
    """One-detector click probability for independent, uniformly random phases."""
    ma, mb = ch.eta * mu_a, ch.eta * mu_b
    keep = 1.0 - ch.dark_prob
    # <exp(-m_1)> over delta is exp(-m/2) I0(sqrt(ma mb)); i0e absorbs the growth
    x = math.sqrt(ma * mb)
    avg = math.exp(-(ma + mb) / 2 + x) * i0e(x)
    return 2 * keep * avg - 2 * keep**2 * math.exp(-(ma + mb))


def matched_probs(mu_a: float, mu_b: float, ch: ChannelModel, nodes: int = 32) -> tuple[float, float]:
    """(correct, error) one-detector probabilities for post-selected pairs."""
    w = ch.postselect_halfwidth
    x, wt = np.polynomial.legendre.leggauss(nodes)
    delta = w * x
    ma, mb = ch.eta * mu_a, ch.eta * mu_b
    keep = 1.0 - ch.dark_prob
    cross = 2 * math.sqrt(ma * mb) * np.cos(delta)
    m0 = (ma + mb + cross) / 2
    m1 = (ma + mb - cross) / 2
    both_dark = keep**2 * math.exp(-(ma + mb))
    good = float(np.dot(wt, keep * np.exp(-m1) - both_dark)) / 2
    bad = float(np.dot(wt, keep * np.exp(-m0) - both_dark)) / 2
    e = ch.misalignment
    return (1 - e) * good + e * bad, e * good + (1 - e) * bad


def true_phase_error(params: DecoyParams, ch: ChannelModel) -> float:
    """Phase-flip error rate of single-photon states in matched decoy windows."""
    e, pd, eta, w = ch.misalignment, ch.dark_prob, ch.eta, ch.postselect_halfwidth
    # <(1 - cos delta)/2> over |delta| <= w
    flip = 0.5 * (1 - math.sin(w) / w)
    err = eta * (1 - pd) * ((1 - e) * flip + e * (1 - flip)) + (1 - eta) * pd * (1 - pd)
    yld = eta * (1 - pd) + (1 - eta) * 2 * pd * (1 - pd)
    return err / yld


def expected_count_table(params: DecoyParams, ch: ChannelModel) -> CountTable:
    """Count table holding expectation values for ``params.n_total`` pulse pairs."""
    mu = {"y": params.mu_y, "x": params.mu_x, "o": params.mu_o}
    sent = params.expected_sent()
    detected = {lab: sent[lab] * one_detector_yield(mu[lab[2]], mu[lab[3]], ch) for lab in DETECTED_LABELS}

    n_x = sent["XXxx"] * ch.match_fraction
    good, bad = matched_probs(params.mu_x, params.mu_x, ch)
    x_matched = n_x * (good + bad)
    x_correct = n_x * good

    zz = {k: detected["ZZ" + k] for k in ("yy", "yo", "oy", "oo")}
    n_t = sum(zz.values())
    qber = (zz["yy"] + zz["oo"]) / n_t if n_t > 0 else 0.0
    b0, b1 = zz["yy"] + zz["oy"], zz["yo"] + zz["oo"]
    if b0 > 0 and b1 > 0:
        n_g = min(b0, b1)
        n_odd = n_t * (b0 / n_t) * (b1 / n_t)
        keep_ok = zz["oy"] / b0 * zz["yo"] / b1
        keep_bad = zz["yy"] / b0 * zz["oo"] / b1
        n_after = n_g * (keep_ok + keep_bad)
        e_after = keep_bad / (keep_ok + keep_bad)
    else:
        n_g = n_odd = n_after = e_after = 0.0
    return CountTable(
        n_total=params.n_total, detected=detected, x_matched=x_matched, x_matched_correct=x_correct,
        n_t=n_t, qber_z=qber, n_t_after=n_after, qber_after=e_after,
        n_g=n_g, n_odd=n_odd, sent=sent, n_x_sent=n_x,
    )
