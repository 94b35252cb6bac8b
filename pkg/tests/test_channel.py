import math

import pytest
from scipy import integrate

from tfqkd.channel import ChannelModel, expected_count_table, matched_probs, one_detector_yield, true_phase_error
from tfqkd.refdata import load_decoy_params

CH = ChannelModel(40.0, dark_prob=1e-6)


def _one_click(ma, mb, delta, pd):
    m0 = (ma + mb + 2 * math.sqrt(ma * mb) * math.cos(delta)) / 2
    m1 = ma + mb - m0
    c0 = 1 - (1 - pd) * math.exp(-m0)
    c1 = 1 - (1 - pd) * math.exp(-m1)
    return c0 * (1 - c1) + c1 * (1 - c0)


def test_transmittance():
    assert CH.eta == pytest.approx(10 ** (-(20 + 1.5) / 10) * 0.7)
    assert ChannelModel.from_distance(100).loss_db == pytest.approx(19.0)


@pytest.mark.parametrize("mu_a, mu_b", [(0.5, 0.0), (0.5, 0.05), (0.05, 0.05), (0.0, 0.0)])
def test_random_phase_yield_against_quadrature(mu_a, mu_b):
    ma, mb = CH.eta * mu_a, CH.eta * mu_b
    ref = integrate.quad(lambda d: _one_click(ma, mb, d, CH.dark_prob), 0, 2 * math.pi)[0] / (2 * math.pi)
    assert one_detector_yield(mu_a, mu_b, CH) == pytest.approx(ref, rel=1e-9, abs=1e-18)


def test_matched_probs_against_quadrature():
    ch = ChannelModel(10.0, misalignment=0.0)
    w, m = ch.postselect_halfwidth, ch.eta * 0.05
    pd = ch.dark_prob

    def right(d):
        m1 = m * (1 - math.cos(d))
        m0 = 2 * m - m1
        return (1 - pd) * math.exp(-m1) * (1 - (1 - pd) * math.exp(-m0))

    ref = integrate.quad(right, -w, w)[0] / (2 * w)
    good, bad = matched_probs(0.05, 0.05, ch)
    assert good == pytest.approx(ref, rel=1e-9)
    assert bad < good


def test_true_phase_error_limits():
    p = load_decoy_params(202)
    assert true_phase_error(p, ChannelModel(0.0, misalignment=0.0, dark_prob=0.0)) == pytest.approx(
        0.5 * (1 - math.sin(math.pi / 16) / (math.pi / 16)))
    # noise-dominated link: phase error tends to 1/2
    assert true_phase_error(p, ChannelModel(200.0, dark_prob=1e-3)) == pytest.approx(0.5, abs=1e-3)


def test_expected_table_is_consistent():
    p = load_decoy_params(202)
    t = expected_count_table(p, ChannelModel.from_distance(202))
    assert t.n_t == pytest.approx(sum(t.detected["ZZ" + k] for k in ("yy", "yo", "oy", "oo")))
    assert 0 < t.n_odd <= t.n_g <= t.n_t
    assert 0 < t.qber_after < t.qber_z < 0.5
    assert t.n_x_sent == pytest.approx(t.sent["XXxx"] / 8)
