import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tfqkd.noise_model import (
    FiberPathModel, FrameSchedule, LinkNoise, PsdBandWarning, PsdModel, SliceConfig, instantaneous_er,
    linewidth_from_white, max_linewidth_for_er, mean_er_over_qframe, phase_diff_variance, psd_eval,
    read_psd_table_text, reference_phase_estimate_variance, residual_variance_generic, structure_function,
)


def test_white_density_from_linewidth():
    assert psd_eval(PsdModel.from_linewidth(5.9e3), 1e3) == pytest.approx(5.9e3 / math.pi)
    assert psd_eval(PsdModel.from_linewidth(5.9e3), 1e3) == pytest.approx(1878, rel=1e-3)


def test_sum_is_sum_of_children():
    w = PsdModel.white(123.0)
    assert psd_eval(PsdModel.sum_of(w, w), 1e3) == pytest.approx(246.0)


def test_tabulated_loglog_midpoint():
    m = PsdModel.tabulated([(1e2, 1e-2), (1e4, 1e-6)])
    assert psd_eval(m, 1e3) == pytest.approx(1e-4, rel=1e-12)


def test_out_of_band_is_clamped_with_warning():
    m = PsdModel.tabulated([(1e2, 1e-2), (1e4, 1e-6)])
    with pytest.warns(PsdBandWarning):
        assert psd_eval(m, 1e5) == pytest.approx(1e-6)


@pytest.mark.parametrize("pts", [[(1e2, 1.0)], [(1e3, 1.0), (1e2, 1.0)], [(1e2, -1.0), (1e3, 1.0)]])
def test_bad_tables_rejected(pts):
    with pytest.raises(ValueError):
        PsdModel.tabulated(pts)


def test_psd_text_parser():
    rows = read_psd_table_text("# f S\n10, 1e-3\n100 1e-5  # tail\n\n")
    assert rows == [(10.0, 1e-3), (100.0, 1e-5)]
    with pytest.raises(ValueError):
        read_psd_table_text("1 2 3")


@pytest.mark.parametrize("h_w, lw", [(0.0, 0.0), (5000 / math.pi, 5e3), (1878.0, 5.9e3)])
def test_linewidth_from_white(h_w, lw):
    assert linewidth_from_white(h_w) == pytest.approx(lw, rel=1e-3, abs=1e-12)


@pytest.mark.parametrize("tau", [1e-8, 1e-7, 1e-6, 1e-5, 1e-4])
def test_white_structure_function_closed_form(tau):
    # one side: 4 pi^2 tau^2 * int h sinc^2 = 2 pi^2 h tau = 2 pi dnu tau
    noise = LinkNoise(laser_a=PsdModel.from_linewidth(5e3))
    assert phase_diff_variance(noise, tau) == pytest.approx(2 * math.pi * 5e3 * tau, rel=1e-4)


def test_zero_noise_and_additivity():
    assert phase_diff_variance(LinkNoise(), 1e-6) == 0.0
    one = LinkNoise(laser_a=PsdModel.from_linewidth(5e3))
    both = LinkNoise.white_lasers(5e3)
    assert phase_diff_variance(both, 1e-6) == pytest.approx(2 * phase_diff_variance(one, 1e-6), rel=1e-12)


def test_fiber_path_is_nondecreasing_and_zero_at_zero():
    fib = FiberPathModel(psd=PsdModel.tabulated([(1.0, 1e-2), (1e3, 1e-8), (1e6, 1e-14)]))
    assert fib.phase_variance(0.0) == 0.0
    taus = np.logspace(-8, -4, 9)
    vals = [fib.phase_variance(t) for t in taus]
    assert all(v >= 0 for v in vals)
    assert np.all(np.diff(vals) >= -1e-15)
    # sigma_L^2 and the phase term are the same quantity in different units
    t = 1e-5
    assert fib.sigma_l2(t) * 4 * math.pi**2 * fib.nu0**2 / 299_792_458.0**2 == pytest.approx(fib.phase_variance(t))


def test_tabulated_phase_structure_function_quadrature():
    # flat phase PSD S on [a, b]: D(tau) = 2 S [ (b - a) - (sin 2 pi b tau - sin 2 pi a tau) / (2 pi tau) ]
    S, a, b, tau = 1e-9, 10.0, 1e5, 3e-6
    m = PsdModel.tabulated([(a, S), (b, S)])
    exact = 2 * S * ((b - a) - (math.sin(2 * math.pi * b * tau) - math.sin(2 * math.pi * a * tau)) / (2 * math.pi * tau))
    assert structure_function(m, tau) == pytest.approx(exact, rel=1e-5)


SCHED = FrameSchedule(5e-6, 1e-6)


def test_residual_variance_zero_noise_and_symmetry():
    assert reference_phase_estimate_variance(LinkNoise(), SCHED, 0.0) == 0.0
    noise = LinkNoise.white_lasers(10e3)
    a, b = reference_phase_estimate_variance(noise, SCHED, np.array([0.3e-6, -0.3e-6]))
    assert a == pytest.approx(b, rel=1e-10)


def test_residual_variance_flat_for_brownian_phase():
    # D linear in the lag: the two R-frame terms trade off exactly across the Q-frame
    noise = LinkNoise.white_lasers(10e3)
    v = reference_phase_estimate_variance(noise, SCHED, np.linspace(-0.5e-6, 0.5e-6, 11))
    assert np.ptp(v) < 1e-9 * v.mean()
    assert v.max() <= phase_diff_variance(noise, SCHED.t_q / 2 + SCHED.t_r)


def test_residual_variance_interior_minimum_for_colored_noise():
    # f^-3 phase noise (flicker frequency noise): superlinear structure function
    fib = FiberPathModel(psd=PsdModel.tabulated([(1e2, 1e-2), (1e5, 1e-11)]))
    noise = LinkNoise(fiber_a=fib)
    t = np.linspace(-0.5e-6, 0.5e-6, 11)
    v = reference_phase_estimate_variance(noise, SCHED, t)
    assert v[5] < v[0] and v[5] < v[-1]
    assert v.max() <= phase_diff_variance(noise, SCHED.t_q / 2 + SCHED.t_r)


def test_residual_variance_matches_slow_reference():
    noise = LinkNoise.white_lasers(5e3)
    g = SCHED.gap / 2
    slow = residual_variance_generic(noise, 0.2e-6, [(-g - SCHED.t_r, -g), (g, g + SCHED.t_r)])
    assert reference_phase_estimate_variance(noise, SCHED, 0.2e-6) == pytest.approx(slow, rel=1e-4)


def test_duplexing_beats_single_frame():
    noise = LinkNoise.white_lasers(5e3)
    g = SCHED.gap / 2
    single = residual_variance_generic(noise, 0.0, [(-g - SCHED.t_r, -g)])
    assert reference_phase_estimate_variance(noise, SCHED, 0.0) <= single


def test_residual_variance_monte_carlo_oracle():
    # Brownian phase difference sampled on a grid; reference = mean over both R-frames
    rng = np.random.default_rng(7)
    h = 2 * 5e3 / math.pi          # two 5 kHz lasers
    dt = 0.1e-6
    n_r, n_q = 50, 10               # 5 us R-frames, 1 us Q-frame
    n = 2 * n_r + n_q
    trials = 20000
    steps = rng.normal(0.0, math.sqrt(2 * math.pi**2 * h * dt), size=(trials, n))
    phase = np.cumsum(steps, axis=1)
    # sample at bin midpoints: half a step back from each cumulative point
    mid = phase - 0.5 * steps
    ref = np.concatenate([mid[:, :n_r], mid[:, n_r + n_q:]], axis=1).mean(axis=1)
    # Q-frame centre lies at the boundary between Q bins 4 and 5
    centre = phase[:, n_r + n_q // 2 - 1]
    err2 = (centre - ref) ** 2
    mc, se = err2.mean(), err2.std() / math.sqrt(trials)
    analytic = reference_phase_estimate_variance(LinkNoise.white_lasers(5e3), SCHED, 0.0)
    assert abs(mc - analytic) < 3 * se + 0.01 * analytic


def test_instantaneous_er_closed_forms():
    w = math.pi / 16
    assert instantaneous_er(0.0, SliceConfig()) == pytest.approx((1 - (16 / math.pi) * math.sin(w)) / 2, rel=1e-12)
    assert instantaneous_er(0.0, SliceConfig()) == pytest.approx(0.00321, abs=1e-5)
    assert instantaneous_er(0.0, SliceConfig.integration_window()) == pytest.approx(0.01275, abs=2e-5)
    assert instantaneous_er(1e6, SliceConfig()) == pytest.approx(0.5)


@given(st.floats(0, 50), st.floats(0, 50))
def test_instantaneous_er_monotone_and_bounded(v1, v2):
    sl = SliceConfig()
    lo, hi = sorted((v1, v2))
    a, b = instantaneous_er(lo, sl), instantaneous_er(hi, sl)
    assert sl.floor - 1e-15 <= a <= b + 1e-15 <= 0.5 + 1e-15


def test_mean_er_floor_and_anchor():
    sl = SliceConfig()
    assert mean_er_over_qframe(LinkNoise(), SCHED, sl) == pytest.approx(sl.floor)
    er = mean_er_over_qframe(LinkNoise.white_lasers(35.5e3), SCHED, sl)
    assert er == pytest.approx(0.11, abs=0.02)


def test_mean_er_monotone_in_linewidth():
    sl = SliceConfig()
    ers = [mean_er_over_qframe(LinkNoise.white_lasers(lw), SCHED, sl) for lw in (1e3, 5e3, 20e3, 50e3)]
    assert np.all(np.diff(ers) > 0)


def test_max_linewidth_inverse():
    sl = SliceConfig()
    lw = max_linewidth_for_er(0.11, SCHED, sl)
    assert lw == pytest.approx(35.5e3, rel=0.15)
    assert mean_er_over_qframe(LinkNoise.white_lasers(lw), SCHED, sl) == pytest.approx(0.11, rel=1e-3)
    assert max_linewidth_for_er(0.05, SCHED, sl) < lw < max_linewidth_for_er(0.2, SCHED, sl)
    assert max_linewidth_for_er(sl.floor + 1e-9, SCHED, sl) < 1.0
    with pytest.raises(ValueError):
        max_linewidth_for_er(0.001, SCHED, sl)


def test_frame_schedule_layout():
    s = FrameSchedule(4.9152e-6, 1.6384e-6, 0.1e-6)
    assert s.period_ps == 4915200 + 1638400 + 200000
    assert s.r_frame_ps(2) == (2 * s.period_ps, 2 * s.period_ps + 4915200)
    q0, q1 = s.q_frame_ps(0)
    assert q0 == 4915200 + 100000 and q1 - q0 == 1638400
    assert s.duty_cycle == pytest.approx(1.6384 / (4.9152 + 1.6384 + 0.2))
    with pytest.raises(ValueError):
        FrameSchedule(0.0, 1e-6)


def test_no_warnings_on_normal_use():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        mean_er_over_qframe(LinkNoise.white_lasers(5e3), SCHED, SliceConfig())
