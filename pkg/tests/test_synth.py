import math

import numpy as np
import pytest
from scipy.signal import welch

from tfqkd.channel import ChannelModel
from tfqkd.noise_model import FrameSchedule, LinkNoise, PsdModel
from tfqkd.refdata import load_decoy_params
from tfqkd.synth import (
    BeatCarrier, PhaseNoiseSampler, RateProfile, beat_probability, q_frame_pulse_tags, simulate_encoded_run,
    simulate_run, substream, synthesize_trajectory,
)

SCHED = FrameSchedule(4.9152e-6, 1.6384e-6)
CARRIER = BeatCarrier(80e6)


def test_beat_probability():
    for phi, p in ((0.0, 1.0), (math.pi, 0.0), (math.pi / 2, 0.5)):
        p0, p1 = beat_probability(phi)
        assert p0 == pytest.approx(p, abs=1e-15) and p0 + p1 == pytest.approx(1.0)


def test_substreams_are_independent_and_reproducible():
    a = substream(5, "arrivals").random(4)
    assert np.array_equal(a, substream(5, "arrivals").random(4))
    assert not np.array_equal(a, substream(5, "detector").random(4))
    assert not np.array_equal(a, substream(6, "arrivals").random(4))


def test_zero_psd_trajectory():
    tr = synthesize_trajectory(PsdModel.zero(), 1e-5, 1e-8, seed=1)
    assert not np.any(tr.samples)


def test_trajectory_white_fm_increment_variance():
    dnu, tau, dt = 5e3, 1e-6, 10e-9
    lag = int(round(tau / dt))
    incs = []
    for seed in range(10):
        x = synthesize_trajectory(PsdModel.from_linewidth(dnu), 1e-3, dt, seed).samples
        incs.append(x[lag::lag] - x[:-lag:lag][: x[lag::lag].size])
    inc = np.concatenate(incs)
    target = 2 * math.pi * dnu * tau
    se = target * math.sqrt(2 / inc.size)
    assert abs(inc.var() - target) < 3 * se + 0.01 * target


def test_trajectory_periodogram_matches_psd():
    psd = PsdModel.tabulated([(1e3, 1e-8), (1e7, 1e-16)])
    dt = 10e-9
    xs = [synthesize_trajectory(psd, 2e-3, dt, seed).samples for seed in range(4)]
    f, pxx = welch(np.array(xs), fs=1 / dt, nperseg=1 << 14, axis=-1)
    pxx = pxx.mean(axis=0)
    band = (f > 2e4) & (f < 5e6)
    ratio = pxx[band] / psd(f[band])
    assert np.median(ratio) == pytest.approx(1.0, rel=0.1)


def test_same_seed_same_trajectory():
    a = synthesize_trajectory(PsdModel.from_linewidth(1e3), 1e-4, 1e-8, 9).samples
    b = synthesize_trajectory(PsdModel.from_linewidth(1e3), 1e-4, 1e-8, 9).samples
    assert np.array_equal(a, b)


def test_brownian_sampler_variance():
    noise = LinkNoise.white_lasers(5.9e3, 2.4e3)
    t = np.arange(1, 20001, dtype=np.int64) * 1_000_000  # 1 us steps
    x = PhaseNoiseSampler(noise, 0.03, seed=4).sample(t)
    target = 2 * math.pi * (5.9e3 + 2.4e3) * 1e-6
    d = np.diff(x)
    assert abs(d.var() - target) < 3 * target * math.sqrt(2 / d.size)


def test_no_rates_no_events():
    s = simulate_run(CARRIER, LinkNoise(), SCHED, RateProfile(0.0), n_frames=10)
    assert len(s) == 0


def test_poisson_r_frame_counts():
    s = simulate_run(CARRIER, LinkNoise(), SCHED, RateProfile(24e6), n_frames=400, seed=2)
    counts = np.array([s.window(*SCHED.r_frame_ps(k))[0].size for k in range(401)])
    mean = 2 * 24e6 * 4.9152e-6
    assert mean == pytest.approx(235.9, abs=0.1)
    assert abs(counts.mean() - mean) < 3 * math.sqrt(mean / counts.size)
    assert counts.var() == pytest.approx(mean, rel=0.2)


def test_doubling_rate_doubles_counts():
    n1 = len(simulate_run(CARRIER, LinkNoise(), SCHED, RateProfile(8e6), n_frames=200, seed=3))
    n2 = len(simulate_run(CARRIER, LinkNoise(), SCHED, RateProfile(16e6), n_frames=200, seed=3))
    mean1 = 2 * 8e6 * 4.9152e-6 * 201
    assert abs(n1 - mean1) < 4 * math.sqrt(mean1)
    assert abs(n2 - 2 * mean1) < 4 * math.sqrt(2 * mean1)


def test_frozen_phase_lands_on_d0():
    frozen = BeatCarrier(0.0, band=(0.0, 1.0))
    s = simulate_run(frozen, LinkNoise(), SCHED, RateProfile(24e6, 24e6), n_frames=20, seed=1)
    assert len(s) > 0 and not np.any(s.detectors)


def test_dark_counts_split_evenly():
    s = simulate_run(CARRIER, LinkNoise(), SCHED, RateProfile(0.0, 0.0, 1e7), n_frames=500, seed=1)
    d = s.detectors
    assert abs(d.mean() - 0.5) < 4 * 0.5 / math.sqrt(d.size)


def test_determinism_and_layout():
    noise = LinkNoise.white_lasers(5.9e3, 2.4e3)
    a = simulate_run(CARRIER, noise, SCHED, RateProfile(24e6), n_frames=50, seed=11)
    b = simulate_run(CARRIER, noise, SCHED, RateProfile(24e6), n_frames=50, seed=11)
    c = simulate_run(CARRIER, noise, SCHED, RateProfile(24e6), n_frames=50, seed=12)
    assert np.array_equal(a.times_ps, b.times_ps) and np.array_equal(a.detectors, b.detectors)
    assert not np.array_equal(a.times_ps, c.times_ps)
    assert a.n_frames == 50
    # no light in Q-frames when q_rate is 0; run ends with the closing R-frame
    off = a.times_ps % SCHED.period_ps
    assert np.all(off < SCHED.r_frame_ps(0)[1])
    assert a.times_ps.max() < 50 * SCHED.period_ps + SCHED.r_frame_ps(0)[1]


def test_event_cap():
    with pytest.raises(ValueError, match="exceeds"):
        simulate_run(CARRIER, LinkNoise(), SCHED, RateProfile(24e6), n_frames=100, max_events=1000)


def test_pulse_tags():
    tags = q_frame_pulse_tags(SCHED, 1.6e-9)
    q0, q1 = SCHED.q_frame_ps(0)
    assert tags.size == 1024
    assert np.all((tags > q0) & (tags < q1))
    assert np.all(np.diff(tags) == 1600)
    one = q_frame_pulse_tags(SCHED, SCHED.t_q)
    assert one.size == 1 and one[0] == (q0 + q1) // 2
    with pytest.raises(ValueError):
        q_frame_pulse_tags(SCHED, 1.7e-9)


def test_encoded_run_window_statistics():
    p = load_decoy_params(202)
    run = simulate_encoded_run(CARRIER, LinkNoise(), SCHED, RateProfile(24e6), p, ChannelModel(10.0),
                               n_frames=200, seed=5)
    s = run.slots
    assert len(s) == 200 * 1024
    n = len(s)
    zy = np.mean((s.a_window == 0) & (s.a_source == 2))
    assert abs(zy - p.p_z * p.epsilon) < 4 * math.sqrt(p.p_z * p.epsilon / n)
    xx = np.mean(s.b_window == 1)
    assert abs(xx - (1 - p.p_z)) < 4 * math.sqrt((1 - p.p_z) / n)
    # signal clicks sit exactly on slot times
    t = run.stream.times_ps
    off = t % SCHED.period_ps
    q = (off >= SCHED.q_frame_ps(0)[0]) & (off < SCHED.q_frame_ps(0)[1])
    assert np.all(np.isin(t[q], s.time_ps))
    assert q.sum() == run.extra["signal_clicks"]
