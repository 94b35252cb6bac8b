import pytest

from tfqkd.keyrate import DETECTED_LABELS
from tfqkd.refdata import (
    DISTANCES_KM, load_count_tables, load_decoy_params, load_errata, load_frame_table, replay, reported_results,
)

REPORTED_R = {50: 1.35e-3, 202: 2.15e-5, 302: 1.18e-6, 380: 1.25e-7, 504: 6.56e-9}


def test_bundled_tables_load():
    tables = load_count_tables()
    assert sorted(tables) == list(DISTANCES_KM)
    for t in tables.values():
        assert set(t.detected) == set(DETECTED_LABELS)
        assert t.n_t > t.n_t_after > 0
    assert {d: r["R"] for d, r in reported_results().items()} == REPORTED_R


def test_errata_only_touch_listed_rows():
    fixed, raw = load_count_tables(), load_count_tables(apply_errata=False)
    changed = {(d, lab) for d in DISTANCES_KM for lab in DETECTED_LABELS
               if fixed[d].detected[lab] != raw[d].detected[lab]}
    listed = {(d, lab) for d, a, b in load_errata() for lab in (a[len("Detected-"):], b[len("Detected-"):])}
    assert changed <= listed
    assert changed


def test_parameters_and_frames():
    p = load_decoy_params(504)
    assert p.n_total == load_count_tables()[504].n_total
    frames = load_frame_table()
    assert set(frames) == set(DISTANCES_KM)
    assert all(0 < f.schedule.duty_cycle < 1 for f in frames.values())


def test_replay_within_factor_two_and_ordered():
    rows = replay()
    for r in rows:
        assert 0.5 <= r.ratio <= 2.0, r.distance_km
        assert r.report.K == pytest.approx(r.report.R * r.slots_per_second)
        # the implied pulse clock is the same at every distance
        assert r.slot_clock_hz == pytest.approx(1.25e9, rel=0.02)
    rates = [r.report.R for r in rows]
    assert rates == sorted(rates, reverse=True)
