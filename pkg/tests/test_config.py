import math

import pytest

from tfqkd.config import SCHEMA, ConfigError, RunConfig, build_objects


def test_defaults_documented_and_buildable():
    for sec, keys in SCHEMA.items():
        for key, (kind, default, doc) in keys.items():
            assert doc, f"[{sec}] {key} lacks a description"
    build_objects(RunConfig())


def test_unknown_keys_and_sections_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        RunConfig.from_text("[run]\nseeed = 3\n")
    with pytest.raises(ConfigError, match="unknown section"):
        RunConfig.from_text("[runs]\nseed = 3\n")
    with pytest.raises(ConfigError):
        RunConfig.from_text("[run]\nseed = three\n")


def test_text_round_trip_and_digest():
    cfg = RunConfig.from_text("[run]\nseed = 7\n[carrier]\nnu_mhz = 123.45\n")
    again = RunConfig.from_text(cfg.to_text())
    assert again.to_text() == cfg.to_text()
    assert again.digest == cfg.digest
    assert cfg.digest != RunConfig().digest
    assert cfg.carrier().nu == pytest.approx(123.45e6)
    assert cfg.provenance()[1] == f"config_sha256 = {cfg.digest}"


def test_units_are_converted():
    cfg = RunConfig()
    s = cfg.schedule()
    assert s.t_r == pytest.approx(4.9152e-6) and s.t_q == pytest.approx(1.6384e-6)
    assert cfg.rates().r_rate == pytest.approx(24e6)
    assert cfg.recovery().bin_width == pytest.approx(100e-12)
    assert cfg.slice().accept_halfwidth == pytest.approx(math.pi / 16)
    assert cfg.slots_per_second() == pytest.approx(1.25e9 * s.duty_cycle)


def test_builtin_fiber_tables():
    cfg = RunConfig().with_overrides(link_noise={"fiber_a_psd": "builtin:302km", "fiber_b_psd": "builtin:504km"})
    n = cfg.noise()
    assert not n.fiber_a.is_zero and not n.fiber_b.is_zero
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(link_noise={"fiber_a_psd": "/nonexistent"}).noise()


def test_invalid_values_fail_early():
    cfg = RunConfig().with_overrides(frame_schedule={"t_r_us": -1.0})
    with pytest.raises(ConfigError):
        build_objects(cfg)
