import csv

import pytest

from tfqkd.cli import EXIT_INVALID, EXIT_NO_KEY, main

SMALL = ["--set", "run.n_frames=40", "--set", "rate_profile.q_rate_mcps=8", "--seed", "7"]


def pipeline(d, encoded=False):
    d.mkdir()
    extra = ["--encoded", "--set", "sns.loss_db=20"] if encoded else []
    assert main(["simulate", *SMALL, *extra, "--out-dir", str(d)]) == 0
    assert main(["recover", *SMALL, str(d / "run.ttag"), "--out-dir", str(d)]) == 0
    slots = ["--slots", str(d / "slots.npz")] if encoded else []
    assert main(["sift", *SMALL, str(d / "run.ttag"), str(d / "estimates.csv"), *slots, "--out-dir", str(d)]) == 0
    return sorted(p for p in d.iterdir())


def test_pipeline_is_byte_deterministic(tmp_path):
    a = pipeline(tmp_path / "a")
    b = pipeline(tmp_path / "b")
    assert [p.name for p in a] == ["config.ini", "er.csv", "estimates.csv", "run.ttag"]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes(), pa.name
    rows = {r[0]: r[1] for r in csv.reader(l for l in (tmp_path / "a/er.csv").read_text().splitlines()
                                            if not l.startswith("#"))}
    assert 0 < float(rows["er"]) < 0.5


def test_encoded_pipeline_to_keyrate(tmp_path):
    files = pipeline(tmp_path / "enc", encoded=True)
    assert "counts.csv" in [p.name for p in files]
    code = main(["keyrate", *SMALL, str(tmp_path / "enc/counts.csv"), "--out-dir", str(tmp_path / "enc")])
    # forty frames are far too few for a finite-size key
    assert code == EXIT_NO_KEY
    assert "no_key_stage" in (tmp_path / "enc/keyrate.txt").read_text()


def test_invalid_inputs_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nbogus = 1\n")
    assert main(["simulate", "--config", str(bad), "--out-dir", str(tmp_path)]) == EXIT_INVALID
    assert main(["simulate", "--set", "run.n_frames=abc", "--out-dir", str(tmp_path)]) == EXIT_INVALID
    assert main(["simulate", "--set", "nosuch", "--out-dir", str(tmp_path)]) == EXIT_INVALID
    junk = tmp_path / "junk.ttag"
    junk.write_bytes(b"not a file")
    assert main(["recover", str(junk), "--out-dir", str(tmp_path)]) == EXIT_INVALID
    assert main(["recover", str(tmp_path / "missing.ttag"), "--out-dir", str(tmp_path)]) == EXIT_INVALID
    assert "tfqkd: error:" in capsys.readouterr().err


def test_replay_paper(tmp_path):
    assert main(["replay-paper", "--out-dir", str(tmp_path)]) == 0
    lines = [l for l in (tmp_path / "replay_paper.csv").read_text().splitlines() if not l.startswith("#")]
    rows = list(csv.DictReader(lines))
    assert [int(r["distance_km"]) for r in rows] == [50, 202, 302, 380, 504]
    for r in rows:
        assert 0.5 < float(r["ratio"]) < 2.0


def test_scenario_command(tmp_path, capsys):
    assert main(["scenario", "linewidth-scan", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "linewidth-scan_er_vs_linewidth.csv").exists()
    assert "slice_floor" in capsys.readouterr().out


def test_missing_command_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
