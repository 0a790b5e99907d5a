import json
import subprocess
import sys
from pathlib import Path

import pytest

from sivsim import cli, io
from sivsim import config as C

SEEDED = ["simulate-pl", "simulate-ple", "lifetime", "saturation", "stream", "g2",
          "overlap", "ensemble"]


def write_cfg(path, **sections):
    cfg = {"schema_version": 1, **sections}
    path.write_text(json.dumps(cfg))
    return path


def tree(root):
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def small(tmp_path):
    return write_cfg(tmp_path / "run.json",
                     stream={"duration_s": 2e-4, "shards": 2},
                     saturation={"noise": 0.05},
                     lifetime={"counts_total": 1e5})


@pytest.mark.parametrize("command", SEEDED)
def test_commands_run_and_are_deterministic(tmp_path, small, command):
    assert cli.run(command, str(small), str(tmp_path / "a")) == 0
    assert cli.run(command, str(small), str(tmp_path / "b")) == 0
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    assert a == b and "manifest.json" in a and len(a) >= 2
    man = json.loads(a["manifest.json"])
    assert man["command"] == command and man["tool"] == "sivsim" and man["seed"] == 17
    assert man["config_sha256"] == C.config_digest(man["config"])
    assert set(man["outputs"]) == set(a) - {"manifest.json"}


def test_manifest_regenerates_outputs(tmp_path, small):
    assert cli.run("stream", str(small), str(tmp_path / "a")) == 0
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    again = tmp_path / "again.json"
    again.write_text(json.dumps(man["config"]))
    assert cli.run("stream", str(again), str(tmp_path / "b")) == 0
    man2 = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert man2["outputs"] == man["outputs"]


def test_seed_override_changes_stream(tmp_path, small):
    cli.run("stream", str(small), str(tmp_path / "a"))
    cli.run("stream", str(small), str(tmp_path / "b"), seed=99)
    assert (tmp_path / "a/photons.bin").read_bytes() != (tmp_path / "b/photons.bin").read_bytes()
    assert json.loads((tmp_path / "b/manifest.json").read_text())["seed"] == 99


def test_threads_do_not_change_results(tmp_path, small, monkeypatch):
    cli.run("g2", str(small), str(tmp_path / "a"), threads=1)
    monkeypatch.setenv("SIVSIM_THREADS", "4")
    cli.run("g2", str(small), str(tmp_path / "b"))
    assert tree(tmp_path / "a") == tree(tmp_path / "b")


def test_simulate_pl_then_fit_gives_weight_c(tmp_path):
    assert cli.run("simulate-pl", None, str(tmp_path / "pl")) == 0
    (tmp_path / "list.json").write_text(json.dumps(["pl/pl_spectrum.csv"]))
    cfg = write_cfg(tmp_path / "fit.json", fit={"manifest": "list.json"})
    assert cli.run("fit", str(cfg), str(tmp_path / "fit")) == 0
    fits = json.loads((tmp_path / "fit/fits.json").read_text())["fits"]
    assert fits[0]["source"] == "pl/pl_spectrum.csv"
    assert fits[0]["result"]["converged"]
    assert fits[0]["derived"]["line_weights"]["C"] == pytest.approx(0.71, abs=0.02)
    assert fits[0]["derived"]["ground_splitting_hz"] == pytest.approx(46.68e9, rel=1e-6)
    first = (tmp_path / "fit/fits.json").read_bytes()
    cli.run("fit", str(cfg), str(tmp_path / "fit2"))
    assert (tmp_path / "fit2/fits.json").read_bytes() == first


def test_fit_plain_text_manifest_and_lorentzian_override(tmp_path):
    cli.run("simulate-ple", None, str(tmp_path / "ple"))
    (tmp_path / "list.txt").write_text("# PLE scans\nple/ple_C.csv\nple/ple_D.csv\n")
    cfg = write_cfg(tmp_path / "fit.json", fit={"manifest": "list.txt", "lineshape": "lorentzian"})
    assert cli.run("fit", str(cfg), str(tmp_path / "out")) == 0
    fits = json.loads((tmp_path / "out/fits.json").read_text())["fits"]
    assert [f["kind"] for f in fits] == ["PLE", "PLE"]
    assert fits[0]["result"]["params"]["fwhm0"] == pytest.approx(127.3e6, rel=0.01)


def test_overlap_fixture_report(tmp_path):
    assert cli.run("overlap", None, str(tmp_path)) == 0
    rep = json.loads((tmp_path / "overlap_report.json").read_text())
    assert rep["n_records"] == 20
    assert rep["max_overlap"] >= 0.91
    assert rep["n_gaps_below_threshold"] == 11 and rep["n_gaps_below_30pct"] == 4
    assert rep["match_probability"] > 0.5
    assert (tmp_path / "overlap_pairs.csv").exists()


def test_overlap_custom_records(tmp_path):
    from sivsim.overlap import LineRecord
    io.write_line_records(tmp_path / "r.csv", [LineRecord("a", "set1", 0.0, 136e6),
                                               LineRecord("b", "set1", 6e6, 119e6)])
    cfg = write_cfg(tmp_path / "c.json", overlap={"records": "r.csv"})
    assert cli.run("overlap", str(cfg), str(tmp_path / "o")) == 0
    rep = json.loads((tmp_path / "o/overlap_report.json").read_text())
    assert rep["max_overlap"] == pytest.approx(0.996, abs=5e-4)


def test_json_format(tmp_path):
    assert cli.run("simulate-pl", None, str(tmp_path), fmt="json") == 0
    d = json.loads((tmp_path / "pl_spectrum.json").read_text())
    assert d["kind"] == "PL" and len(d["axis"]) == len(d["values"]) == 2001


def test_g2_from_stream_file(tmp_path, small):
    cli.run("stream", str(small), str(tmp_path / "s"))
    cfg = write_cfg(tmp_path / "g.json", stream={"duration_s": 2e-4},
                    g2={"stream_file": "s/photons.bin"})
    assert cli.run("g2", str(cfg), str(tmp_path / "g")) == 0
    summary = json.loads((tmp_path / "g/g2_summary.json").read_text())
    assert summary["g2_zero_bin"] < 0.5


def test_report_all_pass(tmp_path):
    assert cli.run("report", None, str(tmp_path / "a")) == 0
    acc = json.loads((tmp_path / "a/acceptance.json").read_text())
    assert acc["all_pass"], [c for c in acc["checks"] if not c["pass"]]
    for sub in cli.COMMANDS:
        if sub != "report":
            assert (tmp_path / "a" / sub / "manifest.json").exists()
    assert cli.run("report", None, str(tmp_path / "b")) == 0
    assert tree(tmp_path / "a") == tree(tmp_path / "b")


@pytest.mark.parametrize("cfg, code", [
    ({"schema_version": 1, "temperature": -4}, 1),
    ({"schema_version": 2}, 1),
    ({"temperature": 4}, 1),
    ({"schema_version": 1, "bogus": 1}, 1),
    ({"schema_version": 1, "fit": {}}, 3),
])
def test_exit_codes(tmp_path, capsys, cfg, code):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    command = "fit" if "fit" in cfg else "simulate-pl"
    assert cli.run(command, str(path), str(tmp_path / "o")) == code
    assert "error" in capsys.readouterr().err


def test_runtime_failure_is_exit_2(tmp_path, capsys):
    (tmp_path / "bad.bin").write_bytes(b"\x05" + b"\0" * 7 + b"\0" * 8)
    cfg = write_cfg(tmp_path / "c.json", g2={"stream_file": "bad.bin"})
    assert cli.run("g2", str(cfg), str(tmp_path / "o")) == 2


def test_empty_stream_is_insufficient_data(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", stream={"pump": 0.0, "duration_s": 1e-5})
    assert cli.run("g2", str(cfg), str(tmp_path / "o")) == 3


def test_unreadable_and_malformed_config(tmp_path):
    assert cli.run("simulate-pl", str(tmp_path / "missing.json"), str(tmp_path)) == 1
    (tmp_path / "x.json").write_text("{not json")
    assert cli.run("simulate-pl", str(tmp_path / "x.json"), str(tmp_path)) == 1


def test_validate(tmp_path, capsys):
    shipped = Path(cli.__file__).parent / "data" / "default_config.json"
    assert cli.main(["validate", str(shipped)]) == 0
    assert json.loads(shipped.read_text()) == C.default_config()
    neg = write_cfg(tmp_path / "neg.json", temperature=-4)
    assert cli.main(["validate", str(neg)]) != 0
    assert "/temperature" in capsys.readouterr().err
    unk = write_cfg(tmp_path / "unk.json", pl={"resolutoin_hz": 1e9})
    assert cli.main(["validate", "--config", str(unk)]) != 0
    err = capsys.readouterr().err
    assert "/pl/resolutoin_hz" in err and "resolution_hz" in err
    assert cli.main(["validate", str(tmp_path / "nope.json")]) == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "sivsim.cli", "saturation", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "saturation_fit.json").exists()
    bad = subprocess.run([sys.executable, "-m", "sivsim.cli", "nope"], capture_output=True)
    assert bad.returncode != 0
