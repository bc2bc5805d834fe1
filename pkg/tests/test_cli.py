import json

import pytest

from qtb import cli
from qtb.fixtures import data_path
from qtb.tagstream import TagStream


def run(tmp_path, *argv):
    rc = cli.main([*argv, "--out", str(tmp_path), "--quiet"])
    return rc


def report(tmp_path, command):
    return json.loads((tmp_path / f"{command}_report.json").read_text())


def results(tmp_path, command):
    return {k: v["value"] for k, v in report(tmp_path, command)["results"].items()}


@pytest.fixture(scope="module")
def short_stream(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    rc = cli.main(["simulate", "--config", str(data_path("experiment.json")), "--duration", "20ms",
                   "--out", str(out), "--quiet"])
    assert rc == 0
    return out / "stream.ttag"


def test_simulate_is_deterministic(tmp_path, short_stream):
    assert run(tmp_path, "simulate", "--config", str(data_path("experiment.json")), "--duration", "20ms",
               "--threads", "3") == 0
    assert (tmp_path / "stream.ttag").read_bytes() == short_stream.read_bytes()
    r = report(tmp_path, "simulate")
    assert r["results"]["stream_sha256"]["value"] == TagStream.load(short_stream).digest()
    assert str(data_path("experiment.json")) in r["inputs"]
    assert run(tmp_path, "simulate", "--config", str(data_path("experiment.json")), "--duration", "20ms",
               "--seed", "7", "--stream-name", "other.ttag") == 0
    assert (tmp_path / "other.ttag").read_bytes() != short_stream.read_bytes()


def test_zero_duration_writes_empty_stream(tmp_path):
    assert run(tmp_path, "simulate", "--config", str(data_path("experiment.json")), "--duration", "0") == 0
    assert len(TagStream.load(tmp_path / "stream.ttag")) == 0


def test_stream_commands(tmp_path, short_stream):
    assert run(tmp_path, "hist", "--stream", str(short_stream), "--bin-width", "50ps", "--svg") == 0
    assert (tmp_path / "histogram.csv").exists() and (tmp_path / "histogram.svg").exists()
    assert 0.0 in [round(c, 12) for c in results(tmp_path, "hist")["peak_centers"]]
    assert run(tmp_path, "triple", "--stream", str(short_stream), "--gate-a", "2.875ns,1ns",
               "--gate-b", "2.875ns,1ns", "--period", "6.25ns") == 0
    assert results(tmp_path, "triple")["triples"] > 0
    assert run(tmp_path, "coinc", "--stream", str(short_stream), "--a", "A1", "--b", "B1",
               "--window", "200ps", "--period", "6.25ns") == 0
    assert results(tmp_path, "coinc")["car"] > 1


def test_fit_commands_on_shipped_data(tmp_path):
    traces = [str(data_path(f"resonance_{c}.csv")) for c in ("C37", "C27", "C17")]
    assert run(tmp_path, "fit-resonance", "--traces", *traces) == 0
    assert run(tmp_path, "fit-singles", "--sweep", str(data_path("singles_idler.csv")), "--power", "1.28") == 0
    assert results(tmp_path, "fit-singles")["rate_at_power"] == pytest.approx(2.26e6, rel=0.02)
    assert run(tmp_path, "fringe", "--scans", str(data_path("fringes.csv")), "--svg") == 0
    r = results(tmp_path, "fringe")
    assert r["raw_visibility"] == pytest.approx(0.956, abs=0.01)
    assert r["chsh_s"] > 2.6
    assert run(tmp_path, "tomo", "--counts", str(data_path("tomography_1e4.json")), "--trials", "4") == 0
    assert 0.92 < results(tmp_path, "tomo")["fidelity"] < 0.96
    assert (tmp_path / "rho.json").exists()


def test_brightness_and_chsh(tmp_path):
    assert run(tmp_path, "brightness", "--ref-linewidth", "2e9") == 0
    r = results(tmp_path, "brightness")
    assert r["ratio_to_reference"] == pytest.approx(8.0) and r["linewidth_exponent"] == pytest.approx(-3.0)
    assert run(tmp_path, "chsh", "--visibility", "0.9555", "--sigma", "0.0018") == 0
    assert results(tmp_path, "chsh")["chsh_n_sigma"] == pytest.approx(138.0, abs=0.5)


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"pump": {"repetition_rate_hz": -1}}')
    assert run(tmp_path, "simulate", "--config", str(bad)) == cli.EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err
    junk = tmp_path / "junk.ttag"
    junk.write_bytes(b"TTAG\x07\x00")
    assert run(tmp_path, "hist", "--stream", str(junk)) == cli.EXIT_ANALYSIS
    assert "analysis error in tagstream" in capsys.readouterr().err
    assert run(tmp_path, "hist", "--stream", str(tmp_path / "missing.ttag")) == cli.EXIT_ANALYSIS
    with pytest.raises(SystemExit):
        cli.main(["hist", "--stream", "x", "--bin-width", "wide"])


def test_fixtures_command_reproduces_shipped_files(tmp_path):
    assert run(tmp_path, "fixtures", "--seed", "42") == 0
    for name in ("fringes.csv", "tomography_1e6.json", "resonance_C37.csv", "experiment.json"):
        assert (tmp_path / name).read_bytes() == data_path(name).read_bytes(), name
