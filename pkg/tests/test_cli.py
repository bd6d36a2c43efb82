"""Command-line interface: subcommands, wire formats, exit codes."""

from __future__ import annotations

import json

import numpy as np
import pytest

from helpers import make_dataset
from oscloc import io
from oscloc.cli import main

SYNTH_ARGS = [
    "synth", "--locations", "5", "--source", "3", "--freq", "0.25",
    "--damping", "0.01", "--snr", "35", "--duration", "120",
    "--rate", "50", "--seed", "11",
]


@pytest.fixture(scope="module")
def event_csv(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_event")
    csv = root / "event.csv"
    truth = root / "truth.json"
    code = main(SYNTH_ARGS + ["--out", str(csv), "--truth-out", str(truth)])
    assert code == 0
    return csv


@pytest.fixture(scope="module")
def noise_csv(tmp_path_factory):
    def build(loc, t, rng):
        return (1.0 + 0.01 * rng.standard_normal(t.size),
                0.001 * rng.standard_normal(t.size),
                0.5 + 0.01 * rng.standard_normal(t.size),
                0.001 * rng.standard_normal(t.size))

    ds = make_dataset(4, build, 6000, 50.0, seed=7)
    path = tmp_path_factory.mktemp("cli_noise") / "noise.csv"
    io.write_event_csv(ds, path)
    return path


def test_synth_writes_csv_sidecar_and_truth(tmp_path):
    csv = tmp_path / "ev.csv"
    truth_path = tmp_path / "truth.json"
    assert main(SYNTH_ARGS + ["--out", str(csv),
                              "--truth-out", str(truth_path)]) == 0
    assert csv.exists()
    assert csv.with_suffix(".meta.json").exists()
    truth = json.loads(truth_path.read_text())
    assert truth["source_location"] == 3
    assert truth["mode_freq_hz"] == 0.25
    ds = io.load_event_csv(csv)
    assert ds.n_samples == 6000 and ds.locations() == (1, 2, 3, 4, 5)


def test_synth_scenario_file_matches_flags(tmp_path, event_csv):
    scenario = {
        "n_locations": 5, "source_location": 3, "mode_freq_hz": 0.25,
        "mode_damping": 0.01, "noise_snr_db": 35.0, "duration_s": 120.0,
        "sample_rate_hz": 50.0, "seed": 11,
    }
    spath = tmp_path / "scenario.json"
    spath.write_text(json.dumps(scenario))
    out = tmp_path / "ev.csv"
    assert main(["synth", "--scenario", str(spath), "--out", str(out)]) == 0
    assert out.read_bytes() == event_csv.read_bytes()


def test_analyze_locates_source(tmp_path, event_csv):
    out = tmp_path / "report.json"
    code = main(["analyze", "--input", str(event_csv),
                 "--baselines", "def,qv", "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["participation"]["ranking"][0] == 3
    assert rep["detected_peak"]["frequency_hz"] == pytest.approx(0.25,
                                                                 abs=0.005)
    assert set(rep["baselines"]) == {"def", "qv"}
    assert rep["baselines"]["def"]["ranking_injecting"][0] == 3


def test_analyze_defaults_to_stdout(event_csv, capsys):
    assert main(["analyze", "--input", str(event_csv)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["tool"] == "oscloc"
    assert rep["baselines"] == {}


def test_analyze_rank_override(tmp_path, event_csv):
    out = tmp_path / "r.json"
    assert main(["analyze", "--input", str(event_csv), "--rank", "4",
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text())["model"]["rank"] == 4


def test_analyze_deterministic_modulo_timestamp(tmp_path, event_csv):
    reps = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        assert main(["analyze", "--input", str(event_csv),
                     "--baselines", "def,qv", "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        rep.pop("created_at")
        reps.append(rep)
    assert reps[0] == reps[1]


def test_def_subcommand_payload(event_csv, capsys):
    assert main(["def", "--input", str(event_csv)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["frequency_hz"] == pytest.approx(0.25, abs=0.005)
    assert len(payload["band_edges_hz"]) == 2
    assert payload["def"]["ranking_injecting"][0] == 3
    locs = [row["location"] for row in payload["def"]["per_location"]]
    assert locs == [1, 2, 3, 4, 5]


def test_def_absolute_band_skips_detection(event_csv, capsys):
    assert main(["def", "--input", str(event_csv),
                 "--band-abs", "0.2:0.3"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["frequency_hz"] is None
    assert payload["band_edges_hz"] == [0.2, 0.3]
    assert payload["def"]["ranking_injecting"][0] == 3


def test_qv_subcommand_with_sweep(event_csv, capsys):
    assert main(["qv", "--input", str(event_csv), "--sweep", "3"]) == 0
    payload = json.loads(capsys.readouterr().out)
    qv = payload["qv"]
    assert qv["threshold_deg"] == 30.0
    assert len(qv["per_location"]) == 5
    for row in qv["per_location"]:
        assert -180.0 < row["phase_deg"] <= 180.0
    sweep = payload["qv_sweep"]
    assert len(sweep) == 5
    for row in sweep:
        assert len(row["phases_deg"]) == 3
        assert row["spread_deg"] >= 0.0


def test_plotdata_writes_bundle(tmp_path, event_csv):
    report_path = tmp_path / "report.json"
    assert main(["analyze", "--input", str(event_csv),
                 "--baselines", "def,qv", "--out", str(report_path)]) == 0
    outdir = tmp_path / "plots"
    assert main(["plotdata", "--report", str(report_path),
                 "--input", str(event_csv), "--outdir", str(outdir)]) == 0
    assert (outdir / "participation.csv").exists()
    assert (outdir / "def.csv").exists()
    assert (outdir / "timeseries_loc3.csv").exists()
    assert (outdir / "README.md").exists()


# ---------------------------------------------------------------------------
# failure taxonomy


def _stderr_json(capsys):
    err = capsys.readouterr().err.strip()
    assert "\n" not in err, "diagnostics must be a single JSON line"
    return json.loads(err)


def test_no_dominant_mode_exits_2(noise_csv, capsys):
    assert main(["analyze", "--input", str(noise_csv)]) == 2
    diag = _stderr_json(capsys)
    assert diag["kind"] == "NoDominantModeError"
    assert diag["exit_code"] == 2


def test_corrupt_header_exits_4(tmp_path, event_csv, capsys):
    bad = tmp_path / "bad.csv"
    lines = event_csv.read_text().splitlines()
    lines[0] = lines[0].replace("loc1_Vm", "loc1_Vn")
    bad.write_text("\n".join(lines) + "\n")
    assert main(["analyze", "--input", str(bad)]) == 4
    diag = _stderr_json(capsys)
    assert diag["kind"] == "SchemaError"
    assert diag["exit_code"] == 4


def test_missing_input_exits_5(capsys):
    assert main(["analyze", "--input", "/nonexistent/event.csv"]) == 5
    assert _stderr_json(capsys)["kind"] == "UsageError"


def test_malformed_window_exits_5(event_csv, capsys):
    assert main(["analyze", "--input", str(event_csv),
                 "--window", "sixty:110"]) == 5
    assert _stderr_json(capsys)["exit_code"] == 5


def test_bad_flag_value_exits_5(event_csv):
    assert main(["analyze", "--input", str(event_csv),
                 "--filter-order", "5"]) == 5


def test_missing_subcommand_exits_5():
    assert main([]) == 5


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
    assert "oscloc" in capsys.readouterr().out


def test_thread_cap_must_be_positive_integer(event_csv, capsys, monkeypatch):
    monkeypatch.setenv("OSCL_THREADS", "many")
    assert main(["analyze", "--input", str(event_csv)]) == 5
    diag = _stderr_json(capsys)
    assert diag["kind"] == "UsageError"
    assert "OSCL_THREADS" in diag["error"]


def test_thread_cap_valid_value_accepted(event_csv, monkeypatch, tmp_path):
    monkeypatch.setenv("OSCL_THREADS", "1")
    out = tmp_path / "r.json"
    assert main(["analyze", "--input", str(event_csv),
                 "--out", str(out)]) == 0
