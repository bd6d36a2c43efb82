"""Release acceptance suite.

Each test covers one numbered criterion and prints a single
``ACCEPTANCE <n> ...: PASS|FAIL`` verdict line (visible with ``pytest -s``
or in the captured output of a failing run) before asserting.
"""

from __future__ import annotations

import os
import time

import numpy as np
import pytest

from helpers import (classical_participation, identity_dictionary,
                     lagged_qv_builder, make_dataset, match_modes,
                     random_stable_system, reverse_dataset,
                     simulate_snapshots, snapshot_matrices, tone_builder)
from oscloc import baselines, edmd, filters, io, pipeline, spectrum, synth

DT = 0.02
FS = 50.0


def _verdict(number: int, label: str, ok: bool, detail: str = "") -> bool:
    state = "PASS" if ok else "FAIL"
    suffix = f"  [{detail}]" if detail else ""
    print(f"ACCEPTANCE {number} {label}: {state}{suffix}")
    return ok


def _fit(a: np.ndarray, rng: np.random.Generator,
         n_snapshots: int = 500) -> edmd.KoopmanModel:
    x, y = simulate_snapshots(a, n_snapshots, rng)
    snap = snapshot_matrices(x, y, dt=DT)
    return edmd.reduce_and_decompose(edmd.assemble_gram(snap), snap,
                                     a.shape[0])


def test_criterion_1_linear_system_eigenvalues_recovered_exactly():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        a = random_stable_system(rng, n=4)
        model = _fit(a, rng)
        truth = np.linalg.eigvals(a)
        picks = match_modes(model.eigenvalues, truth)
        err = float(np.max(np.abs(model.eigenvalues - truth[picks])))
        worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed < 10.0
    assert _verdict(1, "linear eigenvalue recovery", ok,
                    f"max err {worst:.2e}, {elapsed:.2f}s"), \
        f"worst eigenvalue error {worst:.3e}, elapsed {elapsed:.2f}s"


def test_criterion_2_participation_matches_classical_factors():
    rng = np.random.default_rng(202)
    dictionary = identity_dictionary(4)
    worst = 0.0
    for _ in range(20):
        a = random_stable_system(rng, n=4)
        model = _fit(a, rng)
        true_eigs, true_p = classical_participation(a)
        for i, mode in enumerate(edmd.to_continuous(model)):
            mu = model.eigenvalues[mode.mode_index]
            col = match_modes([mu], true_eigs)[0]
            report = edmd.participation(model, mode, dictionary)
            err = float(np.max(np.abs(report.values - true_p[:, col])))
            worst = max(worst, err)
    ok = worst < 1e-6
    assert _verdict(2, "participation oracle equivalence", ok,
                    f"max err {worst:.2e}"), f"worst deviation {worst:.3e}"


def test_criterion_3_participation_trace_is_one():
    rng = np.random.default_rng(303)
    cases = 0
    worst = 0.0
    while cases < 200:
        n = 2 * int(rng.integers(1, 5))
        a = random_stable_system(rng, n=n)
        model = _fit(a, rng, n_snapshots=400)
        dictionary = identity_dictionary(n)
        for mode in edmd.to_continuous(model):
            report = edmd.participation(model, mode, dictionary)
            worst = max(worst, report.trace_error)
            cases += 1
    ok = worst < 1e-8
    assert _verdict(3, "trace identity", ok,
                    f"{cases} modes, max dev {worst:.2e}"), \
        f"worst trace deviation {worst:.3e} over {cases} modes"


def test_criterion_4_bandpass_response_and_zero_phase():
    f0 = 0.158
    t0 = time.perf_counter()
    spec = filters.design_butterworth(filters.BANDPASS, 4,
                                      (0.9 * f0, 1.1 * f0), FS)
    h = np.abs(spec.response(np.array([f0, 0.5 * f0, 2.0 * f0])))
    gains_ok = 0.99 <= h[0] <= 1.01 and h[1] < 0.05 and h[2] < 0.05

    t = np.arange(30000) / FS
    x = np.sin(2 * np.pi * f0 * t)
    y = filters.apply_zero_phase(spec, x)
    sl = slice(12000, 18000)
    xc = np.correlate(y[sl] - y[sl].mean(), x[sl] - x[sl].mean(), "full")
    lag = int(np.argmax(xc)) - (sl.stop - sl.start - 1)
    elapsed = time.perf_counter() - t0

    ok = gains_ok and lag == 0 and elapsed < 1.0
    assert _verdict(4, "band-pass filter correctness", ok,
                    f"|H|={h[0]:.4f}/{h[1]:.4f}/{h[2]:.4f}, lag {lag}, "
                    f"{elapsed:.2f}s"), (h, lag, elapsed)


def test_criterion_5_peak_detection_beats_bin_width():
    f0 = 0.158
    hits = 0
    worst = 0.0
    for seed in range(100):
        ds = make_dataset(3, tone_builder(f0, amplitude=0.05, snr_db=30.0),
                          2500, FS, seed=seed)
        peak = spectrum.detect_dominant_frequency(ds)
        err = abs(peak.frequency_hz - f0)
        worst = max(worst, err)
        hits += err <= 0.005
    ok = hits == 100
    assert _verdict(5, "spectral peak frequency", ok,
                    f"{hits}/100 within 5 mHz, worst {worst * 1e3:.3f} mHz"), \
        f"{hits}/100 seeds within tolerance, worst error {worst:.2e} Hz"


def test_criterion_6_blind_localization():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    rank1 = top2 = 0
    misses = []
    for k in range(20):
        n_loc = int(rng.integers(5, 20))
        scenario = synth.SynthScenario(
            n_locations=n_loc,
            source_location=int(rng.integers(1, n_loc + 1)),
            mode_freq_hz=float(rng.uniform(0.1, 0.5)),
            mode_damping=float(rng.uniform(0.005, 0.05)),
            noise_snr_db=float(rng.uniform(20.0, 40.0)),
            duration_s=120.0,
            sample_rate_hz=FS,
            seed=1000 + k,
        )
        ds, truth = synth.generate_event(scenario)
        result = pipeline.run_analysis(ds)
        rank = result.participation.ranking.index(truth.source_location) + 1
        rank1 += rank == 1
        top2 += rank <= 2
        if rank > 1:
            misses.append((k, rank))
    elapsed = time.perf_counter() - t0
    ok = rank1 >= 18 and top2 == 20 and elapsed < 60.0
    assert _verdict(6, "blind source localization", ok,
                    f"rank1 {rank1}/20, top2 {top2}/20, {elapsed:.1f}s"), \
        f"rank1 {rank1}/20, top2 {top2}/20, misses {misses}, {elapsed:.1f}s"


def test_criterion_7_dissipating_energy_signs_and_reversal(chain_event):
    ds, truth = chain_event
    band = filters.design_butterworth(
        filters.BANDPASS, 4,
        (0.9 * truth.mode_freq_hz, 1.1 * truth.mode_freq_hz), FS)
    fwd = baselines.def_energy(ds, band)
    bwd = baselines.def_energy(reverse_dataset(ds), band)

    src = truth.source_location
    signs_ok = fwd.per_location[src].energy_rate > 0.0 and all(
        fwd.per_location[loc].energy_rate < 0.0
        for loc in ds.locations() if loc != src)
    worst = max(abs(fwd.per_location[loc].energy_rate
                    + bwd.per_location[loc].energy_rate)
                for loc in ds.locations())
    ok = signs_ok and worst < 1e-9
    assert _verdict(7, "dissipating-energy oracle", ok,
                    f"signs {'ok' if signs_ok else 'BAD'}, "
                    f"reversal residual {worst:.2e}"), \
        (fwd.to_dict(), worst)


def test_criterion_8_qv_phase_tracks_planted_lag():
    f0 = 0.2
    worst = 0.0
    for tau in np.linspace(-2.0, 2.0, 10):
        ds = make_dataset(1, lagged_qv_builder(f0, float(tau)), 6000, FS)
        qv = baselines.qv_phase(ds, f0)
        expected = 360.0 * f0 * float(tau)
        diff = (qv.per_location[1].phase_deg - expected + 180.0) % 360.0 - 180.0
        worst = max(worst, abs(diff))
    ok = worst <= 2.0
    assert _verdict(8, "Q-V phase vs planted lag", ok,
                    f"worst {worst:.3f} deg over 10 lags"), \
        f"worst phase error {worst:.3f} deg"


@pytest.mark.skipif(not os.environ.get("OSCLOC_FIELD_CSV"),
                    reason="set OSCLOC_FIELD_CSV to a compatible event "
                           "export to run the field replication check")
def test_criterion_9_field_event_replication():
    ds = io.load_event_csv(os.environ["OSCLOC_FIELD_CSV"])
    result = pipeline.run_analysis(
        ds, pipeline.AnalyzeConfig(baselines=("def", "qv")))

    freq_ok = abs(result.peak.frequency_hz - 0.158) <= 0.005
    rank_ok = 6 <= result.model.rank <= 8
    loc_ok = result.participation.ranking[0] == 19
    def_ok = set(result.def_result.ranking_injecting[:2]) == {14, 15}
    in_phase = {loc for loc, e in result.qv_result.per_location.items()
                if e.in_phase}
    qv_ok = {7, 11, 19} <= in_phase

    ok = freq_ok and rank_ok and loc_ok and def_ok and qv_ok
    assert _verdict(9, "field event replication", ok,
                    f"f {result.peak.frequency_hz:.4f} Hz, "
                    f"rank {result.model.rank}, "
                    f"top {result.participation.ranking[0]}, "
                    f"def {result.def_result.ranking_injecting[:2]}, "
                    f"in-phase {sorted(in_phase)}"), \
        (result.peak.frequency_hz, result.model.rank,
         result.participation.ranking[:3])
