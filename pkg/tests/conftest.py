from __future__ import annotations

import pytest

from oscloc import io, synth


@pytest.fixture(scope="session")
def chain_event():
    """Canonical 5-location chain event used by several suites.

    Source at location 3, 0.25 Hz, light damping, 35 dB noise.  Session
    scoped because generation is deterministic and read-only.
    """
    scenario = synth.SynthScenario(
        n_locations=5, source_location=3, mode_freq_hz=0.25,
        mode_damping=0.01, noise_snr_db=35.0, duration_s=120.0,
        sample_rate_hz=50.0, seed=11,
    )
    return synth.generate_event(scenario)


@pytest.fixture()
def chain_csv(tmp_path, chain_event):
    """The canonical chain event written to disk (CSV + sidecar)."""
    ds, _ = chain_event
    path = tmp_path / "event.csv"
    io.write_event_csv(ds, path)
    return path
