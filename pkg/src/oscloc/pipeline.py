"""End-to-end analysis: load -> repair -> window -> low-pass -> detect the
dominant frequency -> band-pass/crop observables -> reduced-operator
decomposition -> participation ranking, with optional energy-flow and Q-V
phase baselines."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from . import baselines as _baselines
from . import edmd, filters, io, lifting, spectrum
from .errors import UsageError


@dataclass(frozen=True)
class AnalyzeConfig:
    """Every knob of the analysis; defaults mirror the CLI defaults."""

    window: tuple[float, float] | None = None  # None = full record
    window_f_min: float = io.DEFAULT_WINDOW_F_MIN
    max_gap_fraction: float = 0.05
    lowpass_hz: float | None = 3.0
    filter_order: int = 4
    search_band_hz: tuple[float, float] = spectrum.DEFAULT_BAND_HZ
    spectrum_signals: str = "magnitude"
    band_rel: tuple[float, float] = (0.9, 1.1)
    band_abs_hz: tuple[float, float] | None = None
    crop: tuple[float, float] = (0.2, 0.8)
    rank: int | None = None  # None = automatic elbow choice
    baselines: tuple[str, ...] = ()
    qv_threshold_deg: float = _baselines.DEFAULT_PHASE_THRESHOLD_DEG
    dictionary: lifting.DictionaryConfig = field(default_factory=lifting.DictionaryConfig)

    def __post_init__(self) -> None:
        bad = set(self.baselines) - {"def", "qv"}
        if bad:
            raise UsageError(f"unknown baselines {sorted(bad)}; expected def, qv")

    def to_dict(self) -> dict:
        return {
            "window": None if self.window is None else list(self.window),
            "window_f_min": self.window_f_min,
            "max_gap_fraction": self.max_gap_fraction,
            "lowpass_hz": self.lowpass_hz,
            "filter_order": self.filter_order,
            "search_band_hz": list(self.search_band_hz),
            "spectrum_signals": self.spectrum_signals,
            "band_rel": list(self.band_rel),
            "band_abs_hz": None if self.band_abs_hz is None else list(self.band_abs_hz),
            "crop": list(self.crop),
            "rank": self.rank,
            "baselines": list(self.baselines),
            "qv_threshold_deg": self.qv_threshold_deg,
            "dictionary": {
                "include_power": self.dictionary.include_power,
                "include_raw_magnitude": self.dictionary.include_raw_magnitude,
                "include_raw_angle": self.dictionary.include_raw_angle,
                "include_trig": self.dictionary.include_trig,
                "poly_degree": self.dictionary.poly_degree,
                "poly_targets": list(self.dictionary.poly_targets),
            },
        }


@dataclass(frozen=True)
class AnalysisResult:
    config: AnalyzeConfig
    dataset: io.EventDataset
    peak: spectrum.SpectralPeak
    band: filters.FilterSpec
    lowpass: filters.FilterSpec | None
    dictionary: tuple[lifting.ObservableDef, ...]
    singular_values: np.ndarray
    model: edmd.KoopmanModel
    modes: list[edmd.ModeEstimate]
    target: edmd.ModeEstimate
    participation: edmd.ParticipationReport
    def_result: _baselines.DefResult | None
    qv_result: _baselines.QvPhaseResult | None
    warnings: tuple[str, ...]


def _lowpass_dataset(ds: io.EventDataset, spec: filters.FilterSpec) -> io.EventDataset:
    """Zero-phase low-pass every magnitude and (unwrapped) angle series."""
    new_channels = []
    for ch in ds.channels:
        new_channels.append(dc_replace(
            ch,
            magnitude=filters.apply_zero_phase(spec, ch.magnitude),
            angle=filters.apply_zero_phase(spec, np.unwrap(ch.angle)),
        ))
    return dc_replace(ds, channels=tuple(new_channels))


def prepare_dataset(ds: io.EventDataset, config: AnalyzeConfig) -> tuple[
    io.EventDataset, filters.FilterSpec | None
]:
    """Repair, window, and low-pass a freshly loaded dataset."""
    ds = io.exclude_bad_channels(ds, config.max_gap_fraction)
    if config.window is not None:
        ds = io.align_and_window(ds, config.window[0], config.window[1],
                                 f_min=config.window_f_min)
    else:
        span = (ds.t0, ds.t0 + ds.n_samples / ds.sample_rate)
        ds = io.align_and_window(ds, span[0], span[1],
                                 f_min=max(config.window_f_min,
                                           10.0 / (span[1] - span[0])))
    lowpass = None
    if config.lowpass_hz:
        lowpass = filters.design_butterworth(
            filters.LOWPASS, config.filter_order, config.lowpass_hz, ds.sample_rate
        )
        ds = _lowpass_dataset(ds, lowpass)
    return ds, lowpass


def run_analysis(ds: io.EventDataset, config: AnalyzeConfig | None = None) -> AnalysisResult:
    """Run the full localization chain on a loaded dataset."""
    config = config or AnalyzeConfig()
    collected: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        prepared, lowpass = prepare_dataset(ds, config)

        peak = spectrum.detect_dominant_frequency(
            prepared, band_hz=config.search_band_hz, signals=config.spectrum_signals
        )

        if config.band_abs_hz is not None:
            edges = config.band_abs_hz
        else:
            edges = (config.band_rel[0] * peak.frequency_hz,
                     config.band_rel[1] * peak.frequency_hz)
        band = filters.design_butterworth(
            filters.BANDPASS, config.filter_order, edges, prepared.sample_rate
        )

        dictionary = lifting.build_dictionary(prepared, config.dictionary)
        snap = lifting.lift_snapshots(prepared, dictionary, band=band, keep=config.crop)
        gram = edmd.assemble_gram(snap)
        singular_values = np.linalg.svd(gram.gram, compute_uv=False)
        rank = edmd.choose_rank(singular_values, override=config.rank)
        model = edmd.reduce_and_decompose(gram, snap, rank)
        modes = edmd.to_continuous(model)
        target = edmd.select_target_mode(modes, peak.frequency_hz)
        part = edmd.participation(model, target, dictionary)

        def_result = None
        qv_result = None
        if "def" in config.baselines:
            def_result = _baselines.def_energy(prepared, band, keep=config.crop)
        if "qv" in config.baselines:
            qv_result = _baselines.qv_phase(
                prepared, peak.frequency_hz,
                threshold_deg=config.qv_threshold_deg, keep=config.crop,
            )
        collected = [str(w.message) for w in caught]

    return AnalysisResult(
        config=config,
        dataset=prepared,
        peak=peak,
        band=band,
        lowpass=lowpass,
        dictionary=dictionary,
        singular_values=singular_values,
        model=model,
        modes=modes,
        target=target,
        participation=part,
        def_result=def_result,
        qv_result=qv_result,
        warnings=tuple(collected) + model.warnings,
    )


def analyze_file(path, config: AnalyzeConfig | None = None) -> AnalysisResult:
    ds = io.load_event_csv(path)
    return run_analysis(ds, config)
