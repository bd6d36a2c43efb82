"""Command-line front end.

Subcommands: analyze, def, qv, synth, plotdata.  Every failure maps to a
fixed exit code (0 ok, 2 no dominant mode, 3 conditioning, 4 data,
5 usage) and a single JSON line on stderr.  The OSCL_THREADS environment
variable caps BLAS thread counts; it is applied before numpy is imported,
which is why this module defers all heavy imports into the handlers.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def _apply_thread_cap() -> str | None:
    """Pin BLAS thread counts from OSCL_THREADS; returns an error message
    when the variable is set but unusable."""
    cap = os.environ.get("OSCL_THREADS")
    if not cap:
        return None
    if not cap.isdigit() or int(cap) < 1:
        return f"OSCL_THREADS must be a positive integer, got {cap!r}"
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)
    return None


def _pair(text: str, name: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"{name} expects LO:HI, got {text!r}")
    return float(parts[0]), float(parts[1])


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oscloc",
        description="Locate the source of an electromechanical oscillation "
                    "from multi-location phasor records.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--input", required=True, help="wide-CSV phasor record")
        p.add_argument("--window", default=None, metavar="START:END",
                       help="analysis window in seconds, e.g. 60:110 (default: full record)")
        p.add_argument("--f-min", type=float, default=0.2,
                       help="lowest frequency the window must support with 10 cycles")
        p.add_argument("--lowpass", type=float, default=3.0, metavar="HZ",
                       help="anti-noise low-pass corner; 0 disables")
        p.add_argument("--filter-order", type=int, default=4, choices=(2, 4, 6, 8))
        p.add_argument("--max-gap-fraction", type=float, default=0.05)
        p.add_argument("--search-band", default="0.05:1.0", metavar="LO:HI",
                       help="frequency band searched for the dominant mode")
        p.add_argument("--signals", default="magnitude", choices=("magnitude", "pq"),
                       help="which series feed the spectral search")
        p.add_argument("--out", default=None, help="output JSON path (default: stdout)")

    p_an = sub.add_parser("analyze", help="full localization analysis")
    add_common(p_an)
    p_an.add_argument("--band-rel", default="0.9:1.1", metavar="LO:HI",
                      help="band-pass edges relative to the detected frequency")
    p_an.add_argument("--band-abs", default=None, metavar="LO:HI",
                      help="absolute band-pass edges in Hz (overrides --band-rel)")
    p_an.add_argument("--crop", default="0.2:0.8", metavar="LO:HI",
                      help="central fraction of the filtered window to keep")
    p_an.add_argument("--rank", default="auto",
                      help="'auto' or an integer truncation rank")
    p_an.add_argument("--baselines", default="", metavar="LIST",
                      help="comma list of baselines to include: def,qv")
    p_an.add_argument("--threshold-deg", type=float, default=30.0,
                      help="Q-V in-phase threshold, degrees")
    p_an.add_argument("--dict-poly-degree", type=int, default=1)
    p_an.add_argument("--dict-raw-magnitude", action="store_true")
    p_an.add_argument("--dict-raw-angle", action="store_true")
    p_an.add_argument("--dict-trig", action="store_true")

    p_def = sub.add_parser("def", help="dissipating-energy baseline only")
    add_common(p_def)
    p_def.add_argument("--band-rel", default="0.9:1.1", metavar="LO:HI")
    p_def.add_argument("--band-abs", default=None, metavar="LO:HI")
    p_def.add_argument("--crop", default="0.2:0.8", metavar="LO:HI")

    p_qv = sub.add_parser("qv", help="Q-V phase baseline only")
    add_common(p_qv)
    p_qv.add_argument("--frequency", type=float, default=None, metavar="HZ",
                      help="oscillation frequency (default: detect)")
    p_qv.add_argument("--threshold-deg", type=float, default=30.0)
    p_qv.add_argument("--crop", default="0.2:0.8", metavar="LO:HI")
    p_qv.add_argument("--sweep", type=int, default=0, metavar="N",
                      help="also report phase across N shifted sub-windows")

    p_sy = sub.add_parser("synth", help="generate a synthetic event")
    p_sy.add_argument("--scenario", default=None, help="scenario JSON file")
    p_sy.add_argument("--locations", type=int, default=5)
    p_sy.add_argument("--source", type=int, default=1)
    p_sy.add_argument("--freq", type=float, default=0.2, metavar="HZ")
    p_sy.add_argument("--damping", type=float, default=0.01)
    p_sy.add_argument("--snr", type=float, default=30.0, metavar="DB",
                      help="ambient noise level; negative infinity not allowed, "
                           "use --noiseless instead")
    p_sy.add_argument("--noiseless", action="store_true")
    p_sy.add_argument("--duration", type=float, default=120.0, metavar="S")
    p_sy.add_argument("--rate", type=float, default=50.0, metavar="HZ")
    p_sy.add_argument("--amplitude", type=float, default=0.05)
    p_sy.add_argument("--forced", action="store_true")
    p_sy.add_argument("--seed", type=int, default=0)
    p_sy.add_argument("--out", required=True, help="output CSV path")
    p_sy.add_argument("--truth-out", default=None,
                      help="optional ground-truth JSON path")

    p_pl = sub.add_parser("plotdata", help="export plot-ready CSV tables")
    p_pl.add_argument("--report", required=True, help="analysis report JSON")
    p_pl.add_argument("--input", required=True, help="the analyzed CSV record")
    p_pl.add_argument("--outdir", required=True)
    p_pl.add_argument("--which", default="timeseries,pq,participation,def,qv",
                      help="comma list of tables to write")
    return parser


def _make_config(args: argparse.Namespace, *, full: bool):
    from .lifting import DictionaryConfig
    from .pipeline import AnalyzeConfig

    window = _pair(args.window, "--window") if args.window else None
    rank = None
    baselines: tuple[str, ...] = ()
    band_abs = None
    crop = (0.2, 0.8)
    threshold = 30.0
    band_rel = (0.9, 1.1)
    dictionary = DictionaryConfig()
    if full:
        if args.rank != "auto":
            try:
                rank = int(args.rank)
            except ValueError:
                raise ValueError(f"--rank expects 'auto' or an integer, got {args.rank!r}")
        baselines = tuple(b for b in args.baselines.split(",") if b)
        threshold = args.threshold_deg
        dictionary = DictionaryConfig(
            include_raw_magnitude=args.dict_raw_magnitude,
            include_raw_angle=args.dict_raw_angle,
            include_trig=args.dict_trig,
            poly_degree=args.dict_poly_degree,
        )
    if hasattr(args, "band_rel"):
        band_rel = _pair(args.band_rel, "--band-rel")
        if args.band_abs:
            band_abs = _pair(args.band_abs, "--band-abs")
    if hasattr(args, "crop"):
        crop = _pair(args.crop, "--crop")

    return AnalyzeConfig(
        window=window,
        window_f_min=args.f_min,
        max_gap_fraction=args.max_gap_fraction,
        lowpass_hz=args.lowpass or None,
        filter_order=args.filter_order,
        search_band_hz=_pair(args.search_band, "--search-band"),
        spectrum_signals=args.signals,
        band_rel=band_rel,
        band_abs_hz=band_abs,
        crop=crop,
        rank=rank,
        baselines=baselines,
        qv_threshold_deg=threshold,
        dictionary=dictionary,
    )


def _emit(payload: dict, out: str | None) -> None:
    from .report import dumps_report, write_report

    if out:
        write_report(payload, out)
    else:
        sys.stdout.write(dumps_report(payload))


def cmd_analyze(args: argparse.Namespace) -> int:
    from .io import load_event_csv
    from .pipeline import run_analysis
    from .report import build_report, file_fingerprint

    config = _make_config(args, full=True)
    ds = load_event_csv(args.input)
    result = run_analysis(ds, config)
    report = build_report(result, fingerprint=file_fingerprint(args.input))
    _emit(report, args.out)
    return 0


def cmd_def(args: argparse.Namespace) -> int:
    from datetime import datetime, timezone

    from . import __version__
    from .baselines import def_energy
    from .filters import BANDPASS, design_butterworth
    from .io import load_event_csv
    from .pipeline import prepare_dataset
    from .report import file_fingerprint
    from .spectrum import detect_dominant_frequency

    config = _make_config(args, full=False)
    ds = load_event_csv(args.input)
    prepared, _ = prepare_dataset(ds, config)
    if config.band_abs_hz is not None:
        edges = config.band_abs_hz
        frequency = None
    else:
        peak = detect_dominant_frequency(prepared, band_hz=config.search_band_hz,
                                         signals=config.spectrum_signals)
        frequency = peak.frequency_hz
        edges = (config.band_rel[0] * frequency, config.band_rel[1] * frequency)
    band = design_butterworth(BANDPASS, config.filter_order, edges,
                              prepared.sample_rate)
    result = def_energy(prepared, band, keep=config.crop)
    payload = {
        "tool": "oscloc",
        "tool_version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "dataset_fingerprint": file_fingerprint(args.input),
        "effective_config": config.to_dict(),
        "frequency_hz": frequency,
        "band_edges_hz": list(edges),
        "def": result.to_dict(),
    }
    _emit(payload, args.out)
    return 0


def cmd_qv(args: argparse.Namespace) -> int:
    from datetime import datetime, timezone

    from . import __version__
    from .baselines import qv_phase, qv_phase_sweep
    from .io import load_event_csv
    from .pipeline import prepare_dataset
    from .report import file_fingerprint
    from .spectrum import detect_dominant_frequency

    config = _make_config(args, full=False)
    ds = load_event_csv(args.input)
    prepared, _ = prepare_dataset(ds, config)
    frequency = args.frequency
    if frequency is None:
        peak = detect_dominant_frequency(prepared, band_hz=config.search_band_hz,
                                         signals=config.spectrum_signals)
        frequency = peak.frequency_hz
    result = qv_phase(prepared, frequency, threshold_deg=args.threshold_deg,
                      keep=config.crop)
    payload = {
        "tool": "oscloc",
        "tool_version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "dataset_fingerprint": file_fingerprint(args.input),
        "effective_config": config.to_dict(),
        "qv": result.to_dict(),
    }
    if args.sweep:
        sweep = qv_phase_sweep(prepared, frequency,
                               threshold_deg=args.threshold_deg,
                               n_windows=args.sweep)
        payload["qv_sweep"] = [
            {"location": loc, **sweep[loc]} for loc in sorted(sweep)
        ]
    _emit(payload, args.out)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    import json as _json
    from pathlib import Path

    from .errors import ScenarioError
    from .io import write_event_csv
    from .synth import SynthScenario, generate_event, scenario_from_dict

    if args.scenario:
        path = Path(args.scenario)
        if not path.exists():
            raise ScenarioError(f"scenario file not found: {path}")
        scenario = scenario_from_dict(_json.loads(path.read_text(encoding="utf-8")))
    else:
        scenario = SynthScenario(
            n_locations=args.locations,
            source_location=args.source,
            mode_freq_hz=args.freq,
            mode_damping=args.damping,
            noise_snr_db=None if args.noiseless else args.snr,
            duration_s=args.duration,
            sample_rate_hz=args.rate,
            seed=args.seed,
            amplitude=args.amplitude,
            forced=args.forced,
        )
    ds, truth = generate_event(scenario)
    write_event_csv(ds, args.out)
    if args.truth_out:
        Path(args.truth_out).write_text(
            _json.dumps(truth.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8", newline="\n",
        )
    return 0


def cmd_plotdata(args: argparse.Namespace) -> int:
    import json as _json
    from pathlib import Path

    from .errors import UsageError
    from .io import align_and_window, load_event_csv
    from .report import write_plot_data

    report_path = Path(args.report)
    if not report_path.exists():
        raise UsageError(f"report not found: {report_path}")
    report = _json.loads(report_path.read_text(encoding="utf-8"))
    ds = load_event_csv(args.input)
    window = report.get("window_s")
    if window:
        ds = align_and_window(ds, window[0], window[1],
                              f_min=10.0 / (window[1] - window[0]))
    which = tuple(w for w in args.which.split(",") if w)
    write_plot_data(report, ds, args.outdir, which=which)
    return 0


_HANDLERS = {
    "analyze": cmd_analyze,
    "def": cmd_def,
    "qv": cmd_qv,
    "synth": cmd_synth,
    "plotdata": cmd_plotdata,
}


def main(argv: list[str] | None = None) -> int:
    thread_error = _apply_thread_cap()
    if thread_error is not None:
        print(json.dumps({"error": thread_error, "kind": "UsageError",
                          "exit_code": 5}), file=sys.stderr)
        return 5
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; remap to the fixed taxonomy
        return 0 if exc.code in (0, None) else 5
    from .errors import OsclocError

    try:
        return _HANDLERS[args.command](args)
    except OsclocError as exc:
        print(json.dumps({
            "error": str(exc),
            "kind": type(exc).__name__,
            "exit_code": exc.exit_code,
        }), file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(json.dumps({
            "error": str(exc), "kind": "UsageError", "exit_code": 5,
        }), file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
