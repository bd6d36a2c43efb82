"""JSON report assembly and tabular plot-data export.

Reports are deterministic: identical inputs and flags produce byte-identical
files apart from the ``created_at`` field, which is excluded from any
comparison or fingerprinting.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import UsageError
from .io import EventDataset, Quantity
from .lifting import compute_pq
from .pipeline import AnalysisResult


def file_fingerprint(path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_report(result: AnalysisResult, fingerprint: str | None = None) -> dict:
    """Assemble the analysis report as a JSON-ready dictionary."""
    ds = result.dataset
    report = {
        "tool": "oscloc",
        "tool_version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "dataset_fingerprint": fingerprint,
        "effective_config": result.config.to_dict(),
        "window_s": list(ds.window),
        "sample_rate_hz": ds.sample_rate,
        "locations": list(ds.locations()),
        "excluded_locations": [
            {"location": loc, "reason": reason}
            for loc, reason in ds.excluded_locations
        ],
        "detected_peak": result.peak.to_dict(),
        "lowpass_filter": None if result.lowpass is None else result.lowpass.to_dict(),
        "bandpass_filter": result.band.to_dict(),
        "dictionary": [obs.to_dict() for obs in result.dictionary],
        "gram_singular_values": [float(v) for v in result.singular_values],
        "model": result.model.to_dict(),
        "modes": [m.to_dict() for m in result.modes],
        "target_mode": result.target.to_dict(),
        "participation": result.participation.to_dict(),
        "baselines": {},
        "warnings": list(result.warnings),
    }
    if result.def_result is not None:
        report["baselines"]["def"] = result.def_result.to_dict()
    if result.qv_result is not None:
        report["baselines"]["qv"] = result.qv_result.to_dict()
    return report


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(report: dict, path) -> None:
    Path(path).write_text(dumps_report(report), encoding="utf-8", newline="\n")


def strip_volatile(report: dict) -> dict:
    """Drop fields legitimately differing between identical runs."""
    out = dict(report)
    out.pop("created_at", None)
    return out


_PLOTDATA_README = """\
# Plot data

Tabular exports for external plotting. All CSV files are UTF-8 with LF
line endings and a single header row.

- `timeseries_loc<ID>.csv`: time_s, vm, va_deg, im, ia_deg
  (windowed phasor channels; angles in degrees)
- `pq_loc<ID>.csv`: time_s, p, q
  (active/reactive power computed from the phasor channels)
- `participation.csv`: location, score
  (normalized participation in the target mode, ranked; max = 1)
- `def.csv`: location, energy_rate, total_energy, trend_r2
  (dissipating-energy baseline; positive rate = exporting)
- `qv.csv`: location, phase_deg, coherence, in_phase
  (reactive-power vs voltage-magnitude phase at the detected frequency)
"""


def write_plot_data(
    report: dict,
    ds: EventDataset,
    outdir,
    which: tuple[str, ...] = ("timeseries", "pq", "participation", "def", "qv"),
) -> list[Path]:
    """Emit plot-ready CSV tables for the figures the analysis supports."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, header: str, rows) -> None:
        path = outdir / name
        lines = [header] + [",".join(str(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
        written.append(path)

    t = ds.times()
    if "timeseries" in which:
        for loc in ds.locations():
            v = ds.channel(loc, Quantity.VOLTAGE)
            i = ds.channel(loc, Quantity.CURRENT)
            emit(
                f"timeseries_loc{loc}.csv",
                "time_s,vm,va_deg,im,ia_deg",
                zip(
                    (f"{x:.6f}" for x in t),
                    (f"{x:.12g}" for x in v.magnitude),
                    (f"{x:.12g}" for x in np.degrees(v.angle)),
                    (f"{x:.12g}" for x in i.magnitude),
                    (f"{x:.12g}" for x in np.degrees(i.angle)),
                ),
            )
    if "pq" in which:
        for loc in ds.locations():
            p, q = compute_pq(
                ds.channel(loc, Quantity.VOLTAGE), ds.channel(loc, Quantity.CURRENT)
            )
            emit(
                f"pq_loc{loc}.csv",
                "time_s,p,q",
                zip(
                    (f"{x:.6f}" for x in t),
                    (f"{x:.12g}" for x in p),
                    (f"{x:.12g}" for x in q),
                ),
            )
    if "participation" in which:
        part = report["participation"]
        scores = {row["location"]: row["score"] for row in part["per_location"]}
        emit(
            "participation.csv",
            "location,score",
            ((loc, f"{scores[loc]:.12g}") for loc in part["ranking"]),
        )
    if "def" in which:
        if "def" not in report.get("baselines", {}):
            raise UsageError(
                "report contains no energy-flow baseline; rerun analyze with "
                "--baselines def"
            )
        emit(
            "def.csv",
            "location,energy_rate,total_energy,trend_r2",
            (
                (row["location"], f"{row['energy_rate']:.12g}",
                 f"{row['total_energy']:.12g}", f"{row['trend_r2']:.12g}")
                for row in report["baselines"]["def"]["per_location"]
            ),
        )
    if "qv" in which:
        if "qv" not in report.get("baselines", {}):
            raise UsageError(
                "report contains no Q-V baseline; rerun analyze with "
                "--baselines qv"
            )
        emit(
            "qv.csv",
            "location,phase_deg,coherence,in_phase",
            (
                (row["location"], f"{row['phase_deg']:.12g}",
                 f"{row['coherence']:.12g}", str(row["in_phase"]).lower())
                for row in report["baselines"]["qv"]["per_location"]
            ),
        )

    readme = outdir / "README.md"
    readme.write_text(_PLOTDATA_README, encoding="utf-8", newline="\n")
    written.append(readme)
    return written
