"""Reading, writing, windowing, and repair of multi-location phasor records.

Wire format: a wide CSV with a ``time`` column (seconds, relative to file
start) followed by four columns per measurement location::

    time,loc<ID>_Vm,loc<ID>_Va,loc<ID>_Im,loc<ID>_Ia

Angles are stored on disk in degrees and held in memory in radians.  A
sidecar ``<name>.meta.json`` declares units, sample rate, and angle unit.
Missing values are empty cells.  Files are UTF-8 with LF line endings.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError, SchemaError, UsageError


class Quantity(Enum):
    VOLTAGE = "V"
    CURRENT = "I"


_COLUMN_RE = re.compile(r"^loc(\d+)_(Vm|Va|Im|Ia)$")
_MEMBERS = ("Vm", "Va", "Im", "Ia")

# Stuck-sensor heuristic: a run of bitwise-identical magnitude samples at
# least this long counts toward a location's bad-data fraction.
FLAT_RUN_MIN = 50

# Gaps longer than this (consecutive missing samples) cannot be repaired.
MAX_INTERP_GAP = 5

# Default lowest frequency the windowed record must support with 10 cycles.
DEFAULT_WINDOW_F_MIN = 0.2


@dataclass(frozen=True)
class ChannelSchema:
    """Metadata normally read from the sidecar file."""

    units: str = "pu"
    sample_rate_hz: float | None = None
    angle_unit: str = "degrees"

    def __post_init__(self) -> None:
        if self.angle_unit not in ("degrees", "radians"):
            raise SchemaError(f"unknown angle_unit {self.angle_unit!r}")


@dataclass(frozen=True)
class PhasorChannel:
    """One location's voltage or current phasor series."""

    location_id: int
    quantity: Quantity
    magnitude: np.ndarray
    angle: np.ndarray  # radians; unwrapped by align_and_window
    sample_rate: float
    t0: float
    units: str = "pu"
    nan_count: int = 0
    interpolated_count: int = 0

    def __post_init__(self) -> None:
        if self.magnitude.shape != self.angle.shape or self.magnitude.ndim != 1:
            raise DataError(
                f"loc{self.location_id}_{self.quantity.value}: magnitude/angle "
                f"shapes differ"
            )
        if self.sample_rate <= 0:
            raise DataError("sample_rate must be positive")
        finite = np.isfinite(self.magnitude)
        if np.any(self.magnitude[finite] < 0):
            raise DataError(
                f"loc{self.location_id}_{self.quantity.value}m: negative magnitude"
            )

    @property
    def n_samples(self) -> int:
        return self.magnitude.size

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_samples) / self.sample_rate


@dataclass(frozen=True)
class EventDataset:
    """An aligned set of phasor channels over a common time window."""

    channels: tuple[PhasorChannel, ...]
    window: tuple[float, float]
    sample_rate: float
    excluded_locations: tuple[tuple[int, str], ...] = ()
    units: str = "pu"
    angle_unit_on_disk: str = "degrees"

    def __post_init__(self) -> None:
        if not self.channels:
            raise DataError("dataset has no usable channels")
        lengths = {ch.n_samples for ch in self.channels}
        if len(lengths) != 1:
            raise DataError(f"channels have mismatched lengths: {sorted(lengths)}")

    @property
    def n_samples(self) -> int:
        return self.channels[0].n_samples

    @property
    def t0(self) -> float:
        return self.channels[0].t0

    def times(self) -> np.ndarray:
        return self.channels[0].times()

    def locations(self) -> tuple[int, ...]:
        return tuple(sorted({ch.location_id for ch in self.channels}))

    def channel(self, location_id: int, quantity: Quantity) -> PhasorChannel:
        for ch in self.channels:
            if ch.location_id == location_id and ch.quantity == quantity:
                return ch
        raise DataError(f"no {quantity.value} channel for location {location_id}")


def _read_sidecar(csv_path: Path) -> ChannelSchema:
    meta_path = csv_path.with_suffix(".meta.json")
    if not meta_path.exists():
        return ChannelSchema(units="unknown")
    try:
        raw = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"sidecar {meta_path.name} is not valid JSON: {exc}") from exc
    return ChannelSchema(
        units=str(raw.get("units", "unknown")),
        sample_rate_hz=raw.get("sample_rate_hz"),
        angle_unit=str(raw.get("angle_unit", "degrees")),
    )


def _parse_header(columns: list[str]) -> dict[int, dict[str, str]]:
    """Group data columns by location, raising SchemaError on any oddity."""
    if not columns or columns[0] != "time":
        raise SchemaError("first column must be 'time'")
    groups: dict[int, dict[str, str]] = {}
    for col in columns[1:]:
        m = _COLUMN_RE.match(col)
        if m is None:
            raise SchemaError(f"unexpected column {col!r}")
        loc, member = int(m.group(1)), m.group(2)
        members = groups.setdefault(loc, {})
        if member in members:
            raise SchemaError(f"duplicate column {col!r}")
        members[member] = col
    if not groups:
        raise SchemaError("no location columns found")
    for loc, members in groups.items():
        for member in _MEMBERS:
            if member not in members:
                raise SchemaError(f"missing column 'loc{loc}_{member}'")
    return groups


def _check_time(time: np.ndarray) -> float:
    """Validate the time column and return the sample interval."""
    if time.size < 2:
        raise DataError("need at least 2 samples")
    if not np.all(np.isfinite(time)):
        bad = int(np.flatnonzero(~np.isfinite(time))[0])
        raise DataError(f"non-finite timestamp at row {bad}")
    dt = np.diff(time)
    if np.any(dt <= 0):
        bad = int(np.flatnonzero(dt <= 0)[0]) + 1
        raise DataError(f"non-monotonic timestamp at row {bad}")
    median_dt = float(np.median(dt))
    jitter = np.abs(dt - median_dt)
    if np.any(jitter > 0.01 * median_dt):
        bad = int(np.flatnonzero(jitter > 0.01 * median_dt)[0]) + 1
        raise DataError(
            f"sample interval at row {bad} deviates more than 1% from the "
            f"median ({median_dt:.6g} s)"
        )
    return median_dt


def load_event_csv(path: str | Path, schema: ChannelSchema | None = None) -> EventDataset:
    """Load a wide-CSV phasor record plus its sidecar metadata.

    Locations whose four columns are entirely missing are moved to
    ``excluded_locations``; partial gaps are kept (flagged via ``nan_count``)
    for :func:`exclude_bad_channels` to repair or reject.
    """
    path = Path(path)
    if not path.exists():
        raise UsageError(f"input file not found: {path}")
    if schema is None:
        schema = _read_sidecar(path)

    frame = pd.read_csv(path, encoding="utf-8")
    groups = _parse_header(list(frame.columns))

    time = frame["time"].to_numpy(dtype=float)
    median_dt = _check_time(time)
    fs = schema.sample_rate_hz if schema.sample_rate_hz else 1.0 / median_dt
    if abs(1.0 / fs - median_dt) > 0.01 * median_dt:
        raise DataError(
            f"sidecar sample_rate_hz {fs:g} disagrees with the data interval "
            f"{median_dt:.6g} s by more than 1%"
        )

    to_rad = math.pi / 180.0 if schema.angle_unit == "degrees" else 1.0
    t0 = float(time[0])
    n = time.size

    channels: list[PhasorChannel] = []
    excluded: list[tuple[int, str]] = []
    for loc in sorted(groups):
        cols = groups[loc]
        series = {m: frame[cols[m]].to_numpy(dtype=float) for m in _MEMBERS}
        if all(np.all(np.isnan(series[m])) for m in _MEMBERS):
            excluded.append((loc, "all samples missing"))
            continue
        for quantity, mag_m, ang_m in (
            (Quantity.VOLTAGE, "Vm", "Va"),
            (Quantity.CURRENT, "Im", "Ia"),
        ):
            mag = series[mag_m]
            ang = series[ang_m] * to_rad
            nan_count = int(np.count_nonzero(np.isnan(mag) | np.isnan(ang)))
            channels.append(
                PhasorChannel(
                    location_id=loc,
                    quantity=quantity,
                    magnitude=mag,
                    angle=ang,
                    sample_rate=fs,
                    t0=t0,
                    units=schema.units,
                    nan_count=nan_count,
                )
            )
    if not channels:
        raise DataError("every location in the file is entirely missing")

    return EventDataset(
        channels=tuple(channels),
        window=(t0, t0 + n / fs),
        sample_rate=fs,
        excluded_locations=tuple(excluded),
        units=schema.units,
        angle_unit_on_disk=schema.angle_unit,
    )


def write_event_csv(ds: EventDataset, path: str | Path) -> None:
    """Write a dataset back to the wide-CSV format plus sidecar.

    Numeric values are written with 12 significant digits; the time column
    gets 6 decimal places; missing samples become empty cells.
    """
    path = Path(path)
    to_disk = 180.0 / math.pi if ds.angle_unit_on_disk == "degrees" else 1.0

    header = ["time"]
    columns: list[np.ndarray] = [ds.times()]
    for loc in ds.locations():
        for quantity, mag_m, ang_m in (
            (Quantity.VOLTAGE, "Vm", "Va"),
            (Quantity.CURRENT, "Im", "Ia"),
        ):
            ch = ds.channel(loc, quantity)
            header += [f"loc{loc}_{mag_m}", f"loc{loc}_{ang_m}"]
            columns += [ch.magnitude, ch.angle * to_disk]

    def cell(value: float, is_time: bool) -> str:
        if math.isnan(value):
            return ""
        return f"{value:.6f}" if is_time else f"{value:.12g}"

    lines = [",".join(header)]
    for k in range(ds.n_samples):
        lines.append(
            ",".join(cell(col[k], i == 0) for i, col in enumerate(columns))
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")

    meta = {
        "units": ds.units,
        "sample_rate_hz": ds.sample_rate,
        "angle_unit": ds.angle_unit_on_disk,
    }
    path.with_suffix(".meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
        newline="\n",
    )


def _unwrap_if_finite(angle: np.ndarray) -> np.ndarray:
    # unwrap poisons everything after a NaN, so leave gappy series alone
    # (they are repaired or rejected before windowing in the pipeline).
    if np.all(np.isfinite(angle)):
        return np.unwrap(angle)
    return angle


def align_and_window(
    ds: EventDataset,
    t_start: float,
    t_end: float,
    f_min: float = DEFAULT_WINDOW_F_MIN,
) -> EventDataset:
    """Restrict the dataset to [t_start, t_end) and unwrap angle series.

    The window must lie inside the recorded span and must contain at least
    10 cycles of ``f_min``, the lowest frequency the analysis intends to
    resolve.  Windowing is idempotent: repeating the same absolute bounds
    returns the same samples.
    """
    if t_end <= t_start:
        raise UsageError(f"window end {t_end} must exceed start {t_start}")
    if f_min <= 0:
        raise UsageError("f_min must be positive")
    span = (ds.t0, ds.t0 + ds.n_samples / ds.sample_rate)
    eps = 1e-9
    if t_start < span[0] - eps or t_end > span[1] + eps:
        raise UsageError(
            f"window ({t_start}, {t_end}) outside recorded span "
            f"({span[0]:g}, {span[1]:g})"
        )
    if (t_end - t_start) + eps < 10.0 / f_min:
        raise UsageError(
            f"window of {t_end - t_start:g} s holds fewer than 10 cycles of "
            f"f_min = {f_min:g} Hz (needs {10.0 / f_min:g} s)"
        )

    fs = ds.sample_rate
    k0 = int(math.ceil((t_start - ds.t0) * fs - eps))
    count = int(round((t_end - t_start) * fs))
    count = min(count, ds.n_samples - k0)
    if count < 2:
        raise UsageError("window retains fewer than 2 samples")

    new_channels = []
    for ch in ds.channels:
        angle = _unwrap_if_finite(ch.angle)[k0 : k0 + count]
        new_channels.append(
            replace(
                ch,
                magnitude=ch.magnitude[k0 : k0 + count],
                angle=angle,
                t0=ch.t0 + k0 / fs,
            )
        )
    return replace(ds, channels=tuple(new_channels), window=(t_start, t_end))


def _nan_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Return [start, stop) index pairs of consecutive True runs."""
    runs: list[tuple[int, int]] = []
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return runs
    start = prev = int(idx[0])
    for i in idx[1:]:
        i = int(i)
        if i != prev + 1:
            runs.append((start, prev + 1))
            start = i
        prev = i
    runs.append((start, prev + 1))
    return runs


def _flat_fraction(values: np.ndarray) -> float:
    """Fraction of samples sitting in long runs of identical values."""
    if values.size < FLAT_RUN_MIN:
        return 0.0
    same = np.concatenate(([False], np.diff(values) == 0.0))
    flat = 0
    run = 0
    for s in same:
        if s:
            run += 1
        else:
            if run + 1 >= FLAT_RUN_MIN:
                flat += run + 1
            run = 0
    if run + 1 >= FLAT_RUN_MIN:
        flat += run + 1
    return flat / values.size


def _interpolate_gaps(values: np.ndarray, circular: bool) -> tuple[np.ndarray, int]:
    """Fill NaN gaps of length <= MAX_INTERP_GAP; returns (repaired, n_filled).

    Interior gaps are linearly interpolated; gaps touching the record edge
    are filled with the nearest valid sample.  Angle series are interpolated
    on the unit circle (via cos/sin) to avoid wrap artifacts.
    """
    mask = np.isnan(values)
    if not mask.any():
        return values, 0
    idx = np.arange(values.size)
    good = ~mask
    if circular:
        c = np.interp(idx, idx[good], np.cos(values[good]))
        s = np.interp(idx, idx[good], np.sin(values[good]))
        filled = np.where(mask, np.arctan2(s, c), values)
    else:
        filled = np.where(mask, np.interp(idx, idx[good], values[good]), values)
    return filled, int(mask.sum())


def exclude_bad_channels(ds: EventDataset, max_gap_fraction: float = 0.05) -> EventDataset:
    """Reject unusable locations and repair small gaps in the rest.

    A location is excluded when its missing/flat-line sample fraction
    exceeds ``max_gap_fraction`` or when any gap is longer than
    ``MAX_INTERP_GAP`` consecutive samples.  Remaining gaps are
    interpolated and the per-channel repair count recorded.
    """
    if not 0 <= max_gap_fraction < 1:
        raise UsageError("max_gap_fraction must be in [0, 1)")

    kept: list[PhasorChannel] = []
    excluded = list(ds.excluded_locations)
    for loc in ds.locations():
        loc_channels = [ch for ch in ds.channels if ch.location_id == loc]
        n = loc_channels[0].n_samples

        bad = np.zeros(n, dtype=bool)
        for ch in loc_channels:
            bad |= np.isnan(ch.magnitude) | np.isnan(ch.angle)
        frac = bad.mean() + max(_flat_fraction(ch.magnitude) for ch in loc_channels)
        long_gap = any(stop - start > MAX_INTERP_GAP for start, stop in _nan_runs(bad))

        if frac > max_gap_fraction:
            excluded.append((loc, f"missing/flat fraction {frac:.3f} exceeds "
                                  f"{max_gap_fraction:g}"))
            continue
        if long_gap:
            excluded.append((loc, f"gap longer than {MAX_INTERP_GAP} samples"))
            continue

        for ch in loc_channels:
            mag, n_m = _interpolate_gaps(ch.magnitude, circular=False)
            ang, n_a = _interpolate_gaps(ch.angle, circular=True)
            if n_m or n_a:
                ch = replace(
                    ch,
                    magnitude=mag,
                    angle=ang,
                    interpolated_count=ch.interpolated_count + n_m + n_a,
                    nan_count=0,
                )
            kept.append(ch)

    if not kept:
        raise DataError("all locations excluded; nothing left to analyze")
    return replace(ds, channels=tuple(kept), excluded_locations=tuple(excluded))
