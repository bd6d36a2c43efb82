"""Classical localization baselines.

Dissipating-energy flow: the oscillation-band increments of active power
against bus angle and reactive power against log voltage magnitude are
accumulated into a running energy; a positive fitted slope marks a location
exporting oscillatory energy (a candidate source), a negative slope an
absorber.  Increments are trapezoidal, which makes the whole chain exactly
antisymmetric under time reversal.

Q-V phase: the phase of reactive power relative to voltage magnitude at the
oscillation frequency, from single-bin Hann DFTs, with a two-segment
magnitude-squared coherence gate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, LengthError, UsageError
from .filters import BANDPASS, FilterSpec, apply_zero_phase, crop_central, design_butterworth
from .io import EventDataset, Quantity
from .lifting import compute_pq

DEFAULT_CROP = (0.2, 0.8)
DEFAULT_PHASE_THRESHOLD_DEG = 30.0
COHERENCE_FLOOR = 0.5
QV_RELATIVE_BAND = (0.9, 1.1)
QV_FILTER_ORDER = 4


@dataclass(frozen=True)
class LocationEnergy:
    energy_rate: float  # fitted slope of the running energy, 1/s units
    total_energy: float  # final value of the running energy
    trend_r2: float  # goodness of the linear fit, in [0, 1]

    def to_dict(self) -> dict:
        return {
            "energy_rate": self.energy_rate,
            "total_energy": self.total_energy,
            "trend_r2": self.trend_r2,
        }


@dataclass(frozen=True)
class DefResult:
    per_location: dict[int, LocationEnergy]
    ranking_injecting: tuple[int, ...]  # positive rates, largest first
    ranking_absorbing: tuple[int, ...]  # negative rates, most negative first

    def to_dict(self) -> dict:
        return {
            "per_location": [
                {"location": loc, **self.per_location[loc].to_dict()}
                for loc in sorted(self.per_location)
            ],
            "ranking_injecting": list(self.ranking_injecting),
            "ranking_absorbing": list(self.ranking_absorbing),
        }


def _slope_and_r2(t: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    tc = t - t.mean()
    wc = w - w.mean()
    denom = float(tc @ tc)
    if denom == 0.0:
        return 0.0, 0.0
    slope = float(tc @ wc) / denom
    ss_tot = float(wc @ wc)
    if ss_tot == 0.0:
        return slope, 0.0
    resid = wc - slope * tc
    return slope, 1.0 - float(resid @ resid) / ss_tot


def def_energy(
    ds: EventDataset,
    band: FilterSpec,
    keep: tuple[float, float] = DEFAULT_CROP,
) -> DefResult:
    """Dissipating-energy rates per location over the oscillation band.

    For each location: band-pass P, Q, the unwrapped voltage angle, and
    ln(V); crop the central window; accumulate trapezoidal increments
    dW = P d(angle) + Q d(ln V); fit a line to the running energy.
    """
    dt = 1.0 / ds.sample_rate
    per_location: dict[int, LocationEnergy] = {}
    for loc in ds.locations():
        v = ds.channel(loc, Quantity.VOLTAGE)
        i = ds.channel(loc, Quantity.CURRENT)
        if np.any(v.magnitude <= 0.0):
            raise DataError(f"location {loc}: non-positive voltage magnitude")
        p, q = compute_pq(v, i)
        theta = np.unwrap(v.angle)
        log_v = np.log(v.magnitude)

        dp = crop_central(apply_zero_phase(band, p), keep)
        dq = crop_central(apply_zero_phase(band, q), keep)
        dth = crop_central(apply_zero_phase(band, theta), keep)
        dlv = crop_central(apply_zero_phase(band, log_v), keep)

        inc = 0.5 * (dp[:-1] + dp[1:]) * np.diff(dth) + \
              0.5 * (dq[:-1] + dq[1:]) * np.diff(dlv)
        w = np.concatenate(([0.0], np.cumsum(inc)))
        t = np.arange(w.size) * dt
        rate, r2 = _slope_and_r2(t, w)
        per_location[loc] = LocationEnergy(
            energy_rate=rate, total_energy=float(w[-1]), trend_r2=r2
        )

    injecting = tuple(sorted(
        (loc for loc, e in per_location.items() if e.energy_rate > 0),
        key=lambda loc: (-per_location[loc].energy_rate, loc),
    ))
    absorbing = tuple(sorted(
        (loc for loc, e in per_location.items() if e.energy_rate < 0),
        key=lambda loc: (per_location[loc].energy_rate, loc),
    ))
    return DefResult(
        per_location=per_location,
        ranking_injecting=injecting,
        ranking_absorbing=absorbing,
    )


@dataclass(frozen=True)
class QvPhaseEntry:
    phase_deg: float  # angle(Q) - angle(V) at the oscillation bin, (-180, 180]
    coherence: float  # two-segment magnitude-squared coherence, [0, 1]
    in_phase: bool

    def to_dict(self) -> dict:
        return {
            "phase_deg": self.phase_deg,
            "coherence": self.coherence,
            "in_phase": self.in_phase,
        }


@dataclass(frozen=True)
class QvPhaseResult:
    frequency_hz: float
    threshold_deg: float
    per_location: dict[int, QvPhaseEntry]

    def to_dict(self) -> dict:
        return {
            "frequency_hz": self.frequency_hz,
            "threshold_deg": self.threshold_deg,
            "per_location": [
                {"location": loc, **self.per_location[loc].to_dict()}
                for loc in sorted(self.per_location)
            ],
        }


def _wrap_degrees(d: float) -> float:
    wrapped = (d + 180.0) % 360.0 - 180.0
    return 180.0 if wrapped == -180.0 else wrapped


def _single_bin(x: np.ndarray, k: int) -> complex:
    n = x.size
    w = np.hanning(n)
    phase = np.exp(-2j * np.pi * k * np.arange(n) / n)
    return complex(np.sum(w * (x - x.mean()) * phase))


def qv_phase(
    ds: EventDataset,
    frequency_hz: float,
    threshold_deg: float = DEFAULT_PHASE_THRESHOLD_DEG,
    keep: tuple[float, float] = DEFAULT_CROP,
) -> QvPhaseResult:
    """Q-V phase relationship per location at the oscillation frequency.

    Both series are band-pass filtered around the frequency, cropped, and
    compared at the DFT bin nearest the frequency.  A location is in phase
    when |phase| <= threshold AND the two-segment coherence >= 0.5.
    """
    if frequency_hz <= 0:
        raise UsageError("frequency must be positive")
    if not 0 < threshold_deg <= 180:
        raise UsageError("threshold must be in (0, 180] degrees")
    band = design_butterworth(
        BANDPASS,
        QV_FILTER_ORDER,
        (QV_RELATIVE_BAND[0] * frequency_hz, QV_RELATIVE_BAND[1] * frequency_hz),
        ds.sample_rate,
    )

    per_location: dict[int, QvPhaseEntry] = {}
    for loc in ds.locations():
        v = ds.channel(loc, Quantity.VOLTAGE)
        i = ds.channel(loc, Quantity.CURRENT)
        _, q = compute_pq(v, i)

        qf = crop_central(apply_zero_phase(band, q), keep)
        vf = crop_central(apply_zero_phase(band, v.magnitude.astype(float)), keep)

        n = qf.size
        cycles = n / ds.sample_rate * frequency_hz
        if cycles < 3.0:
            raise LengthError(
                f"cropped window holds {cycles:.2f} cycles of "
                f"{frequency_hz:g} Hz; need at least 3"
            )
        k = int(round(frequency_hz * n / ds.sample_rate))
        cq = _single_bin(qf, k)
        cv = _single_bin(vf, k)
        phase = _wrap_degrees(np.degrees(np.angle(cq) - np.angle(cv)))

        half = n // 2
        kh = int(round(frequency_hz * half / ds.sample_rate))
        cross = 0.0 + 0.0j
        power_q = power_v = 0.0
        for seg in (slice(0, half), slice(half, 2 * half)):
            sq = _single_bin(qf[seg], kh)
            sv = _single_bin(vf[seg], kh)
            cross += sq * np.conj(sv)
            power_q += abs(sq) ** 2
            power_v += abs(sv) ** 2
        if power_q == 0.0 or power_v == 0.0:
            coherence = 0.0
        else:
            coherence = float(abs(cross) ** 2 / (power_q * power_v))

        per_location[loc] = QvPhaseEntry(
            phase_deg=float(phase),
            coherence=coherence,
            in_phase=bool(abs(phase) <= threshold_deg and coherence >= COHERENCE_FLOOR),
        )
    return QvPhaseResult(
        frequency_hz=frequency_hz,
        threshold_deg=threshold_deg,
        per_location=per_location,
    )


def qv_phase_sweep(
    ds: EventDataset,
    frequency_hz: float,
    threshold_deg: float = DEFAULT_PHASE_THRESHOLD_DEG,
    n_windows: int = 5,
) -> dict[int, dict]:
    """Window-sensitivity sweep: phase across half-overlapping sub-windows.

    Reports per location the phase of each sub-window and the spread; no
    pass/fail verdict is attached.
    """
    if n_windows < 2:
        raise UsageError("sweep needs at least 2 windows")
    n = ds.n_samples
    width = n // ((n_windows + 1) // 2 + 1) * 2
    if width < 4:
        raise LengthError("record too short for the requested sweep")
    step = max(1, (n - width) // (n_windows - 1))

    from .io import align_and_window  # local to avoid cycle at import time

    phases: dict[int, list[float]] = {loc: [] for loc in ds.locations()}
    fs = ds.sample_rate
    for j in range(n_windows):
        k0 = min(j * step, n - width)
        sub = align_and_window(
            ds, ds.t0 + k0 / fs, ds.t0 + (k0 + width) / fs,
            f_min=10.0 * fs / width,
        )
        result = qv_phase(sub, frequency_hz, threshold_deg)
        for loc, entry in result.per_location.items():
            phases[loc].append(entry.phase_deg)
    out: dict[int, dict] = {}
    for loc, values in phases.items():
        arr = np.asarray(values)
        out[loc] = {
            "phases_deg": [float(v) for v in arr],
            "spread_deg": float(arr.max() - arr.min()),
        }
    return out
