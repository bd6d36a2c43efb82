"""Dominant-frequency detection via averaged Hann periodograms.

Per-channel power spectra of mean-removed signals are averaged, the largest
in-band peak located, and its frequency refined by three-point parabolic
interpolation on the log-power values.  Spectra are zero-padded to at least
4x the signal length (next power of two) before transforming.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthError, NoDominantModeError, UsageError
from .io import EventDataset, Quantity
from .lifting import compute_pq

DEFAULT_BAND_HZ = (0.05, 1.0)

# A peak must exceed this multiple of the in-band median power to count.
PEAK_FLOOR_RATIO = 3.0

MIN_PAD_FACTOR = 4


@dataclass(frozen=True)
class SpectralPeak:
    """Location and size of the dominant spectral peak."""

    frequency_hz: float
    amplitude: float
    resolution_hz: float
    band_hz: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "frequency_hz": self.frequency_hz,
            "amplitude": self.amplitude,
            "resolution_hz": self.resolution_hz,
            "band_hz": list(self.band_hz),
        }


def _next_pow2(n: int) -> int:
    return 1 << (int(n - 1).bit_length())


def power_spectrum(x: np.ndarray, sample_rate: float, nfft: int | None = None):
    """One-sided Hann periodogram normalized so the bins sum to the variance.

    Returns (frequencies, power).  The normalization compensates the window
    power so Parseval holds within the window/signal correlation error.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 8:
        raise LengthError("power_spectrum needs at least 8 samples")
    if nfft is None:
        nfft = _next_pow2(MIN_PAD_FACTOR * n)
    w = np.hanning(n)
    xw = (x - x.mean()) * w
    spec = np.fft.rfft(xw, nfft)
    power = np.abs(spec) ** 2
    power *= 2.0
    power[0] /= 2.0
    if nfft % 2 == 0:
        power[-1] /= 2.0
    power /= nfft * np.sum(w**2)
    freqs = np.fft.rfftfreq(nfft, d=1.0 / sample_rate)
    return freqs, power


def _gather_rows(ds: EventDataset, signals: str) -> list[np.ndarray]:
    if signals == "magnitude":
        return [ch.magnitude for ch in ds.channels]
    if signals == "pq":
        rows = []
        for loc in ds.locations():
            v = ds.channel(loc, Quantity.VOLTAGE)
            i = ds.channel(loc, Quantity.CURRENT)
            p, q = compute_pq(v, i)
            rows += [p, q]
        return rows
    raise UsageError(f"unknown spectrum signal set {signals!r} "
                     "(expected 'magnitude' or 'pq')")


def detect_dominant_frequency(
    ds: EventDataset,
    band_hz: tuple[float, float] = DEFAULT_BAND_HZ,
    signals: str = "magnitude",
) -> SpectralPeak:
    """Find the dominant oscillation frequency in the search band.

    Raises NoDominantModeError when no in-band peak exceeds
    ``PEAK_FLOOR_RATIO`` times the median in-band power.
    """
    lo, hi = float(band_hz[0]), float(band_hz[1])
    nyq = ds.sample_rate / 2.0
    if not (0.0 < lo < hi < nyq):
        raise UsageError(
            f"search band ({lo:g}, {hi:g}) Hz must lie inside (0, {nyq:g})"
        )

    rows = _gather_rows(ds, signals)
    n = ds.n_samples
    nfft = _next_pow2(MIN_PAD_FACTOR * n)
    w = np.hanning(n)
    wsum = float(w.sum())

    mean_power = None
    coeffs = []
    for row in rows:
        row = np.asarray(row, dtype=float)
        if not np.all(np.isfinite(row)):
            raise LengthError("spectrum input contains non-finite samples")
        xw = (row - row.mean()) * w
        spec = np.fft.rfft(xw, nfft)
        coeffs.append(spec)
        p = np.abs(spec) ** 2
        mean_power = p if mean_power is None else mean_power + p
    mean_power /= len(rows)

    freqs = np.fft.rfftfreq(nfft, d=1.0 / ds.sample_rate)
    in_band = np.flatnonzero((freqs >= lo) & (freqs <= hi))
    if in_band.size < 3:
        raise UsageError("search band shorter than the spectral resolution")

    band_power = mean_power[in_band]
    floor = float(np.median(band_power))
    k_rel = int(np.argmax(band_power))
    peak_power = float(band_power[k_rel])
    if floor <= 0.0 or peak_power < PEAK_FLOOR_RATIO * floor:
        raise NoDominantModeError(
            f"no peak exceeds {PEAK_FLOOR_RATIO:g}x the median floor in "
            f"({lo:g}, {hi:g}) Hz"
        )

    k = int(in_band[k_rel])
    # parabolic refinement on log power, guarded at band borders
    delta = 0.0
    if in_band[0] < k < in_band[-1]:
        lm, l0, lp = np.log10(mean_power[k - 1 : k + 2])
        denom = lm - 2.0 * l0 + lp
        if denom < 0.0:
            delta = float(np.clip(0.5 * (lm - lp) / denom, -0.5, 0.5))
    resolution = ds.sample_rate / nfft
    frequency = (k + delta) * resolution

    amp_sq = [(2.0 * abs(c[k]) / wsum) ** 2 for c in coeffs]
    amplitude = float(np.sqrt(np.mean(amp_sq)))

    return SpectralPeak(
        frequency_hz=float(frequency),
        amplitude=amplitude,
        resolution_hz=float(resolution),
        band_hz=(lo, hi),
    )
