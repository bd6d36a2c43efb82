"""Butterworth filtering in second-order sections, zero-phase application,
and central cropping.

Design path: analog Butterworth prototype, corner pre-warp, bilinear
transform, factored into biquad sections ordered by ascending pole radius
(scipy.signal does the heavy lifting).  Zero-phase application runs the
cascade forward and backward over reflection-padded data; the result is
additionally symmetrized so that filtering commutes with time reversal
exactly, which downstream energy-flow diagnostics rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as _sig

from .errors import DesignError, LengthError

SUPPORTED_ORDERS = (2, 4, 6, 8)

LOWPASS = "lowpass"
BANDPASS = "bandpass"


@dataclass(frozen=True)
class FilterSpec:
    """A designed digital filter.

    ``order`` is the analog prototype order; a band-pass realization of
    prototype order ``n`` has ``2n`` poles.  ``sections`` is an ``(k, 6)``
    array of biquad coefficients ``b0 b1 b2 a0 a1 a2``.
    """

    kind: str
    order: int
    edges_hz: tuple[float, ...]
    sample_rate: float
    sections: np.ndarray

    @property
    def digital_order(self) -> int:
        return 2 * self.sections.shape[0]

    def response(self, freqs_hz) -> np.ndarray:
        """Complex frequency response H(e^{j2*pi*f/fs}) at the given frequencies."""
        f = np.atleast_1d(np.asarray(freqs_hz, dtype=float))
        zinv = np.exp(-2j * np.pi * f / self.sample_rate)
        h = np.ones_like(zinv, dtype=complex)
        for b0, b1, b2, a0, a1, a2 in self.sections:
            h *= (b0 + b1 * zinv + b2 * zinv**2) / (a0 + a1 * zinv + a2 * zinv**2)
        return h

    def pole_radii(self) -> np.ndarray:
        """Largest pole magnitude of each section."""
        radii = []
        for _, _, _, a0, a1, a2 in self.sections:
            radii.append(np.max(np.abs(np.roots([a0, a1, a2]))))
        return np.asarray(radii)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "order": self.order,
            "edges_hz": list(self.edges_hz),
            "sample_rate_hz": self.sample_rate,
            "sections": [[float(c) for c in row] for row in self.sections],
        }


def design_butterworth(
    kind: str,
    order: int,
    edges_hz,
    sample_rate: float,
) -> FilterSpec:
    """Design a low-pass or band-pass Butterworth filter.

    Corner frequencies must lie strictly inside (0, sample_rate/2).  The
    returned sections are each individually stable and are ordered by
    ascending pole radius.
    """
    if kind not in (LOWPASS, BANDPASS):
        raise DesignError(f"unsupported filter kind {kind!r}")
    if order not in SUPPORTED_ORDERS:
        raise DesignError(f"order must be one of {SUPPORTED_ORDERS}, got {order}")
    if sample_rate <= 0:
        raise DesignError("sample_rate must be positive")

    edges = tuple(float(e) for e in np.atleast_1d(edges_hz))
    nyq = sample_rate / 2.0
    expected = 1 if kind == LOWPASS else 2
    if len(edges) != expected:
        raise DesignError(f"{kind} needs {expected} corner(s), got {len(edges)}")
    for e in edges:
        if not 0.0 < e < nyq:
            raise DesignError(
                f"corner {e:g} Hz outside (0, {nyq:g}) for sample rate "
                f"{sample_rate:g} Hz"
            )
    if kind == BANDPASS and edges[0] >= edges[1]:
        raise DesignError(f"band edges inverted: {edges}")

    corners = edges[0] if kind == LOWPASS else list(edges)
    z, p, k = _sig.butter(order, corners, btype=kind, fs=sample_rate, output="zpk")
    sections = _sig.zpk2sos(z, p, k, pairing="nearest")
    # normalize a0 to 1 and order sections by ascending pole radius
    sections = sections / sections[:, 3:4]
    radii = [np.max(np.abs(np.roots(row[3:]))) for row in sections]
    sections = sections[np.argsort(radii, kind="stable")]

    spec = FilterSpec(
        kind=kind,
        order=order,
        edges_hz=edges,
        sample_rate=sample_rate,
        sections=sections,
    )

    if np.any(spec.pole_radii() >= 1.0):
        raise DesignError("designed filter has a section with poles on or "
                          "outside the unit circle")
    if kind == BANDPASS:
        dc = abs(spec.response(0.0)[0])
        if dc > 1e-10:
            raise DesignError(f"band-pass DC gain {dc:g} exceeds 1e-10")
        center = float(np.sqrt(edges[0] * edges[1]))
        g = abs(spec.response(center)[0])
        if not 0.99 <= g <= 1.01:
            raise DesignError(
                f"gain {g:.4f} at geometric center {center:g} Hz outside [0.99, 1.01]"
            )
    return spec


def apply_zero_phase(spec: FilterSpec, x) -> np.ndarray:
    """Zero-phase (forward-backward) filtering with reflection padding.

    The input is padded by 3x the digital filter order at each end with
    reflected samples, run through the cascade forward and backward, and the
    padding stripped.  The same procedure is applied to the time-mirrored
    signal and the two results averaged, making the operation exactly
    equivariant under time reversal.  Effective magnitude response is
    |H(f)|^2 with zero phase shift.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise LengthError("apply_zero_phase expects a 1-D signal")
    order = spec.digital_order
    if x.size <= 6 * order:
        raise LengthError(
            f"signal of {x.size} samples too short for zero-phase filtering "
            f"(needs more than {6 * order})"
        )
    pad = 3 * order
    xp = np.pad(x, pad, mode="reflect")
    forward = _sig.sosfiltfilt(spec.sections, xp, padlen=0)
    mirrored = _sig.sosfiltfilt(spec.sections, xp[::-1], padlen=0)[::-1]
    y = 0.5 * (forward + mirrored)
    return y[pad:-pad]


def crop_central(x, keep: tuple[float, float] = (0.2, 0.8)) -> np.ndarray:
    """Keep the [keep[0], keep[1]) central fraction of a series (by index)."""
    lo, hi = keep
    if not (0.0 <= lo < hi <= 1.0):
        raise LengthError(f"invalid keep fractions {keep}")
    x = np.asarray(x)
    n = x.shape[-1]
    start, stop = int(np.floor(lo * n)), int(np.floor(hi * n))
    if stop - start < 2:
        raise LengthError(
            f"cropping {keep} of {n} samples leaves fewer than 2"
        )
    return x[..., start:stop]
