"""Synthetic multi-location oscillation events with known ground truth.

One location carries a planted (damped or forced) oscillation in its active
and reactive power; every other location receives an attenuated, lagged
copy propagated along a coupling graph, plus independent ambient noise.
The P/Q targets are realized into voltage/current phasor channels with the
voltage magnitude held near 1 pu (small deviation proportional to reactive
power) and bus angles phased so the source exports oscillatory energy while
the other locations absorb it.

Noise uses a counter-based generator keyed by (seed, location), so
per-location streams are independent and bit-reproducible regardless of
generation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ScenarioError
from .io import EventDataset, PhasorChannel, Quantity

DEFAULT_AMPLITUDE = 0.05  # planted P oscillation amplitude at the source, pu

# Internal construction constants.
_Q_RATIO = 0.4        # reactive oscillation relative to active
_THETA_GAIN = 0.02    # bus-angle swing per unit P oscillation, rad
_V_GAIN = 0.05        # voltage magnitude deviation per unit Q, pu
_LAG_CYCLES_PER_HOP = 0.05  # propagation lag per graph hop, in mode cycles


def chain_coupling(n: int, weight: float = 0.45) -> np.ndarray:
    """Row-stochastic coupling for a simple chain 1-2-...-n.

    Each node couples to its chain neighbors with the given weight (also
    the per-hop attenuation); the remainder sits on the diagonal.
    """
    if n < 1:
        raise ScenarioError("need at least one location")
    if not 0 < weight <= 0.5:
        raise ScenarioError("chain weight must be in (0, 0.5]")
    c = np.zeros((n, n))
    for i in range(n):
        for j in (i - 1, i + 1):
            if 0 <= j < n:
                c[i, j] = weight
        c[i, i] = 1.0 - c[i].sum()
    return c


@dataclass(frozen=True)
class SynthScenario:
    """Recipe for one synthetic event."""

    n_locations: int
    source_location: int  # 1-based location id
    mode_freq_hz: float
    mode_damping: float  # damping ratio; <= 0 grows, 0 or forced = constant
    coupling: np.ndarray | None = None  # row-stochastic (n, n); None = chain
    noise_snr_db: float | None = 30.0  # None = noiseless
    duration_s: float = 120.0
    sample_rate_hz: float = 50.0
    seed: int = 0
    amplitude: float = DEFAULT_AMPLITUDE
    forced: bool = False

    def __post_init__(self) -> None:
        if self.n_locations < 1:
            raise ScenarioError("n_locations must be >= 1")
        if not 1 <= self.source_location <= self.n_locations:
            raise ScenarioError(
                f"source_location {self.source_location} outside "
                f"1..{self.n_locations}"
            )
        if self.sample_rate_hz <= 0:
            raise ScenarioError("sample_rate_hz must be positive")
        if not 0 < self.mode_freq_hz < self.sample_rate_hz / 2:
            raise ScenarioError(
                f"mode frequency {self.mode_freq_hz} Hz outside "
                f"(0, {self.sample_rate_hz / 2:g})"
            )
        if self.duration_s * self.mode_freq_hz < 10.0:
            raise ScenarioError(
                "duration must cover at least 10 cycles of the planted mode"
            )
        if self.amplitude < 0:
            raise ScenarioError("amplitude must be >= 0")
        if not 0 <= self.seed < 2**63:
            raise ScenarioError("seed must fit in a non-negative 63-bit integer")
        if self.coupling is not None:
            c = np.asarray(self.coupling, dtype=float)
            if c.shape != (self.n_locations, self.n_locations):
                raise ScenarioError(
                    f"coupling shape {c.shape} does not match "
                    f"{self.n_locations} locations"
                )
            if np.any(c < -1e-12):
                raise ScenarioError("coupling weights must be non-negative")
            if np.any(np.abs(c.sum(axis=1) - 1.0) > 1e-6):
                raise ScenarioError("coupling rows must sum to 1")

    def to_dict(self) -> dict:
        return {
            "n_locations": self.n_locations,
            "source_location": self.source_location,
            "mode_freq_hz": self.mode_freq_hz,
            "mode_damping": self.mode_damping,
            "coupling": None if self.coupling is None
                        else [list(map(float, row)) for row in self.coupling],
            "noise_snr_db": self.noise_snr_db,
            "duration_s": self.duration_s,
            "sample_rate_hz": self.sample_rate_hz,
            "seed": self.seed,
            "amplitude": self.amplitude,
            "forced": self.forced,
        }


def scenario_from_dict(raw: dict) -> SynthScenario:
    known = {
        "n_locations", "source_location", "mode_freq_hz", "mode_damping",
        "coupling", "noise_snr_db", "duration_s", "sample_rate_hz", "seed",
        "amplitude", "forced",
    }
    unknown = set(raw) - known
    if unknown:
        raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
    kwargs = dict(raw)
    if kwargs.get("coupling") is not None:
        kwargs["coupling"] = np.asarray(kwargs["coupling"], dtype=float)
    return SynthScenario(**kwargs)


@dataclass(frozen=True)
class GroundTruth:
    source_location: int
    mode_freq_hz: float
    attenuation: dict[int, float]  # planted amplitude scale per location
    lag_s: dict[int, float]

    def to_dict(self) -> dict:
        return {
            "source_location": self.source_location,
            "mode_freq_hz": self.mode_freq_hz,
            "attenuation": {str(k): v for k, v in sorted(self.attenuation.items())},
            "lag_s": {str(k): v for k, v in sorted(self.lag_s.items())},
        }


def _propagation(coupling: np.ndarray, source_idx: int) -> tuple[np.ndarray, np.ndarray]:
    """Hop distance and path-product attenuation from the source via BFS."""
    n = coupling.shape[0]
    dist = np.full(n, -1, dtype=int)
    atten = np.zeros(n)
    dist[source_idx] = 0
    atten[source_idx] = 1.0
    frontier = [source_idx]
    while frontier:
        nxt: list[int] = []
        for u in frontier:
            for v in range(n):
                if v != u and coupling[v, u] > 1e-12 and dist[v] < 0:
                    dist[v] = dist[u] + 1
                    atten[v] = atten[u] * float(coupling[v, u])
                    nxt.append(v)
        frontier = nxt
    return dist, atten


def generate_event(scenario: SynthScenario) -> tuple[EventDataset, GroundTruth]:
    """Realize a scenario into phasor channels plus its ground truth."""
    sc = scenario
    fs = sc.sample_rate_hz
    n = int(round(sc.duration_s * fs))
    t = np.arange(n) / fs
    omega = 2.0 * math.pi * sc.mode_freq_hz

    coupling = sc.coupling
    if coupling is None:
        coupling = chain_coupling(sc.n_locations)
    src = sc.source_location - 1
    dist, atten = _propagation(coupling, src)

    lag_per_hop = _LAG_CYCLES_PER_HOP / sc.mode_freq_hz
    zeta = 0.0 if sc.forced else sc.mode_damping

    # Noise scale tied to the nominal planted amplitude so an amplitude-0
    # scenario still produces ambient noise at the requested level.
    if sc.noise_snr_db is None:
        sigma = 0.0
    else:
        ref = sc.amplitude if sc.amplitude > 0 else DEFAULT_AMPLITUDE
        sigma = (ref / math.sqrt(2.0)) / 10.0 ** (sc.noise_snr_db / 20.0)

    channels = []
    attenuation: dict[int, float] = {}
    lags: dict[int, float] = {}
    for idx in range(sc.n_locations):
        loc = idx + 1
        reachable = dist[idx] >= 0
        a = float(atten[idx]) if reachable else 0.0
        lag = float(dist[idx]) * lag_per_hop if reachable else 0.0
        attenuation[loc] = a
        lags[loc] = lag

        ts = t - lag
        envelope = np.exp(-zeta * omega * ts)
        osc = sc.amplitude * a * envelope * np.sin(omega * ts)
        # source exports oscillatory energy (angle lags P by a quarter
        # cycle); every other location is phased to absorb it
        sign = 1.0 if idx == src else -1.0
        dtheta = -sign * _THETA_GAIN * sc.amplitude * a * envelope * np.cos(omega * ts)

        if sigma > 0.0:
            rng = np.random.Generator(
                np.random.Philox(key=np.array([sc.seed, loc], dtype=np.uint64))
            )
            noise_p = sigma * rng.standard_normal(n)
            noise_q = sigma * rng.standard_normal(n)
        else:
            noise_p = noise_q = 0.0

        dp = osc + noise_p
        dq = _Q_RATIO * osc + noise_q

        p = 0.8 + 0.02 * (loc % 7) + dp
        q = 0.2 + 0.01 * (loc % 5) + dq
        vm = 1.0 + 0.01 * ((loc % 5) - 2) + _V_GAIN * dq
        va = -0.1 * max(dist[idx], 0) + dtheta
        if np.any(vm <= 0.0):
            raise ScenarioError(
                "infeasible realization: voltage magnitude driven non-positive; "
                "reduce amplitude or noise"
            )
        im = np.hypot(p, q) / vm
        ia = va - np.arctan2(q, p)
        if not (np.all(np.isfinite(im)) and np.all(np.isfinite(ia))):
            raise ScenarioError("infeasible realization: non-finite current phasor")

        common = dict(location_id=loc, sample_rate=fs, t0=0.0, units="pu")
        channels.append(PhasorChannel(
            quantity=Quantity.VOLTAGE, magnitude=vm, angle=va, **common))
        channels.append(PhasorChannel(
            quantity=Quantity.CURRENT, magnitude=im, angle=ia, **common))

    ds = EventDataset(
        channels=tuple(channels),
        window=(0.0, n / fs),
        sample_rate=fs,
        units="pu",
    )
    truth = GroundTruth(
        source_location=sc.source_location,
        mode_freq_hz=sc.mode_freq_hz,
        attenuation=attenuation,
        lag_s=lags,
    )
    return ds, truth
