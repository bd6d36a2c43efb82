"""Observable dictionaries: power computation and snapshot lifting.

The default dictionary holds active and reactive power per retained
location.  Optional extensions add raw voltage magnitude, raw unwrapped
voltage angle, monomials of P/Q up to a configured degree, and cos/sin of
the voltage angle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UsageError
from .filters import FilterSpec, apply_zero_phase, crop_central
from .io import EventDataset, PhasorChannel, Quantity

ACTIVE_POWER = "active_power"
REACTIVE_POWER = "reactive_power"
RAW_MAGNITUDE = "raw_magnitude"
RAW_ANGLE = "raw_angle"
POLYNOMIAL = "polynomial"
TRIG = "trig"


def compute_pq(voltage: PhasorChannel, current: PhasorChannel):
    """Single-phase-equivalent active/reactive power from a V/I phasor pair.

    P = Vm*Im*cos(Va - Ia), Q = Vm*Im*sin(Va - Ia).  Invariant under a
    common rotation of both angles.
    """
    if voltage.quantity != Quantity.VOLTAGE or current.quantity != Quantity.CURRENT:
        raise UsageError(
            f"compute_pq needs a (voltage, current) pair, got "
            f"({voltage.quantity.value}, {current.quantity.value})"
        )
    if voltage.n_samples != current.n_samples:
        raise DataError(
            f"length mismatch: voltage has {voltage.n_samples} samples, "
            f"current has {current.n_samples}"
        )
    s = voltage.magnitude * current.magnitude
    diff = voltage.angle - current.angle
    return s * np.cos(diff), s * np.sin(diff)


@dataclass(frozen=True)
class ObservableDef:
    """One scalar observable: what it measures and where it comes from."""

    name: str
    kind: str
    location_id: int
    provenance: tuple[str, ...]
    degree: int = 1
    base: str = "P"  # for polynomial kinds
    trig_fn: str = "cos"  # for trig kinds

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "location": self.location_id}


@dataclass(frozen=True)
class DictionaryConfig:
    """Which observables to build per retained location."""

    include_power: bool = True
    include_raw_magnitude: bool = False
    include_raw_angle: bool = False
    include_trig: bool = False
    poly_degree: int = 1
    poly_targets: tuple[str, ...] = ("P", "Q")

    def __post_init__(self) -> None:
        if self.poly_degree < 1:
            raise UsageError("poly_degree must be >= 1")
        bad = set(self.poly_targets) - {"P", "Q"}
        if bad:
            raise UsageError(f"unknown poly targets {sorted(bad)}")


def build_dictionary(
    ds: EventDataset, config: DictionaryConfig | None = None
) -> tuple[ObservableDef, ...]:
    """Enumerate observables over the dataset's retained locations."""
    config = config or DictionaryConfig()
    locations = ds.locations()
    if not locations:
        raise DataError("dataset has no retained locations")

    defs: list[ObservableDef] = []
    for loc in locations:
        vm, va = f"loc{loc}_Vm", f"loc{loc}_Va"
        im, ia = f"loc{loc}_Im", f"loc{loc}_Ia"
        if config.include_power:
            defs.append(ObservableDef(f"P@loc{loc}", ACTIVE_POWER, loc, (vm, va, im, ia)))
            defs.append(ObservableDef(f"Q@loc{loc}", REACTIVE_POWER, loc, (vm, va, im, ia)))
        for d in range(2, config.poly_degree + 1):
            for base in config.poly_targets:
                defs.append(
                    ObservableDef(
                        f"{base}^{d}@loc{loc}", POLYNOMIAL, loc,
                        (vm, va, im, ia), degree=d, base=base,
                    )
                )
        if config.include_raw_magnitude:
            defs.append(ObservableDef(f"V@loc{loc}", RAW_MAGNITUDE, loc, (vm,)))
        if config.include_raw_angle:
            defs.append(ObservableDef(f"theta@loc{loc}", RAW_ANGLE, loc, (va,)))
        if config.include_trig:
            defs.append(ObservableDef(f"cos_theta@loc{loc}", TRIG, loc, (va,), trig_fn="cos"))
            defs.append(ObservableDef(f"sin_theta@loc{loc}", TRIG, loc, (va,), trig_fn="sin"))
    if not defs:
        raise UsageError("dictionary config selects no observables")
    return tuple(defs)


def evaluate_observable(obs: ObservableDef, ds: EventDataset) -> np.ndarray:
    v = ds.channel(obs.location_id, Quantity.VOLTAGE)
    if obs.kind == RAW_MAGNITUDE:
        return v.magnitude.astype(float, copy=True)
    if obs.kind == RAW_ANGLE:
        return np.unwrap(v.angle)
    if obs.kind == TRIG:
        fn = np.cos if obs.trig_fn == "cos" else np.sin
        return fn(v.angle)
    i = ds.channel(obs.location_id, Quantity.CURRENT)
    p, q = compute_pq(v, i)
    if obs.kind == ACTIVE_POWER:
        return p
    if obs.kind == REACTIVE_POWER:
        return q
    if obs.kind == POLYNOMIAL:
        return (p if obs.base == "P" else q) ** obs.degree
    raise UsageError(f"unknown observable kind {obs.kind!r}")


@dataclass(frozen=True)
class SnapshotMatrices:
    """Mean-removed lifted snapshots and their one-step successors.

    ``current[:, j]`` and ``successor[:, j]`` hold the lifted state at
    consecutive samples, so ``successor[:, j] == current[:, j + 1]`` for
    j < M - 1.
    """

    current: np.ndarray
    successor: np.ndarray
    dt: float
    observable_names: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.current.shape != self.successor.shape or self.current.ndim != 2:
            raise DataError("current/successor shapes differ")
        if self.current.shape[0] != len(self.observable_names):
            raise DataError("observable name count does not match row count")
        if self.dt <= 0:
            raise DataError("dt must be positive")

    @property
    def n_observables(self) -> int:
        return self.current.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.current.shape[1]


def lift_snapshots(
    ds: EventDataset,
    dictionary: tuple[ObservableDef, ...],
    band: FilterSpec | None = None,
    keep: tuple[float, float] | None = None,
) -> SnapshotMatrices:
    """Evaluate the dictionary and build shift-pair snapshot matrices.

    Each observable series is (optionally) zero-phase band-pass filtered and
    centrally cropped, then mean-removed, and finally split into the
    (current, successor) pair.
    """
    if not dictionary:
        raise UsageError("empty dictionary")
    series = []
    for obs in dictionary:
        z = evaluate_observable(obs, ds)
        if not np.all(np.isfinite(z)):
            raise DataError(f"observable {obs.name} evaluates to non-finite values")
        if band is not None:
            z = apply_zero_phase(band, z)
        if keep is not None:
            z = crop_central(z, keep)
        series.append(z - z.mean())

    z = np.vstack(series)
    n = z.shape[1]
    if n < 2:
        raise DataError("need at least 2 samples to form shift pairs")
    current, successor = z[:, :-1], z[:, 1:]
    if current.shape[1] < current.shape[0]:
        warnings.warn(
            f"fewer snapshots ({current.shape[1]}) than observables "
            f"({current.shape[0]}); moment matrices will be rank-deficient",
            RuntimeWarning,
            stacklevel=2,
        )
    return SnapshotMatrices(
        current=current,
        successor=successor,
        dt=1.0 / ds.sample_rate,
        observable_names=tuple(obs.name for obs in dictionary),
    )
