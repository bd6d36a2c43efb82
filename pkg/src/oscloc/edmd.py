"""Reduced Koopman-operator estimation and participation-factor ranking.

From mean-removed lifted snapshots the module assembles second-moment
matrices, truncates via an SVD rank choice, eigendecomposes the reduced
one-step operator, converts eigenvalues to continuous time, and scores each
measurement location by how strongly its observables participate in a
target mode.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConditioningError, NumericError, UsageError
from .lifting import ObservableDef, SnapshotMatrices

# Relative singular-value cutoff used for pseudoinverses and rank floors.
SVD_RCOND = 1e-12

# |sum_s p_s - 1| beyond this refuses to rank; beyond 1e-8 only warns.
TRACE_HARD_TOL = 1e-6
TRACE_WARN_TOL = 1e-8

INVERSION_WARN_TOL = 1e-6

RIGID_FLAG = "rigid"
NYQUIST_FLAG = "nyquist"
OUT_OF_BAND_FLAG = "out_of_band"

# |mu - 1| below this is treated as the rigid (non-oscillatory, undamped)
# drift mode; a data-recovered unit eigenvalue is never bit-exact.
RIGID_TOL = 1e-9


@dataclass(frozen=True)
class GramPair:
    """Second-moment matrices of the lifted data.

    ``gram``  = current @ current.T / M   (symmetric positive semidefinite)
    ``cross`` = current @ successor.T / M
    """

    gram: np.ndarray
    cross: np.ndarray
    n_snapshots: int


def assemble_gram(snap: SnapshotMatrices) -> GramPair:
    """Accumulate the averaged moment matrices from snapshot pairs."""
    x, y = snap.current, snap.successor
    m = snap.n_snapshots
    if m < 1:
        raise UsageError("need at least one snapshot pair")
    gram = x @ x.T / m
    gram = 0.5 * (gram + gram.T)  # enforce exact symmetry
    cross = x @ y.T / m
    if not (np.all(np.isfinite(gram)) and np.all(np.isfinite(cross))):
        raise NumericError("non-finite entries in moment matrices")
    return GramPair(gram=gram, cross=cross, n_snapshots=m)


def choose_rank(singular_values, override: int | None = None) -> int:
    """Pick a truncation rank from the gram-matrix singular value decay.

    With no override: values below SVD_RCOND of the largest are dropped,
    the sharpest elbow of the log10 decay (largest forward second
    difference) is located, and everything up to that cliff retained, with
    a floor of 2 so conjugate pairs survive.  An override is clamped to the
    available count.
    """
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0 or s[0] <= 0:
        raise NumericError("no positive singular values")
    if override is not None:
        if override < 1:
            raise UsageError(f"rank override must be >= 1, got {override}")
        return min(int(override), s.size)

    kept = s[s > SVD_RCOND * s[0]]
    count = kept.size
    if count < 2:
        warnings.warn(
            "fewer than 2 singular values above threshold; conjugate pairs "
            "cannot be resolved",
            RuntimeWarning,
            stacklevel=2,
        )
        return count
    if count < 3:
        return 2
    logs = np.log10(kept)
    # d2[j] large where the drop after position j dwarfs the next drop
    d2 = logs[:-2] - 2.0 * logs[1:-1] + logs[2:]
    rank = int(np.argmax(d2)) + 1
    return max(2, rank)


@dataclass(frozen=True)
class KoopmanModel:
    """Reduced one-step operator on lifted values, with its eigenstructure.

    ``right_vectors`` columns are mode shapes in observable space;
    ``left_vectors`` rows are their duals (pseudoinverse), so
    left_vectors @ right_vectors is the identity.
    """

    rank: int
    projection_basis: np.ndarray  # (n_d, r) left singular vectors of gram
    singular_values: np.ndarray  # (r,)
    reduced_operator: np.ndarray  # (r, r)
    eigenvalues: np.ndarray  # (r,) complex, discrete-time
    right_vectors: np.ndarray  # (n_d, r)
    left_vectors: np.ndarray  # (r, n_d)
    dt: float
    observable_names: tuple[str, ...]
    warnings: tuple[str, ...] = ()

    @property
    def n_observables(self) -> int:
        return self.right_vectors.shape[0]

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "dt": self.dt,
            "singular_values": [float(v) for v in self.singular_values],
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "warnings": list(self.warnings),
        }


def reduce_and_decompose(
    gram: GramPair, snap: SnapshotMatrices, rank: int
) -> KoopmanModel:
    """Project the one-step operator onto the dominant data subspace and
    eigendecompose it.

    The operator is built so it propagates lifted VALUE vectors (the
    transposed convention): with an identity dictionary on a linear system
    it reduces to a similarity transform of the true state matrix, which is
    what makes right/left eigenvector products meaningful participation
    factors.
    """
    u, s, vt = np.linalg.svd(gram.gram)
    available = int(np.count_nonzero(s > SVD_RCOND * s[0]))
    if rank < 1 or rank > available:
        raise NumericError(
            f"rank {rank} outside the usable range [1, {available}] for this data"
        )
    basis = u[:, :rank]
    right_factor = vt[:rank].T
    sigma = s[:rank]

    # value-propagation operator: cross.T = successor @ current.T / M
    reduced = basis.T @ gram.cross.T @ right_factor / sigma

    try:
        mu, vecs = np.linalg.eig(reduced)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc

    residual = np.linalg.norm(reduced @ vecs - vecs * mu, axis=0)
    scale = np.linalg.norm(vecs, axis=0)
    worst = float(np.max(residual / scale))
    if worst > 1e-8:
        raise NumericError(f"eigenpair residual {worst:.3e} exceeds 1e-8")

    model_warnings: list[str] = []
    right = basis @ vecs
    left = np.linalg.pinv(right, rcond=SVD_RCOND)
    inversion = float(np.max(np.abs(left @ right - np.eye(rank))))
    if inversion > INVERSION_WARN_TOL:
        model_warnings.append(
            f"left/right eigenvector inversion error {inversion:.3e} "
            f"exceeds {INVERSION_WARN_TOL:g}; participation may be unreliable"
        )

    return KoopmanModel(
        rank=rank,
        projection_basis=basis,
        singular_values=sigma,
        reduced_operator=reduced,
        eigenvalues=mu,
        right_vectors=right,
        left_vectors=left,
        dt=snap.dt,
        observable_names=snap.observable_names,
        warnings=tuple(model_warnings),
    )


@dataclass(frozen=True)
class ModeEstimate:
    """A continuous-time mode: eigenvalue, frequency, damping, and shape."""

    eigenvalue: complex  # 1/s, principal logarithm of the discrete eigenvalue
    frequency_hz: float
    damping_ratio: float | None
    mode_index: int  # column into the model's eigenstructure
    shape: np.ndarray
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "eigenvalue": [self.eigenvalue.real, self.eigenvalue.imag],
            "frequency_hz": self.frequency_hz,
            "damping_ratio": self.damping_ratio,
            "mode_index": self.mode_index,
            "flags": list(self.flags),
        }


def to_continuous(model: KoopmanModel) -> list[ModeEstimate]:
    """Map discrete eigenvalues to continuous time via the principal log.

    lambda = ln(mu) / dt; frequency = |Im lambda| / 2 pi; damping ratio =
    -Re lambda / |lambda|.  mu = 1 yields a rigid (non-oscillatory,
    undamped) mode with damping reported as None.  Negative-real
    eigenvalues sit at the Nyquist alias frequency and are flagged.
    Near-zero eigenvalues are dropped with a warning.  Modes are sorted by
    damping ratio ascending, rigid modes last.
    """
    modes: list[ModeEstimate] = []
    for i, mu in enumerate(model.eigenvalues):
        mu = complex(mu)  # eig may return a real array; log needs the branch
        if abs(mu) < 1e-300:
            warnings.warn(
                f"discrete eigenvalue {i} is numerically zero; mode dropped",
                RuntimeWarning,
                stacklevel=2,
            )
            continue
        lam = complex(np.log(mu)) / model.dt
        flags: tuple[str, ...] = ()
        if abs(mu - 1.0) < RIGID_TOL:
            damping: float | None = None
            freq = 0.0
            flags += (RIGID_FLAG,)
        else:
            freq = abs(lam.imag) / (2.0 * np.pi)
            damping = -lam.real / abs(lam)
        if mu.real < 0.0 and abs(mu.imag) < 1e-12 * abs(mu.real):
            flags += (NYQUIST_FLAG,)
        modes.append(
            ModeEstimate(
                eigenvalue=lam,
                frequency_hz=float(freq),
                damping_ratio=damping,
                mode_index=i,
                shape=model.right_vectors[:, i],
                flags=flags,
            )
        )
    modes.sort(key=lambda m: (m.damping_ratio is None,
                              m.damping_ratio if m.damping_ratio is not None else 0.0))
    return modes


def select_target_mode(modes: list[ModeEstimate], frequency_hz: float) -> ModeEstimate:
    """Pick the mode to localize: nearest to the detected frequency within
    [0.8, 1.2] of it, ties broken by lower damping; if none lies in that
    band, the globally nearest mode is returned flagged out-of-band."""
    if not modes:
        raise UsageError("no modes to select from")
    if frequency_hz <= 0:
        raise UsageError("target frequency must be positive")

    def distance(m: ModeEstimate) -> tuple[float, float]:
        zeta = m.damping_ratio if m.damping_ratio is not None else np.inf
        return (abs(m.frequency_hz - frequency_hz), zeta)

    in_band = [m for m in modes
               if 0.8 * frequency_hz <= m.frequency_hz <= 1.2 * frequency_hz]
    if in_band:
        return min(in_band, key=distance)
    best = min(modes, key=distance)
    warnings.warn(
        f"no mode within [0.8, 1.2] x {frequency_hz:g} Hz; nearest is "
        f"{best.frequency_hz:g} Hz",
        RuntimeWarning,
        stacklevel=2,
    )
    return replace(best, flags=best.flags + (OUT_OF_BAND_FLAG,))


@dataclass(frozen=True)
class ParticipationReport:
    """Per-observable participation in one mode, aggregated per location.

    ``values[s]`` is the complex product of the mode's right-vector entry
    and left-vector entry at observable s; the values sum to 1 over all
    observables.  Location scores are sums of |values| over that location's
    observables, normalized so the largest is 1.
    """

    mode: ModeEstimate
    observable_names: tuple[str, ...]
    values: np.ndarray  # complex, per observable
    magnitudes: np.ndarray  # |values|
    per_location: dict[int, float]
    ranking: tuple[int, ...]
    trace_error: float

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.to_dict(),
            "observables": [
                {"name": n, "value": [v.real, v.imag], "magnitude": float(m)}
                for n, v, m in zip(self.observable_names, self.values, self.magnitudes)
            ],
            "per_location": [
                {"location": loc, "score": self.per_location[loc]}
                for loc in sorted(self.per_location)
            ],
            "ranking": list(self.ranking),
            "trace_error": self.trace_error,
        }


def participation(
    model: KoopmanModel,
    mode: ModeEstimate,
    dictionary: tuple[ObservableDef, ...],
) -> ParticipationReport:
    """Score locations by their observables' participation in one mode.

    The per-observable participation is right_vectors[s, i] *
    left_vectors[i, s]; its sum over s is exactly 1 when the eigenvector
    inversion is exact, which is checked and enforced within tolerance.
    """
    if len(dictionary) != model.n_observables:
        raise UsageError(
            f"dictionary has {len(dictionary)} observables, model has "
            f"{model.n_observables}"
        )
    i = mode.mode_index
    values = model.right_vectors[:, i] * model.left_vectors[i, :]
    trace_error = float(abs(values.sum() - 1.0))
    if trace_error > TRACE_HARD_TOL:
        raise ConditioningError(
            f"participation trace deviates from 1 by {trace_error:.3e} "
            f"(> {TRACE_HARD_TOL:g}); refusing to rank"
        )
    if trace_error > TRACE_WARN_TOL:
        warnings.warn(
            f"participation trace error {trace_error:.3e} above "
            f"{TRACE_WARN_TOL:g}",
            RuntimeWarning,
            stacklevel=2,
        )

    magnitudes = np.abs(values)
    per_location: dict[int, float] = {}
    for obs, m in zip(dictionary, magnitudes):
        per_location[obs.location_id] = per_location.get(obs.location_id, 0.0) + float(m)

    top = max(per_location.values())
    if top <= 0.0:
        raise ConditioningError("all participation magnitudes vanish")
    per_location = {loc: v / top for loc, v in per_location.items()}
    ranking = tuple(sorted(per_location, key=lambda loc: (-per_location[loc], loc)))

    return ParticipationReport(
        mode=mode,
        observable_names=model.observable_names,
        values=values,
        magnitudes=magnitudes,
        per_location=per_location,
        ranking=ranking,
        trace_error=trace_error,
    )
