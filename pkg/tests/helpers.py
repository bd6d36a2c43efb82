"""Shared builders for the test suite.

Everything here constructs inputs from first principles (closed-form
signals, dense linear algebra) so the tests never depend on the code
paths they are checking.
"""

from __future__ import annotations

import numpy as np

from oscloc import io, lifting


def make_dataset(n_locations, build, n_samples, sample_rate=50.0, seed=None,
                 units="pu"):
    """Assemble an in-memory EventDataset from a per-location builder.

    ``build(loc, t, rng)`` must return ``(vm, va, im, ia)`` with angles in
    radians.  ``rng`` is shared across locations so correlated noise is
    possible; pass ``seed=None`` for deterministic (noiseless) builders.
    """
    t = np.arange(n_samples) / sample_rate
    rng = np.random.default_rng(seed)
    channels = []
    for loc in range(1, n_locations + 1):
        vm, va, im, ia = build(loc, t, rng)
        channels.append(io.PhasorChannel(
            loc, io.Quantity.VOLTAGE,
            np.asarray(vm, dtype=float), np.asarray(va, dtype=float),
            sample_rate, 0.0, units))
        channels.append(io.PhasorChannel(
            loc, io.Quantity.CURRENT,
            np.asarray(im, dtype=float), np.asarray(ia, dtype=float),
            sample_rate, 0.0, units))
    window = (0.0, (n_samples - 1) / sample_rate)
    return io.EventDataset(tuple(channels), window, sample_rate, (),
                           units, "degrees")


def steady_builder(p=0.8, q=0.2, vm=1.0):
    """Constant operating point; current chosen so P and Q come out exactly."""
    def build(loc, t, rng):
        v = np.full(t.size, vm)
        va = np.zeros(t.size)
        im = np.full(t.size, np.hypot(p, q) / vm)
        ia = np.full(t.size, -np.arctan2(q, p))
        return v, va, im, ia
    return build


def tone_builder(freq_hz, amplitude=0.05, snr_db=None, phase_step=0.7):
    """Shared sinusoid on every channel magnitude, optional white noise.

    The per-location phase offset keeps channels linearly independent.
    """
    sigma = 0.0
    if snr_db is not None:
        sigma = (amplitude / np.sqrt(2.0)) / 10.0 ** (snr_db / 20.0)

    def build(loc, t, rng):
        tone = amplitude * np.sin(2.0 * np.pi * freq_hz * t + phase_step * loc)
        vm = 1.0 + tone
        va = 0.01 * tone
        im = 0.5 + 0.3 * tone
        ia = -0.2 + 0.01 * tone
        if sigma > 0.0:
            vm = vm + rng.normal(0.0, sigma, t.size)
            va = va + rng.normal(0.0, sigma * 0.01, t.size)
            im = im + rng.normal(0.0, sigma, t.size)
            ia = ia + rng.normal(0.0, sigma * 0.01, t.size)
        return vm, va, im, ia
    return build


def reverse_dataset(ds):
    """Time-mirror every channel (same grid, reversed samples)."""
    channels = tuple(io.PhasorChannel(
        c.location_id, c.quantity,
        c.magnitude[::-1].copy(), c.angle[::-1].copy(),
        c.sample_rate, c.t0, c.units, c.nan_count, c.interpolated_count,
    ) for c in ds.channels)
    return io.EventDataset(channels, ds.window, ds.sample_rate,
                           ds.excluded_locations, ds.units,
                           ds.angle_unit_on_disk)


# ---------------------------------------------------------------------------
# Linear-system machinery for the operator/participation oracles.

def random_stable_system(rng, n=4, moduli=(0.95, 0.995)):
    """Random stable, diagonalizable, real system matrix in discrete time.

    Built from rotation blocks with distinct eigenvalue moduli/angles and a
    well-conditioned random similarity transform, so a dense eigensolver on
    the result is a trustworthy oracle.
    """
    if n % 2:
        raise ValueError("even state dimension only")
    blocks = []
    angles = np.sort(rng.uniform(0.05, np.pi - 0.05, size=n // 2))
    radii = rng.uniform(moduli[0], moduli[1], size=n // 2)
    for r, a in zip(radii, angles):
        c, s = r * np.cos(a), r * np.sin(a)
        blocks.append(np.array([[c, -s], [s, c]]))
    core = np.zeros((n, n))
    for k, b in enumerate(blocks):
        core[2 * k:2 * k + 2, 2 * k:2 * k + 2] = b
    q1, _ = np.linalg.qr(rng.standard_normal((n, n)))
    q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
    t = q1 @ np.diag(rng.uniform(0.5, 2.0, size=n)) @ q2
    return t @ core @ np.linalg.inv(t)


def simulate_snapshots(a, n_snapshots, rng, n_trajectories=5):
    """Noiseless snapshot pairs (X, Y) from a few random trajectories.

    Restarting keeps the columns well excited even when the slow modes
    have decayed, which a single long trajectory would not.
    """
    n = a.shape[0]
    per = int(np.ceil(n_snapshots / n_trajectories))
    xs, ys = [], []
    for _ in range(n_trajectories):
        x = rng.standard_normal(n)
        for _ in range(per):
            y = a @ x
            xs.append(x)
            ys.append(y)
            x = y
    x_mat = np.array(xs[:n_snapshots]).T
    y_mat = np.array(ys[:n_snapshots]).T
    return x_mat, y_mat


def identity_dictionary(n):
    """One raw observable per state, each mapped to its own location."""
    return tuple(lifting.ObservableDef(
        name=f"x{i}@loc{i}", kind=lifting.RAW_MAGNITUDE, location_id=i,
        provenance=(f"x{i}",),
    ) for i in range(1, n + 1))


def snapshot_matrices(x, y, dt=0.02, names=None):
    if names is None:
        names = tuple(f"x{i}@loc{i}" for i in range(1, x.shape[0] + 1))
    return lifting.SnapshotMatrices(x, y, dt, names)


def classical_participation(a):
    """Dense-eigensolver participation factors p[s, i] = R[s, i] * L[i, s].

    Rows are states, columns are modes; each column sums to exactly 1
    because L is the true inverse of R.
    """
    eigvals, right = np.linalg.eig(a)
    left = np.linalg.inv(right)
    p = right * left.T
    return eigvals, p


def match_modes(reference, candidates):
    """Index into ``candidates`` matching each reference eigenvalue."""
    picks = []
    for mu in reference:
        picks.append(int(np.argmin(np.abs(np.asarray(candidates) - mu))))
    return picks


def lagged_qv_builder(f0, tau_s, q_amp=0.02, v_amp=0.02, q_noise=0.0):
    """V magnitude carries a tone; Q carries the same tone shifted by tau.

    The current channel is constructed so compute_pq returns exactly the
    planted P (constant) and Q series.
    """
    def build(loc, t, rng):
        v_osc = v_amp * np.sin(2 * np.pi * f0 * t)
        q_osc = q_amp * np.sin(2 * np.pi * f0 * (t + tau_s))
        if q_noise > 0.0:
            q_osc = q_noise * rng.standard_normal(t.size)
        vm = 1.0 + v_osc
        p = np.full(t.size, 0.8)
        q = 0.2 + q_osc
        im = np.hypot(p, q) / vm
        ia = -np.arctan2(q, p)
        return vm, np.zeros(t.size), im, ia
    return build
