"""Initial conditions: 1D sine, random isotropic spectrum, Taylor-Green vortex.

All constructors return fields supported on the resolved set F that satisfy
the reality symmetry u_{-k} = conj(u_k), have zero mean, and (for dim >= 2)
are divergence-free.  The random constructor is bit-for-bit reproducible for
a fixed seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral import ModePartition, SpectralField, leray_apply

log = logging.getLogger(__name__)


def default_spectrum(k: float) -> float:
    """Reference spectrum exp(-2k) used by the 2D/3D random experiments."""
    return float(np.exp(-2.0 * k))


@dataclass(frozen=True)
class SpectrumProfile:
    """Target shell-energy profile E(k) plus the RNG seed realizing it."""

    shape: Callable[[float], float] = default_spectrum
    seed: int = 0

    def __call__(self, k: float) -> float:
        e = float(self.shape(k))
        if e < 0:
            raise ValueError(f"spectrum must be nonnegative, got E({k}) = {e}")
        return e


def init_burgers_sine(partition: ModePartition) -> SpectralField:
    """Spectrum of u0(x) = sin(x): v_1 = -i/2, v_{-1} = i/2."""
    if partition.dim != 1:
        raise ValueError("sine initial condition is one-dimensional")
    v = SpectralField.zeros(partition)
    v.data[0, 1 % partition.fft_len] = -0.5j
    v.data[0, -1 % partition.fft_len] = 0.5j
    return v


def init_taylor_green(partition: ModePartition) -> SpectralField:
    """Taylor-Green vortex; eight modes with k_i = +-1, energy 1/8.

    u1 = sin(x1) cos(x2) cos(x3), u2 = -cos(x1) sin(x2) cos(x3), u3 = 0.
    """
    if partition.dim != 3:
        raise ValueError("Taylor-Green initial condition is three-dimensional")
    v = SpectralField.zeros(partition)
    for s1 in (-1, 1):
        for s2 in (-1, 1):
            for s3 in (-1, 1):
                idx = partition.wrap(np.array([s1, s2, s3]))
                v.data[(0,) + idx] = -0.125j * s1
                v.data[(1,) + idx] = 0.125j * s2
    return v


def shell_index(modes: np.ndarray) -> np.ndarray:
    """Unit-width shell of each wavevector: round(|k|), shells centered on integers."""
    r = np.sqrt(np.sum(modes.astype(np.float64) ** 2, axis=-1))
    return np.rint(r).astype(np.int64)


def shell_occupancy(partition: ModePartition) -> dict[int, int]:
    """Number of resolved modes per unit-width shell."""
    shells = shell_index(partition.modes_f)
    uniq, counts = np.unique(shells, return_counts=True)
    return dict(zip(uniq.tolist(), counts.tolist()))


def _positive_half(modes: np.ndarray) -> np.ndarray:
    """Select one representative of each +-k pair (lexicographically positive)."""
    keep = []
    for k in modes:
        for c in k:
            if c > 0:
                keep.append(True)
                break
            if c < 0:
                keep.append(False)
                break
        else:
            keep.append(False)
    return modes[np.array(keep, dtype=bool)]


def init_random_isotropic(partition: ModePartition, profile: SpectrumProfile) -> SpectralField:
    """Random solenoidal field with prescribed shell energies on F.

    Modes get independent complex Gaussian draws (uniform phases/directions),
    are projected onto the divergence-free subspace, then each unit-width
    shell {k - 1/2 <= |k| < k + 1/2} within F is rescaled so its total energy
    is exactly E(k).  Unresolved modes stay zero; identical seeds give
    bit-for-bit identical fields.
    """
    rng = np.random.default_rng(profile.seed)
    v = SpectralField.zeros(partition)
    d = partition.dim

    half = _positive_half(partition.modes_f)
    for k in half:
        a = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        if d >= 2:
            a = leray_apply(k, a)
        idx = partition.wrap(k)
        neg = partition.wrap(-k)
        v.data[(slice(None),) + idx] = a
        v.data[(slice(None),) + neg] = np.conj(a)

    shells = shell_index(partition.modes_f)
    flat = v.data.reshape(d, -1)
    for s in range(1, int(np.max(shells)) + 1):
        sel = partition.flat_f[shells == s]
        target = profile(float(s))
        if sel.size == 0:
            if target > 0:
                log.warning("shell %d has no resolved modes; energy %.3g unassigned", s, target)
            continue
        current = 0.5 * float(np.sum(np.abs(flat[:, sel]) ** 2))
        if current == 0.0:
            continue
        flat[:, sel] *= np.sqrt(target / current)
    return v


def shell_report(partition: ModePartition, profile: SpectrumProfile) -> dict:
    """Shell-normalization notes for the run manifest.

    Lists the realized unit-width shells with their mode counts and assigned
    energies, plus any shell whose target energy could not be assigned
    because no resolved mode falls in it (that energy is simply dropped).
    """
    occupancy = shell_occupancy(partition)
    top = max(occupancy) if occupancy else 0
    shells, empty = [], []
    for s in range(1, top + 1):
        target = profile(float(s))
        count = occupancy.get(s, 0)
        if count == 0:
            if target > 0:
                empty.append({"shell": s, "unassigned_energy": target})
            continue
        shells.append({"shell": s, "modes": count, "energy": target})
    return {
        "convention": "unit-width shells centered on integer |k|; shell energy = E(k)",
        "shells": shells,
        "empty_shells": empty,
        "total_energy": sum(item["energy"] for item in shells),
    }
