"""Right-hand sides: full Galerkin and t-model tendencies, energy diagnostics.

The three systems share one quadratic structure.  For Burgers the resolved
tendency is

    du_k/dt = -(i k / 2) sum_{p+q=k} u_p u_q ,

for Euler (2D and 3D, velocity form, pressure eliminated by the solenoidal
projection A_k = I - k k^T/|k|^2)

    du_k/dt = -i sum_{p+q=k} (k . u_p) A_k u_q .

Evaluating the same formula for k in the unresolved set G with resolved input
gives the unresolved tendency g_k; the t-model adds the memory term
t * (d/dw f)(v, 0) . g(v, 0), a resolved-times-unresolved cross convolution.
Its exact energy dissipation is dE/dt = -t sum_{k in G} |g_k|^2.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .spectral import (
    ModePartition,
    SpectralField,
    grid_spectrum,
    leray_project_grid,
    pin_mean,
    real_grids,
)


class System(enum.Enum):
    BURGERS1D = "burgers"
    EULER2D = "euler2d"
    EULER3D = "euler3d"

    @property
    def dim(self) -> int:
        return {"burgers": 1, "euler2d": 2, "euler3d": 3}[self.value]


class Closure(enum.Enum):
    GALERKIN = "galerkin"
    TMODEL = "tmodel"


# ---------------------------------------------------------------------------
# Quadratic tendency kernels (FFT path)
# ---------------------------------------------------------------------------

def _pair_products(ga: np.ndarray, gb: np.ndarray, partition: ModePartition, symmetrize: bool):
    """Spectra C[beta][alpha] of component products of two real-space grids.

    With ``symmetrize`` the entries are conv(a^beta, b^alpha) +
    conv(b^beta, a^alpha), i.e. the derivative of the quadratic form along
    the second field; otherwise plain conv(a^beta, a^alpha) of a single
    field.  Only the upper triangle is transformed (products commute).
    """
    d = partition.dim
    C: list[list[np.ndarray]] = [[None] * d for _ in range(d)]  # type: ignore[list-item]
    for beta in range(d):
        for alpha in range(beta, d):
            if symmetrize:
                prod = ga[beta] * gb[alpha] + gb[beta] * ga[alpha]
            else:
                prod = ga[beta] * ga[alpha]
            spec = grid_spectrum(prod, partition)
            C[beta][alpha] = spec
            C[alpha][beta] = spec
    return C


def _quadratic_tendency(C, partition: ModePartition, system: System) -> np.ndarray:
    """Map convolution spectra to the tendency on the full grid (unmasked)."""
    kk = partition.wavenumbers
    if system is System.BURGERS1D:
        out = (-0.5j) * kk.astype(np.float64) * C[0][0][None, ...]
    else:
        d = partition.dim
        T = np.empty(partition.field_shape, dtype=np.complex128)
        for alpha in range(d):
            acc = kk[0] * C[0][alpha]
            for beta in range(1, d):
                acc = acc + kk[beta] * C[beta][alpha]
            T[alpha] = acc
        out = -1j * leray_project_grid(T, partition)
    return pin_mean(out, partition)


def _tendency_on(v: SpectralField, system: System, mask: np.ndarray) -> np.ndarray:
    """Galerkin-type tendency of a single field, restricted to ``mask``."""
    part = v.partition
    grids = real_grids(v.data, part)
    C = _pair_products(grids, grids, part, symmetrize=False)
    out = _quadratic_tendency(C, part, system)
    out[:, ~mask] = 0.0
    return out


def _memory_tendency(
    v: SpectralField, g_data: np.ndarray, system: System, partition: ModePartition
) -> np.ndarray:
    """Cross term (d/dw f)(v,0) . g on F (without the factor t)."""
    grids_v = real_grids(v.data, partition)
    grids_g = real_grids(g_data, partition)
    C = _pair_products(grids_v, grids_g, partition, symmetrize=True)
    out = _quadratic_tendency(C, partition, system)
    out[:, ~partition.mask_f] = 0.0
    return out


def _require_resolved(v: SpectralField) -> None:
    leak = v.support_outside(v.partition.mask_f)
    if leak != 0.0:
        raise ValueError(
            f"field has coefficients outside the resolved set F (max |u_k| = {leak:.3e})"
        )


def eval_galerkin(v: SpectralField, system: System, t: float = 0.0) -> SpectralField:
    """Resolved Galerkin tendency f(v); conserves energy: Re<v, f(v)> = 0."""
    _require_resolved(v)
    out = _tendency_on(v, system, v.partition.mask_f)
    return SpectralField(v.partition, out)


def eval_unresolved_tendency(v: SpectralField, system: System) -> SpectralField:
    """Unresolved tendency g(v): the same quadratic form read on G."""
    _require_resolved(v)
    out = _tendency_on(v, system, v.partition.mask_g)
    return SpectralField(v.partition, out)


def eval_tmodel(v: SpectralField, system: System, t: float) -> SpectralField:
    """t-model tendency f(v) + t * (d/dw f)(v,0) . g(v,0) on F."""
    if t < 0:
        raise ValueError(f"t-model time must be >= 0, got {t}")
    _require_resolved(v)
    part = v.partition
    full = _tendency_on(v, system, part.mask_fg)
    g = np.where(part.mask_g, full, 0.0)
    f = np.where(part.mask_f, full, 0.0)
    if t != 0.0:
        f = f + t * _memory_tendency(v, g, system, part)
    return SpectralField(part, np.ascontiguousarray(f))


def energy(v: SpectralField) -> float:
    """Resolved energy 1/2 sum_{k in F} |v_k|^2 over the full signed spectrum."""
    flat = v.data.reshape(v.partition.dim, -1)[:, v.partition.flat_f]
    return 0.5 * float(np.sum(flat.real**2 + flat.imag**2))


def g_norm_sq(v: SpectralField, system: System) -> float:
    """sum_{k in G} |g_k(v)|^2, the squared norm driving the energy decay."""
    g = eval_unresolved_tendency(v, system)
    flat = g.data.reshape(v.partition.dim, -1)[:, v.partition.flat_g]
    return float(np.sum(flat.real**2 + flat.imag**2))


def energy_decay_rate(v: SpectralField, system: System, t: float) -> float:
    """Exact t-model dissipation -t sum_{k in G} |g_k|^2 (always <= 0)."""
    if t == 0.0:
        return 0.0
    return -t * g_norm_sq(v, system)


def inner(v: SpectralField, w: SpectralField) -> float:
    """Energy inner product Re sum_k conj(v_k) . w_k."""
    return float(np.sum(np.real(np.conj(v.data) * w.data)))


@dataclass(frozen=True)
class RhsEvaluator:
    """A configured dynamical system mapping (field, t) -> field tendency."""

    system: System
    closure: Closure
    partition: ModePartition

    def __post_init__(self):
        if self.system.dim != self.partition.dim:
            raise ValueError(
                f"{self.system.value} needs dim={self.system.dim}, "
                f"partition has dim={self.partition.dim}"
            )

    def tendency(self, v: SpectralField, t: float) -> SpectralField:
        if self.closure is Closure.GALERKIN:
            return eval_galerkin(v, self.system, t)
        return eval_tmodel(v, self.system, t)

    __call__ = tendency

    def galerkin(self, v: SpectralField, t: float = 0.0) -> SpectralField:
        return eval_galerkin(v, self.system, t)

    def unresolved(self, v: SpectralField) -> SpectralField:
        return eval_unresolved_tendency(v, self.system)

    def tmodel(self, v: SpectralField, t: float) -> SpectralField:
        return eval_tmodel(v, self.system, t)

    def energy(self, v: SpectralField) -> float:
        return energy(v)

    def g_norm_sq(self, v: SpectralField) -> float:
        return g_norm_sq(v, self.system)

    def energy_decay_rate(self, v: SpectralField, t: float) -> float:
        if self.closure is Closure.GALERKIN:
            return 0.0
        return energy_decay_rate(v, self.system, t)
