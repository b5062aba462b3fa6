"""Direct-summation reference evaluators for the FFT tendency kernels.

Every sum here is written out literally, mode by mode, on top of nothing but
``leray_apply`` and wrapped array indexing.  The implementations are O(N^2)
and exist to pin down expected values in tests and in the `verify`
subcommand; they share no code path with the FFT kernels they check.
"""

from __future__ import annotations

import numpy as np

from .dynamics import System
from .spectral import ModePartition, SpectralField, leray_apply


def _support(data: np.ndarray, partition: ModePartition, mask: np.ndarray):
    """Wavevectors and coefficient vectors of the nonzero modes inside mask."""
    present = np.any(data != 0, axis=0) & mask
    idx = np.argwhere(present)
    k_of = np.rint(np.fft.fftfreq(partition.fft_len) * partition.fft_len).astype(np.int64)
    modes = k_of[idx]
    vals = data[(slice(None),) + tuple(idx.T)].T  # (count, dim)
    return modes, vals


def _bilinear_mode(
    k: np.ndarray,
    a_modes: np.ndarray,
    a_vals: np.ndarray,
    b_data: np.ndarray,
    partition: ModePartition,
    system: System,
) -> np.ndarray:
    """-i sum_{p+q=k} (k . a_p) A_k b_q, or the scalar Burgers analogue."""
    q = k[None, :] - a_modes
    ok = np.max(np.abs(q), axis=1) <= partition.m
    if not np.any(ok):
        return np.zeros(partition.dim, dtype=np.complex128)
    q_idx = tuple(np.mod(q[ok], partition.fft_len).T)
    b_vals = b_data[(slice(None),) + q_idx].T  # (count, dim)
    if system is System.BURGERS1D:
        s = np.sum(a_vals[ok, 0] * b_vals[:, 0])
        return np.array([-0.5j * k[0] * s], dtype=np.complex128)
    scal = a_vals[ok] @ k.astype(np.float64)  # k . a_p
    tot = np.sum(scal[:, None] * b_vals, axis=0)
    return -1j * leray_apply(k, tot)


def _bilinear(
    a: SpectralField,
    b: SpectralField,
    system: System,
    in_mask_a: np.ndarray,
    in_mask_b: np.ndarray,
    out_modes: np.ndarray,
) -> np.ndarray:
    part = a.partition
    a_modes, a_vals = _support(a.data, part, in_mask_a)
    b_data = np.where(in_mask_b, b.data, 0.0)
    out = np.zeros(part.field_shape, dtype=np.complex128)
    if a_modes.size == 0:
        return out
    for k in out_modes:
        val = _bilinear_mode(k, a_modes, a_vals, b_data, part, system)
        out[(slice(None),) + part.wrap(k)] = val
    return out


def direct_galerkin(v: SpectralField, system: System) -> SpectralField:
    """Resolved tendency by explicit summation over p + q = k, k in F."""
    part = v.partition
    data = _bilinear(v, v, system, part.mask_f, part.mask_f, part.modes_f)
    return SpectralField(part, data)


def direct_unresolved(v: SpectralField, system: System) -> SpectralField:
    """Unresolved tendency g_k, k in G, by explicit summation."""
    part = v.partition
    data = _bilinear(v, v, system, part.mask_f, part.mask_f, part.modes_g)
    return SpectralField(part, data)


def direct_tmodel(v: SpectralField, system: System, t: float) -> SpectralField:
    """t-model tendency by explicit summation of all four support blocks."""
    part = v.partition
    f = direct_galerkin(v, system)
    if t == 0.0:
        return f
    g = direct_unresolved(v, system)
    cross_fg = _bilinear(v, g, system, part.mask_f, part.mask_g, part.modes_f)
    cross_gf = _bilinear(g, v, system, part.mask_g, part.mask_f, part.modes_f)
    return SpectralField(part, f.data + t * (cross_fg + cross_gf))


def direct_g_norm_sq(v: SpectralField, system: System) -> float:
    g = direct_unresolved(v, system)
    flat = g.data.reshape(v.partition.dim, -1)[:, v.partition.flat_g]
    return float(np.sum(flat.real**2 + flat.imag**2))


def direct_energy_decay_rate(v: SpectralField, system: System, t: float) -> float:
    return -t * direct_g_norm_sq(v, system)
