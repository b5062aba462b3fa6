"""Wavevector bookkeeping, Leray projection, and dealiased spectral convolution.

Everything downstream (tendencies, integrators, initial conditions) is built
on top of three ingredients defined here:

* ``ModePartition`` -- the split of the integer wavevector lattice into a
  resolved set F = {0 < |k|_inf <= n} and an unresolved set
  G = {n < |k|_inf <= 2n}, together with the padded transform length used
  for convolutions.
* ``SpectralField`` -- dense storage of Fourier coefficients on the padded
  grid, one complex value per component per wrapped wavevector.
* convolutions -- an FFT-based path (``convolve_dealiased``) and a direct
  double-sum path (``convolve_direct``) that serves as its oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

# Transform lengths are restricted to products of these radices so scipy's
# pocketfft never falls back to the generic slow path.
_FAST_RADICES = (2, 3, 5, 7, 11)

# Number of worker threads handed to scipy.fft; 1 keeps runs reproducible
# by default, the CLI may raise it (results are identical either way).
_fft_workers = 1


def set_fft_workers(workers: int) -> None:
    """Cap the internal FFT thread count (>= 1)."""
    global _fft_workers
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    _fft_workers = int(workers)


def get_fft_workers() -> int:
    return _fft_workers


def _is_fast_length(x: int) -> bool:
    for p in _FAST_RADICES:
        while x % p == 0:
            x //= p
    return x == 1


def default_fft_len(n: int) -> int:
    """Smallest even fast transform length >= 4n + 2.

    4n + 2 is the shortest even length for which both convolution patterns
    used by the dynamics are alias-free, including the |k|_inf = 2n boundary
    of G: products of two resolved fields read on F u G, and resolved-times-
    unresolved products read on F.  (At length exactly 4n the +-2n slots
    coincide modulo the transform length, so the boundary of G cannot be
    recovered from a circular convolution.)
    """
    m = 4 * n + 2
    while not _is_fast_length(m):
        m += 2
    return m


@dataclass(frozen=True)
class ModePartition:
    """Resolved/unresolved mode sets on the 2*pi-periodic torus.

    F = {k : 0 < |k|_inf <= n} holds the resolved modes, G = {n < |k|_inf <= m}
    the unresolved ones, with m = 2n so that quadratic interactions of
    resolved modes reach exactly the far edge of G.  ``fft_len`` is the
    padded transform length per axis used for dealiased convolutions.
    """

    dim: int
    n: int
    m: int
    fft_len: int

    @property
    def resolved_per_axis(self) -> int:
        """Number of resolved modes per axis (2n: n positive, n negative)."""
        return 2 * self.n

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return (self.fft_len,) * self.dim

    @property
    def field_shape(self) -> tuple[int, ...]:
        return (self.dim,) + self.grid_shape

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumber of every grid slot, shape (dim,) + grid_shape."""
        per_axis = np.rint(np.fft.fftfreq(self.fft_len) * self.fft_len).astype(np.int64)
        axes = np.meshgrid(*([per_axis] * self.dim), indexing="ij")
        return np.stack(axes, axis=0)

    @cached_property
    def _kinf(self) -> np.ndarray:
        return np.max(np.abs(self.wavenumbers), axis=0)

    @cached_property
    def mask_f(self) -> np.ndarray:
        return (self._kinf > 0) & (self._kinf <= self.n)

    @cached_property
    def mask_g(self) -> np.ndarray:
        return (self._kinf > self.n) & (self._kinf <= self.m)

    @cached_property
    def mask_fg(self) -> np.ndarray:
        return self.mask_f | self.mask_g

    @cached_property
    def k_sq_safe(self) -> np.ndarray:
        """|k|^2 with the origin slot set to 1 to keep divisions finite."""
        k2 = np.sum(self.wavenumbers.astype(np.float64) ** 2, axis=0)
        k2[tuple([0] * self.dim)] = 1.0
        return k2

    @cached_property
    def modes_f(self) -> np.ndarray:
        """Wavevectors of F in lexicographic order, shape (|F|, dim)."""
        return self._enumerate(1, self.n)

    @cached_property
    def modes_g(self) -> np.ndarray:
        return self._enumerate(self.n + 1, self.m)

    @cached_property
    def modes_fg(self) -> np.ndarray:
        """All of F u G in one lexicographic enumeration (the snapshot order)."""
        return self._enumerate(1, self.m)

    def _enumerate(self, lo: int, hi: int) -> np.ndarray:
        out = [
            k
            for k in itertools.product(range(-self.m, self.m + 1), repeat=self.dim)
            if lo <= max(abs(c) for c in k) <= hi
        ]
        return np.array(out, dtype=np.int64).reshape(len(out), self.dim)

    def wrap(self, modes: np.ndarray) -> tuple:
        """Map signed wavevectors (shape (..., dim)) to grid index tuples."""
        modes = np.asarray(modes, dtype=np.int64)
        if np.any(np.abs(modes) > self.m):
            raise ValueError(f"wavevector outside |k|_inf <= {self.m}")
        wrapped = np.mod(modes, self.fft_len)
        return tuple(np.moveaxis(wrapped, -1, 0))

    def flat_indices(self, modes: np.ndarray) -> np.ndarray:
        return np.ravel_multi_index(self.wrap(modes), self.grid_shape)

    @cached_property
    def flat_f(self) -> np.ndarray:
        return self.flat_indices(self.modes_f)

    @cached_property
    def flat_g(self) -> np.ndarray:
        return self.flat_indices(self.modes_g)

    @cached_property
    def flat_fg(self) -> np.ndarray:
        return self.flat_indices(self.modes_fg)


def build_partition(dim: int, n: int, fft_len: int | None = None) -> ModePartition:
    """Build the mode partition with m = 2n and a dealiasing-safe fft_len.

    ``fft_len`` may be overridden with any even length >= 4n + 2; results of
    all supported convolutions are identical (to round-off) for every valid
    choice.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    if n < 1:
        raise ValueError(f"resolved cutoff n must be >= 1, got {n}")
    if fft_len is None:
        fft_len = default_fft_len(n)
    else:
        if fft_len < 4 * n + 2:
            raise ValueError(f"fft_len must be >= 4n+2 = {4 * n + 2}, got {fft_len}")
        if fft_len % 2:
            raise ValueError(f"fft_len must be even, got {fft_len}")
    return ModePartition(dim=dim, n=n, m=2 * n, fft_len=fft_len)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a velocity field, one component per dimension.

    ``data`` has shape (dim,) + (fft_len,)*dim, complex128, indexed by wrapped
    wavenumber.  Treated as an immutable value: arithmetic returns new fields.
    """

    partition: ModePartition
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != self.partition.field_shape:
            raise ValueError(
                f"coefficient array shape {self.data.shape} does not match "
                f"partition shape {self.partition.field_shape}"
            )
        if self.data.dtype != np.complex128:
            object.__setattr__(self, "data", self.data.astype(np.complex128))

    @classmethod
    def zeros(cls, partition: ModePartition) -> "SpectralField":
        return cls(partition, np.zeros(partition.field_shape, dtype=np.complex128))

    def copy(self) -> "SpectralField":
        return SpectralField(self.partition, self.data.copy())

    def get(self, k) -> np.ndarray:
        """Coefficient vector at wavevector k, shape (dim,)."""
        idx = self.partition.wrap(np.asarray(k, dtype=np.int64))
        return self.data[(slice(None),) + idx].copy()

    # -- value arithmetic (used by the time integrators) --------------------

    def _binary(self, other: "SpectralField", op) -> "SpectralField":
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.partition is not self.partition and other.partition != self.partition:
            raise ValueError("partition mismatch between fields")
        return SpectralField(self.partition, op(self.data, other.data))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            return NotImplemented
        return SpectralField(self.partition, self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.partition, -self.data)

    def abs_max(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    # -- invariant diagnostics ----------------------------------------------

    def reality_residual(self) -> float:
        """max_k |coeffs[-k] - conj(coeffs[k])| (0 for a real-valued field)."""
        mirrored = self.data
        for ax in range(1, self.dim + 1):
            mirrored = _negate_axis(mirrored, ax)
        return float(np.max(np.abs(self.data - np.conj(mirrored))))

    def divergence_residual(self) -> float:
        """max_k |k . u_k|; identically 0 in 1D."""
        if self.dim == 1:
            return 0.0
        dot = np.sum(self.partition.wavenumbers * self.data, axis=0)
        return float(np.max(np.abs(dot)))

    def mean_mode(self) -> np.ndarray:
        return self.data[(slice(None),) + tuple([0] * self.dim)]

    def support_outside(self, mask: np.ndarray) -> float:
        """Largest coefficient magnitude outside ``mask`` (0 slot included)."""
        return float(np.max(np.abs(self.data[:, ~mask]), initial=0.0))

    @property
    def dim(self) -> int:
        return self.partition.dim


def _negate_axis(arr: np.ndarray, axis: int) -> np.ndarray:
    """Reindex one grid axis by k -> -k (mod fft_len)."""
    return np.roll(np.flip(arr, axis), 1, axis)


def negate_modes(arr: np.ndarray, grid_axes) -> np.ndarray:
    """Reindex the given grid axes of ``arr`` by k -> -k."""
    for ax in grid_axes:
        arr = _negate_axis(arr, ax)
    return arr


# ---------------------------------------------------------------------------
# Leray projection
# ---------------------------------------------------------------------------

def leray_apply(k, a) -> np.ndarray:
    """Project the vector a onto the plane orthogonal to the wavevector k.

    Implements (I - k k^T / |k|^2) a for a single mode; the projection is
    symmetric, idempotent and annihilates k itself.
    """
    k = np.asarray(k, dtype=np.float64)
    a = np.asarray(a, dtype=np.complex128)
    if k.shape != a.shape:
        raise ValueError(f"shape mismatch: k {k.shape} vs a {a.shape}")
    k_sq = float(np.dot(k, k))
    if k_sq == 0.0:
        raise ValueError("Leray projection is undefined at k = 0 (mean mode is pinned to zero)")
    return a - k * (np.dot(k, a) / k_sq)


def leray_project_grid(vec: np.ndarray, partition: ModePartition) -> np.ndarray:
    """Apply the mode-wise solenoidal projection to a full coefficient grid.

    ``vec`` has shape (dim,) + grid_shape.  The origin slot is passed through
    unchanged (it is pinned to zero separately).
    """
    kk = partition.wavenumbers
    dot = np.sum(kk * vec, axis=0) / partition.k_sq_safe
    return vec - kk * dot


def pin_mean(arr: np.ndarray, partition: ModePartition) -> np.ndarray:
    """Zero the k = 0 slot in place and return the array."""
    arr[(Ellipsis,) + tuple([0] * partition.dim)] = 0.0
    return arr


# ---------------------------------------------------------------------------
# Dealiased convolution (FFT path) and its direct-summation oracle
# ---------------------------------------------------------------------------

def _resolve_mask(partition: ModePartition, output_set) -> np.ndarray:
    if isinstance(output_set, str):
        try:
            return {"f": partition.mask_f, "g": partition.mask_g, "fg": partition.mask_fg}[
                output_set.lower()
            ]
        except KeyError:
            raise ValueError(f"unknown output set {output_set!r}; expected 'f', 'g' or 'fg'")
    return np.asarray(output_set, dtype=bool)


def _check_grid(arr: np.ndarray, partition: ModePartition, name: str) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.shape != partition.grid_shape:
        raise ValueError(
            f"{name} has shape {arr.shape}, expected {partition.grid_shape}; "
            "operands must share one partition"
        )
    return arr.astype(np.complex128, copy=False)


def convolve_dealiased(a, b, partition: ModePartition, output_set="fg") -> np.ndarray:
    """c_k = sum_{p+q=k} a_p b_q on the requested output set, via padded FFTs.

    ``a`` and ``b`` are single-component coefficient grids.  The zero-padded
    transform length per axis is partition.fft_len, which makes the result
    exact (no aliasing) whenever the supports satisfy
    reach(a) + reach(b) + |k_out|_inf < fft_len -- true for every pattern the
    dynamics use (F x F read on F u G, and F x G read on F).
    """
    a = _check_grid(a, partition, "a")
    b = _check_grid(b, partition, "b")
    mask = _resolve_mask(partition, output_set)
    ga = scipy.fft.ifftn(a, workers=_fft_workers)
    gb = scipy.fft.ifftn(b, workers=_fft_workers)
    c = scipy.fft.fftn(ga * gb, workers=_fft_workers)
    c *= float(partition.fft_len ** partition.dim)
    c[~mask] = 0.0
    return c


def convolve_direct(a, b, partition: ModePartition, output_set="fg") -> np.ndarray:
    """Reference convolution by explicit summation over p + q = k.

    Mathematically identical to ``convolve_dealiased``; O(|out| * |supp(a)|),
    intended for tests and small verification runs only.
    """
    a = _check_grid(a, partition, "a")
    b = _check_grid(b, partition, "b")
    mask = _resolve_mask(partition, output_set)

    out_modes = np.argwhere(mask)  # wrapped grid indices
    k_of = np.rint(np.fft.fftfreq(partition.fft_len) * partition.fft_len).astype(np.int64)

    supp_idx = np.argwhere(a != 0)
    c = np.zeros(partition.grid_shape, dtype=np.complex128)
    if supp_idx.size == 0 or out_modes.size == 0:
        return c
    p_modes = k_of[supp_idx]  # (ns, dim) signed wavevectors
    a_vals = a[tuple(supp_idx.T)]
    for idx in out_modes:
        k = k_of[idx]
        q = k[None, :] - p_modes
        ok = np.max(np.abs(q), axis=1) <= partition.m
        if not np.any(ok):
            continue
        b_vals = b[tuple(np.mod(q[ok], partition.fft_len).T)]
        c[tuple(idx)] = np.sum(a_vals[ok] * b_vals)
    return c


# ---------------------------------------------------------------------------
# Real-transform product pass used by the tendency kernels
# ---------------------------------------------------------------------------

def hermitian_expand(half: np.ndarray, fft_len: int) -> np.ndarray:
    """Expand an rfftn half-spectrum (last axis) to the full wrapped spectrum.

    Valid for even ``fft_len``; inverse of taking arr[..., :fft_len//2 + 1]
    for spectra of real-valued grids.
    """
    M = fft_len
    out = np.empty(half.shape[:-1] + (M,), dtype=np.complex128)
    out[..., : M // 2 + 1] = half
    part = np.conj(half[..., 1 : M // 2][..., ::-1])
    part = negate_modes(part, range(half.ndim - 1))
    out[..., M // 2 + 1 :] = part
    return out


def real_grids(components: np.ndarray, partition: ModePartition) -> np.ndarray:
    """Inverse-transform reality-symmetric coefficient components to real grids.

    Returns grids scaled by 1/fft_len^dim relative to physical point values;
    ``grid_spectrum`` compensates.  Requires the reality symmetry
    u_{-k} = conj(u_k) (the redundant half-spectrum is discarded).
    """
    M = partition.fft_len
    half = components[..., : M // 2 + 1]
    return scipy.fft.irfftn(
        half, s=partition.grid_shape, axes=range(-partition.dim, 0), workers=_fft_workers
    )


def grid_spectrum(grid: np.ndarray, partition: ModePartition) -> np.ndarray:
    """Full coefficient spectrum of a pointwise product of ``real_grids`` outputs.

    Scaled so that grid_spectrum(real_grids(a) * real_grids(b)) equals the
    convolution sum_{p+q=k} a_p b_q exactly (up to round-off) within the
    alias-free range.
    """
    half = scipy.fft.rfftn(grid, axes=range(-partition.dim, 0), workers=_fft_workers)
    half *= float(partition.fft_len ** partition.dim)
    return hermitian_expand(half, partition.fft_len)
