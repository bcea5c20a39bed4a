"""Spectral input objects and the two built-in ground-motion models.

An :class:`EvolutionarySpectrum` tabulates the time-varying one-sided power
spectral density S(t_m, w_k) on a grid. An :class:`EvolutionaryBispectrum`
holds the complex third-order density B(t_m, w_i, w_j) on the triangular
frequency-pair support i >= j >= 0, i + j <= N - 1; values for i < j follow by
symmetry, and everything involving w_0 is zero by convention (the spectral
density itself is assumed to vanish at zero frequency).

Built-in models:

* :func:`model_separable_gaussian` -- amplitude-modulated Gaussian-shaped
  spectrum, S(t, w) = 100 (200 - t) exp(-w^2/2), with the matching bispectrum.
  Time and frequency separate, so the model has rank one in every
  decomposition; useful as an analytically transparent check.
* :func:`model_clough_penzien` -- Kanai-Tajimi spectrum with Clough-Penzien
  correction and linearly drifting ground parameters, plus a bispectrum
  proportional to sqrt(S_i S_j S_{i+j}) / sqrt(w_i + w_j). Fully
  non-separable; the realistic seismic test case.

Bispectra of built-in models are *lazy*: slices are evaluated on demand as a
pure function of the time index, so large grids never materialize the full
M x N^2/4 triangle unless asked to.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import GridCompatibilityError, InvalidParameterError, ModelDomainError
from .grid import SimulationGrid, make_grid, fft_compatible_cutoff


class EvolutionarySpectrum:
    """S(t_m, w_k) sampled on a grid, shape (M, N), non-negative, zero at k=0."""

    def __init__(self, grid: SimulationGrid, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.M, grid.N):
            raise InvalidParameterError(
                f"spectrum values must have shape (M, N) = ({grid.M}, {grid.N}), "
                f"got {values.shape}"
            )
        if np.any(values < 0):
            raise InvalidParameterError("spectrum values must be non-negative")
        if np.any(values[:, 0] != 0.0):
            raise InvalidParameterError("spectrum values at k=0 must be exactly zero")
        self.grid = grid
        self.values = values
        self.values.flags.writeable = False

    def total_variance(self) -> np.ndarray:
        """Theoretical process variance 2*dw*sum_k S(t, w_k), shape (M,)."""
        return 2.0 * self.grid.dw * self.values.sum(axis=1)


class EvolutionaryBispectrum:
    """Complex B(t_m, w_i, w_j) on the triangle, dense or lazily evaluated.

    Dense storage is a (M, n_full) complex array in the canonical triangle
    ordering of :class:`~evospec.grid.TrianglePairs`. Lazy instances carry a
    pure slice function m -> (n_full,) complex and can be materialized.
    """

    def __init__(self, grid: SimulationGrid, entries: np.ndarray | None = None,
                 slice_fn: Callable[[int], np.ndarray] | None = None):
        if (entries is None) == (slice_fn is None):
            raise InvalidParameterError("provide exactly one of entries or slice_fn")
        self.grid = grid
        self._slice_fn = slice_fn
        if entries is not None:
            entries = np.asarray(entries, dtype=np.complex128)
            n_full = grid.pairs.n_full
            if entries.shape != (grid.M, n_full):
                raise InvalidParameterError(
                    f"bispectrum entries must have shape (M, n_full) = "
                    f"({grid.M}, {n_full}), got {entries.shape}"
                )
            zero_j = grid.pairs.j == 0
            if np.any(entries[:, zero_j] != 0):
                raise InvalidParameterError("bispectrum entries at j=0 must be exactly zero")
            entries.flags.writeable = False
        self.entries = entries

    @property
    def is_dense(self) -> bool:
        return self.entries is not None

    def tri_slice(self, m: int) -> np.ndarray:
        """Triangle values at time index m, shape (n_full,), canonical order."""
        if self.entries is not None:
            return self.entries[m]
        return self._slice_fn(m)

    def materialize(self) -> "EvolutionaryBispectrum":
        if self.is_dense:
            return self
        rows = np.empty((self.grid.M, self.grid.pairs.n_full), dtype=np.complex128)
        for m in range(self.grid.M):
            rows[m] = self._slice_fn(m)
        return EvolutionaryBispectrum(self.grid, entries=rows)

    def square_slice(self, m: int) -> np.ndarray:
        """Full (N, N) symmetric view at time index m, zero beyond the triangle."""
        pairs = self.grid.pairs
        out = np.zeros((self.grid.N, self.grid.N), dtype=np.complex128)
        vals = self.tri_slice(m)
        out[pairs.i, pairs.j] = vals
        out[pairs.j, pairs.i] = vals
        return out

    def value(self, m: int, i: int, j: int) -> complex:
        """B at (t_m, w_i, w_j) with symmetric extension."""
        if j > i:
            i, j = j, i
        return complex(self.tri_slice(m)[self.grid.pairs.full_index(i, j)])


def zero_bispectrum(grid: SimulationGrid) -> EvolutionaryBispectrum:
    return EvolutionaryBispectrum(
        grid, entries=np.zeros((grid.M, grid.pairs.n_full), dtype=np.complex128)
    )


def _lazy_from_tables(grid: SimulationGrid,
                      fn: Callable[[int], np.ndarray]) -> EvolutionaryBispectrum:
    """Wrap a slice function, forcing exact zeros on the j = 0 pairs."""
    zero_j = grid.pairs.j == 0

    def slice_fn(m: int) -> np.ndarray:
        row = np.asarray(fn(m), dtype=np.complex128)
        row[zero_j] = 0.0
        return row

    return EvolutionaryBispectrum(grid, slice_fn=slice_fn)


# ----------------------------------------------------------------------------
# Model 1: separable amplitude-modulated Gaussian spectrum
# ----------------------------------------------------------------------------

SEPARABLE_T_MAX = 200.0


def model_separable_gaussian(grid: SimulationGrid):
    """Tabulate the separable model on ``grid``.

    S(t, w)        = 100 (200 - t) exp(-w^2 / 2)
    B(t, w1, w2)   = 2000 / (3 sqrt(3 (w1 + w2))) (200 - t)^{3/2}
                     * exp(-(w1^2 + w2^2 + w1 w2) / 2)

    Defined for t in [0, 200]. Returns (spectrum, bispectrum) with the
    bispectrum lazy.
    """
    if grid.T > SEPARABLE_T_MAX:
        raise ModelDomainError(
            f"separable model is defined for T <= {SEPARABLE_T_MAX}, got T={grid.T}"
        )
    t = grid.times
    w = grid.freqs
    values = 100.0 * (200.0 - t)[:, None] * np.exp(-0.5 * w**2)[None, :]
    values[:, 0] = 0.0
    spectrum = EvolutionarySpectrum(grid, values)

    pairs = grid.pairs
    wi = w[pairs.i]
    wj = w[pairs.j]
    wsum = wi + wj
    with np.errstate(divide="ignore"):
        shape = np.where(
            wsum > 0,
            np.exp(-0.5 * (wi**2 + wj**2 + wi * wj)) / (3.0 * np.sqrt(3.0 * wsum)),
            0.0,
        )
    base = 2000.0 * shape  # frequency part, time factor applied per slice

    def fn(m: int) -> np.ndarray:
        return base * (200.0 - t[m]) ** 1.5

    return spectrum, _lazy_from_tables(grid, fn)


def separable_modulation(grid: SimulationGrid) -> np.ndarray:
    """The model's amplitude modulation M(t) = sqrt(200 - t) on the time grid."""
    return np.sqrt(200.0 - grid.times)


# ----------------------------------------------------------------------------
# Model 2: Clough-Penzien seismic ground motion
# ----------------------------------------------------------------------------

CLOUGH_PENZIEN_T_MAX = 20.0


def clough_penzien_parameters(t):
    """Time-varying ground and filter parameters (wg, zg, wf, zf)."""
    t = np.asarray(t, dtype=np.float64)
    wg = 30.0 - 1.25 * t
    zg = 0.5 + 0.005 * t
    return wg, zg, 0.1 * wg, 0.1 * zg


def kanai_tajimi(w, wg, zg):
    """Kanai-Tajimi spectral shape; broadcasts over its arguments."""
    r2 = (w / wg) ** 2
    return (1.0 + 4.0 * zg**2 * r2) / ((1.0 - r2) ** 2 + 4.0 * zg**2 * r2)


def clough_penzien_correction(w, wf, zf):
    """High-pass correction factor removing the spurious low-frequency energy."""
    r2 = (w / wf) ** 2
    return r2**2 / ((1.0 - r2) ** 2 + 4.0 * zf**2 * r2)


def model_clough_penzien(grid: SimulationGrid):
    """Tabulate the Clough-Penzien model on ``grid``.

    The spectrum is S_cp(t, w) = S_kt(t, w) * gamma_cp(t, w) with parameters
    wg = 30 - 1.25 t, zg = 0.5 + 0.005 t, wf = 0.1 wg, zf = 0.1 zg, and the
    bispectrum is

        B(t, wi, wj) = 2 sqrt(S_cp(t, wi) S_cp(t, wj) S_cp(t, wi + wj))
                       / (3 sqrt(3 (wi + wj))).

    Requires wg > 0 over the whole time grid (T <= 20 in the reference setup).
    Returns (spectrum, bispectrum) with the bispectrum lazy.
    """
    if grid.T > CLOUGH_PENZIEN_T_MAX:
        raise ModelDomainError(
            f"Clough-Penzien model requires T <= {CLOUGH_PENZIEN_T_MAX} "
            f"(ground frequency stays positive), got T={grid.T}"
        )
    t = grid.times
    wg, zg, wf, zf = clough_penzien_parameters(t)
    if np.any(wg <= 0):
        raise ModelDomainError("ground frequency 30 - 1.25 t must stay positive on the grid")

    w = grid.freqs
    wc, wgc, zgc, wfc, zfc = w[None, :], wg[:, None], zg[:, None], wf[:, None], zf[:, None]
    values = kanai_tajimi(wc, wgc, zgc) * clough_penzien_correction(wc, wfc, zfc)
    values[:, 0] = 0.0
    spectrum = EvolutionarySpectrum(grid, values)

    pairs = grid.pairs
    wsum = w[pairs.k]
    with np.errstate(divide="ignore"):
        inv_root = np.where(wsum > 0, 1.0 / (3.0 * np.sqrt(3.0 * wsum)), 0.0)
    S = spectrum.values

    def fn(m: int) -> np.ndarray:
        row = S[m]
        # sum frequencies stay on the grid because i + j <= N - 1
        return 2.0 * np.sqrt(row[pairs.i] * row[pairs.j] * row[pairs.k]) * inv_root

    return spectrum, _lazy_from_tables(grid, fn)


# ----------------------------------------------------------------------------
# Named model registry used by the CLI and the reference experiment setups
# ----------------------------------------------------------------------------

EXAMPLE_SETUPS = {
    # name: (N, M, T); cutoff defaults to the exact FFT-compatible 2*pi*N/T
    "example1": (128, 256, 200.0),
    "example2": (400, 800, 20.0),
}

MODEL_BUILDERS = {
    "example1": model_separable_gaussian,
    "example2": model_clough_penzien,
}


def reference_grid(name: str) -> SimulationGrid:
    """The paper-size grid for a named setup, with exact FFT-compatible cutoff."""
    if name not in EXAMPLE_SETUPS:
        raise InvalidParameterError(f"unknown model setup {name!r}")
    N, M, T = EXAMPLE_SETUPS[name]
    return make_grid(N, M, fft_compatible_cutoff(N, T), T)


def build_model(name: str, grid: SimulationGrid):
    if name not in MODEL_BUILDERS:
        raise InvalidParameterError(f"unknown model {name!r}")
    return MODEL_BUILDERS[name](grid)


def require_same_grid(a, b, what: str = "objects") -> None:
    if not a.grid.same_as(b.grid):
        raise GridCompatibilityError(f"{what} are defined on different grids")
