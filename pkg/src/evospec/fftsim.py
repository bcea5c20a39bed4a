"""FFT-accelerated simulators built on the reduced model.

On an FFT-compatible grid, w_k t_m = 2*pi*k*m / M, so the stationary cosine
sum of one component collapses to a single length-M inverse DFT:

    sum_k c[k] e^{i w_k t_m} = M * ifft(c zero-padded to M)[m].

Second order decomposes sqrt(S) (an M x N matrix) by SVD into a_q(t)
Phi_q(w) and simulates each component with one transform per sample. Third
order uses a fitted :class:`~evospec.pod.PodModel`: component r contributes a
pure transform of c_r[k] = Phi_r(w_k) sqrt(dw) e^{-i phi_rk}, and each ordered
component pair (r, s) contributes a transform of the pair assembly

    E_rs[k] = dw * sum_{i+j=k, i>=j>=1} Phi_r(w_i) Phi_s(w_j) e^{-i(phi_ri + phi_sj)}

whose result is rotated pointwise by the time-dependent complex amplitude
b_rs(t): the interactive contribution is Re(b_rs(t_m) * e_rs[m]). The rotation
is exact, not an approximation, because b_rs does not depend on k. Per sample
the cost is O(n_q^2 N^2) assembly plus O(n_q^2 M log M) transforms.

The same phase matrix row r feeds both the pure term phi_rk and the
interactive phi_ri / phi_sj factors; breaking that reuse decouples the third
moment from the bispectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridCompatibilityError, InvalidParameterError
from .grid import SimulationGrid
from .kernel import ThirdOrderKernel, require_kernel_grid
from .pod import PodModel
from .spectra import EvolutionarySpectrum, require_same_grid
from .direct import SamplePath

_ASSEMBLY_CHUNK = 1 << 22  # complex temp entries for the pair assembly


@dataclass(frozen=True)
class PhaseMatrix:
    """Per-component phase angles, shape (n_q, N), i.i.d. uniform [0, 2*pi)."""

    seed: int
    phases: np.ndarray

    @classmethod
    def from_seed(cls, seed: int, n_q: int, N: int) -> "PhaseMatrix":
        rng = np.random.default_rng(seed)
        phases = 2.0 * np.pi * rng.random((n_q, N))
        phases.flags.writeable = False
        return cls(seed=seed, phases=phases)


def _require_fft_grid(grid: SimulationGrid) -> None:
    if not grid.fft_compatible:
        raise GridCompatibilityError(
            "grid is not FFT compatible (needs dw*dt = 2*pi/M and M >= 2N); "
            "use the direct simulators or an FFT-compatible grid"
        )


def _harmonic_sums(coeffs: np.ndarray, M: int) -> np.ndarray:
    """Evaluate sum_k coeffs[..., k] e^{i 2 pi k m / M} for all m at once."""
    return M * np.fft.ifft(coeffs, n=M, axis=-1)


class Pod2Simulator:
    """Second-order FFT simulator; holds the SVD of sqrt(S)."""

    def __init__(self, S: EvolutionarySpectrum, n_q: int):
        grid = S.grid
        _require_fft_grid(grid)
        if not (1 <= n_q <= min(grid.M, grid.N)):
            raise InvalidParameterError(
                f"n_q must be in [1, min(M, N) = {min(grid.M, grid.N)}], got {n_q}"
            )
        self.grid = grid
        self.n_q = n_q
        U, sv, Vt = np.linalg.svd(np.sqrt(S.values), full_matrices=False)
        idx = np.argmax(np.abs(Vt), axis=1)
        signs = np.sign(Vt[np.arange(Vt.shape[0]), idx])
        signs[signs == 0] = 1.0
        self.basis = Vt[:n_q] * signs[:n_q, None]           # (n_q, N)
        self.a = (U[:, :n_q] * (sv[:n_q] * signs[:n_q])).T  # (n_q, M)
        self.singular_values = sv

    def simulate(self, phases: PhaseMatrix) -> SamplePath:
        grid = self.grid
        if phases.phases.shape != (self.n_q, grid.N):
            raise InvalidParameterError(
                f"phase matrix must have shape ({self.n_q}, {grid.N}), "
                f"got {phases.phases.shape}"
            )
        coeffs = self.basis * np.sqrt(grid.dw) * np.exp(-1j * phases.phases)
        p = _harmonic_sums(coeffs, grid.M).real             # (n_q, M)
        x = 2.0 * np.einsum("qm,qm->m", self.a, p)
        return SamplePath(grid, x)


def simulate2_pod_fft(S: EvolutionarySpectrum, n_q: int, phases: PhaseMatrix) -> SamplePath:
    """Second-order sample via SVD of sqrt(S) and per-component FFTs."""
    return Pod2Simulator(S, n_q).simulate(phases)


class Pod3Simulator:
    """Third-order FFT simulator around a fitted PodModel."""

    def __init__(self, S: EvolutionarySpectrum, kernel: ThirdOrderKernel, model: PodModel):
        require_same_grid(S, kernel, "spectrum and kernel")
        require_same_grid(S, model, "spectrum and model")
        _require_fft_grid(model.grid)
        if not model.covers_full_grid:
            raise InvalidParameterError(
                "model was fitted on a time subset; simulation needs the full grid"
            )
        self.grid = model.grid
        self.model = model

    def simulate(self, phases: PhaseMatrix,
                 interactive_phases: PhaseMatrix | None = None) -> SamplePath:
        """One sample. ``interactive_phases`` deliberately breaks the phase
        reuse contract and exists for regression tests only."""
        model, grid = self.model, self.grid
        shape = (model.n_q, grid.N)
        if phases.phases.shape != shape:
            raise InvalidParameterError(
                f"phase matrix must have shape {shape}, got {phases.phases.shape}"
            )
        pure = _pure_component(model.basis, model.a, phases.phases, grid)
        iph = phases if interactive_phases is None else interactive_phases
        if iph.phases.shape != shape:
            raise InvalidParameterError(
                f"interactive phase matrix must have shape {shape}, "
                f"got {iph.phases.shape}"
            )
        inter = _interactive_component(model.basis, model.b, iph.phases, grid)
        return SamplePath(grid, 2.0 * (pure + inter))


def _pure_component(basis: np.ndarray, a: np.ndarray, phases: np.ndarray,
                    grid: SimulationGrid) -> np.ndarray:
    """sum_r a_r(t_m) * Re sum_k Phi_r(w_k) sqrt(dw) e^{-i phi_rk} e^{i w_k t_m}."""
    coeffs = basis * np.sqrt(grid.dw) * np.exp(-1j * phases)
    p = _harmonic_sums(coeffs, grid.M).real
    return np.einsum("qm,qm->m", a, p)


def assemble_pair_coefficients(basis: np.ndarray, phases: np.ndarray,
                               grid: SimulationGrid) -> np.ndarray:
    """Triangle pair assembly E[r, s, k], shape (n_q, n_q, N).

    E_rs[k] = dw * sum_{i+j=k, i>=j>=1} Phi_r(w_i) Phi_s(w_j)
              e^{-i(phi_ri + phi_sj)}.

    Computed through the symmetrized identity E_rs + E_sr = conv_rs + diag_rs,
    where conv_rs is the full linear convolution of u_r = Phi_r e^{-i phi_r}
    with u_s (both zeroed at k = 0) and diag_rs re-adds the i = j terms that
    the unordered convolution counts once but the ordered sum needs once per
    (r, s). Because the returned array is the symmetrization (E + E^T)/2, it
    reproduces every contraction against a symmetric amplitude matrix exactly;
    for r = s it IS the triangle assembly (each i > j pair once, the diagonal
    once). The convolution runs over length-2N FFTs, well clear of aliasing,
    and sum indices are capped at N - 1 by the bispectrum support convention.
    """
    N = grid.N
    n_q = basis.shape[0]
    u = basis * np.exp(-1j * phases)                        # (n_q, N)
    u = u.copy()
    u[:, 0] = 0.0                                           # pairs need i, j >= 1
    L = 2 * N
    U = np.fft.fft(u, n=L, axis=1)                          # (n_q, L)
    conv = np.fft.ifft(U[:, None, :] * U[None, :, :], axis=2)[:, :, :N]
    d = np.arange(1, (N - 1) // 2 + 1)
    diag = np.zeros((n_q, n_q, N), dtype=np.complex128)
    diag[:, :, 2 * d] = u[:, None, d] * u[None, :, d]
    return 0.5 * grid.dw * (conv + diag)


def _interactive_component(basis: np.ndarray, b: np.ndarray, phases: np.ndarray,
                           grid: SimulationGrid) -> np.ndarray:
    """sum_{r,s} Re(b_rs(t_m) * e_rs[m]) over the ordered component square.

    Relies on b being symmetric in (r, s), which holds for every fitted model
    because the normalized bispectrum slices are symmetric matrices.
    """
    E = assemble_pair_coefficients(basis, phases, grid)
    e = _harmonic_sums(E, grid.M)                           # (n_q, n_q, M)
    return np.einsum("rsm->m", (b * e).real)


def simulate3_pod_fft(S: EvolutionarySpectrum, kernel: ThirdOrderKernel,
                      model: PodModel, phases: PhaseMatrix) -> SamplePath:
    """Third-order sample via the reduced model and n_q + n_q^2 FFTs."""
    return Pod3Simulator(S, kernel, model).simulate(phases)
