"""Reduced model: orthonormal frequency basis, projected amplitudes, diagnostics.

The normalized bispectrum tensor

    G[m, i, j] = B(t_m, w_i, w_j) / sqrt(Sp(t_m, w_i) Sp(t_m, w_j))

is symmetric in (i, j), zero beyond the triangle i + j <= N - 1, and zero
wherever the kernel's denominator guard dropped the pair. The frequency basis
Phi_q comes from the singular value decomposition of the mode-3 unfolding of
|G| (the N x (M*N) matrix whose rows are indexed by the last tensor axis),
computed in snapshot form: accumulate the N x N Gram matrix of the unfolding
slice by slice and take its eigenvectors. Projections are plain discrete inner
products, so projection and reconstruction are exact inverses under the
l2-orthonormal basis; frequency-interval factors stay in the simulation and
diagnostic formulas:

    a_q(t)    = sum_k sqrt(Sp(t, w_k)) Phi_q(w_k)
    b_rs(t)   = sum_{i,j} Phi_r(w_i) Phi_s(w_j) G(t, w_i, w_j)   (complex)

Reproducibility: every basis vector is flipped so its largest-magnitude entry
is positive, and rank-deficient decompositions are completed by deterministic
Gram-Schmidt of identity columns against the retained vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dsyrk

from .errors import InvalidParameterError
from .grid import SimulationGrid
from .kernel import EPS_DENOM_DEFAULT, ThirdOrderKernel, require_kernel_grid
from .spectra import EvolutionaryBispectrum, EvolutionarySpectrum, require_same_grid

_RANK_RTOL = 1e-12
_GRAM_CHUNK_BYTES = 1 << 27


class NormalizedBispectrumTensor:
    """Symmetric complex tensor G[m, i, j] on the full frequency square.

    Values are reconstructed from the kernel: on every kept pair,
    bp * sqrt(S(t, wk) / dw) equals |B| / sqrt(Sp_i Sp_j) identically, and the
    phase is the biphase, so the tensor agrees with the direct quotient up to
    rounding while pairs dropped by the kernel's denominator guard are exactly
    zero on both sides of every downstream comparison. Slices are assembled on
    demand; the full M x N x N array is never stored unless
    :meth:`dense_array` is called.
    """

    def __init__(self, S: EvolutionarySpectrum, B: EvolutionaryBispectrum,
                 kernel: ThirdOrderKernel, eps_denom: float = EPS_DENOM_DEFAULT):
        require_same_grid(S, B, "spectrum and bispectrum")
        require_kernel_grid(kernel, S, "spectrum")
        grid = S.grid
        self.grid = grid
        self._kernel = kernel
        self.is_real = not kernel.has_biphase
        # |G| on active pairs, (M, n_active)
        self._g_abs = kernel.bicoh * np.sqrt(S.values[:, grid.pairs.act_k] / grid.dw)
        pairs = grid.pairs
        self._scatter_lo = pairs.act_i * grid.N + pairs.act_j
        self._scatter_hi = pairs.act_j * grid.N + pairs.act_i

    def _g_row(self, m: int) -> np.ndarray:
        """Complex G over the active pairs at time index m."""
        if self.is_real:
            return self._g_abs[m]
        beta = self._kernel.biphase[m]
        return self._g_abs[m] * (np.cos(beta) + 1j * np.sin(beta))

    def tri_slice(self, m: int) -> np.ndarray:
        """G over the full triangle ordering (j = 0 pairs included as zeros)."""
        pairs = self.grid.pairs
        out = np.zeros(pairs.n_full, dtype=np.complex128)
        out[pairs.j >= 1] = self._g_row(m)
        return out

    def slice(self, m: int) -> np.ndarray:
        """Full (N, N) symmetric slice at time index m."""
        N = self.grid.N
        out = np.zeros(N * N, dtype=np.float64 if self.is_real else np.complex128)
        row = self._g_row(m)
        out[self._scatter_lo] = row
        out[self._scatter_hi] = row
        return out.reshape(N, N)

    def abs_slices(self, lo: int, hi: int) -> np.ndarray:
        """|G| slices lo..hi stacked as ((hi - lo) * N, N) for Gram updates."""
        N = self.grid.N
        out = np.zeros((hi - lo, N * N))
        vals = np.abs(self._g_abs[lo:hi])
        out[:, self._scatter_lo] = vals
        out[:, self._scatter_hi] = vals
        return out.reshape((hi - lo) * N, N)

    def slices(self, lo: int, hi: int) -> np.ndarray:
        """G slices stacked as (hi - lo, N, N); real dtype for real bispectra."""
        N = self.grid.N
        if self.is_real:
            out = np.zeros((hi - lo, N * N))
            vals = self._g_abs[lo:hi]
        else:
            out = np.zeros((hi - lo, N * N), dtype=np.complex128)
            beta = self._kernel.biphase[lo:hi]
            vals = self._g_abs[lo:hi] * (np.cos(beta) + 1j * np.sin(beta))
        out[:, self._scatter_lo] = vals
        out[:, self._scatter_hi] = vals
        return out.reshape(hi - lo, N, N)

    def dense_array(self) -> np.ndarray:
        """Materialize the (M, N, N) tensor; intended for moderate grids."""
        return self.slices(0, self.grid.M).astype(np.complex128)


def normalized_bispectrum_tensor(S: EvolutionarySpectrum, B: EvolutionaryBispectrum,
                                 kernel: ThirdOrderKernel,
                                 eps_denom: float = EPS_DENOM_DEFAULT,
                                 ) -> NormalizedBispectrumTensor:
    """Build the lazily evaluated normalized bispectrum tensor."""
    return NormalizedBispectrumTensor(S, B, kernel, eps_denom)


@dataclass(frozen=True)
class PodModel:
    """Fitted reduced model.

    basis : (n_q, N), row q is the orthonormal frequency function Phi_q.
    a : (n_q, n_t) real amplitudes of sqrt(Sp).
    b : (n_q, n_q, n_t) complex interaction amplitudes; b_abs and gamma are
        its polar form, gamma in (-pi, pi].
    singular_values : all N mode-3 singular values, descending.
    time_indices : the time indices a/b cover; None means the full grid.
    """

    grid: SimulationGrid
    n_q: int
    basis: np.ndarray
    a: np.ndarray
    b: np.ndarray
    b_abs: np.ndarray
    gamma: np.ndarray
    singular_values: np.ndarray
    time_indices: np.ndarray | None = None

    @property
    def covers_full_grid(self) -> bool:
        return self.time_indices is None

    @property
    def times(self) -> np.ndarray:
        if self.time_indices is None:
            return self.grid.times
        return self.grid.times[self.time_indices]


def _sign_fix(columns: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(columns), axis=0)
    signs = np.sign(columns[idx, np.arange(columns.shape[1])])
    signs[signs == 0] = 1.0
    return columns * signs


def _complete_basis(V: np.ndarray, rank: int) -> np.ndarray:
    """Replace columns past ``rank`` by Gram-Schmidt of identity columns."""
    N = V.shape[0]
    out = V.copy()
    have = rank
    for cand in range(N):
        if have == N:
            break
        v = np.zeros(N)
        v[cand] = 1.0
        for _ in range(2):  # twice for numerical orthogonality
            v -= out[:, :have] @ (out[:, :have].T @ v)
        norm = np.linalg.norm(v)
        if norm > 1e-6:
            out[:, have] = v / norm
            have += 1
    if have < N:
        raise InvalidParameterError("basis completion failed")  # unreachable
    return out


class PodFactorization:
    """Cached full decomposition; nested truncations share one eigensolve."""

    def __init__(self, G: NormalizedBispectrumTensor, s_pure: np.ndarray):
        grid = G.grid
        if s_pure.shape != (grid.M, grid.N):
            raise InvalidParameterError(
                f"s_pure must have shape (M, N) = ({grid.M}, {grid.N}), got {s_pure.shape}"
            )
        self.grid = grid
        self.G = G
        self.s_pure = s_pure

        gram, frob2 = _accumulate_gram(G)
        evals, evecs = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1]
        evals = np.clip(evals[order], 0.0, None)
        V = evecs[:, order]
        sv = np.sqrt(evals)
        rank = int(np.count_nonzero(sv > (sv[0] * _RANK_RTOL if sv[0] > 0 else np.inf)))
        if rank < grid.N:
            V = _complete_basis(V, rank)
        self.basis_full = np.ascontiguousarray(_sign_fix(V).T)  # (N, N), row q = Phi_q
        self.singular_values = sv
        self.frobenius_sq = frob2

    def model(self, n_q: int, time_indices=None) -> PodModel:
        grid = self.grid
        if not (1 <= n_q <= grid.N):
            raise InvalidParameterError(f"n_q must be in [1, N={grid.N}], got {n_q}")
        if time_indices is None:
            idx = np.arange(grid.M)
            stored_idx = None
        else:
            idx = np.asarray(time_indices, dtype=np.intp)
            if idx.size == 0 or np.any(idx < 0) or np.any(idx >= grid.M):
                raise InvalidParameterError("time_indices out of range")
            stored_idx = idx
        phi = self.basis_full[:n_q]                       # (n_q, N)
        a = phi @ np.sqrt(self.s_pure[idx]).T             # (n_q, n_t)
        b = np.empty((n_q, n_q, idx.size), dtype=np.complex128)
        contiguous = idx.size > 1 and np.array_equal(idx, np.arange(idx[0], idx[-1] + 1))
        if contiguous:
            chunk = max(1, _GRAM_CHUNK_BYTES // (grid.N * grid.N * 16))
            for lo in range(0, idx.size, chunk):
                hi = min(lo + chunk, idx.size)
                Gs = self.G.slices(int(idx[0]) + lo, int(idx[0]) + hi)
                b[:, :, lo:hi] = np.moveaxis(phi @ Gs @ phi.T, 0, 2)
        else:
            for col, m in enumerate(idx):
                b[:, :, col] = phi @ self.G.slice(int(m)) @ phi.T
        # G slices are symmetric, so b is symmetric up to round-off; enforce it
        b += b.transpose(1, 0, 2).copy()
        b *= 0.5
        gamma = np.angle(b)
        gamma[gamma == -np.pi] = np.pi
        return PodModel(
            grid=grid, n_q=n_q, basis=phi, a=a, b=b, b_abs=np.abs(b), gamma=gamma,
            singular_values=self.singular_values, time_indices=stored_idx,
        )


def _accumulate_gram(G: NormalizedBispectrumTensor):
    """Gram matrix of the mode-3 unfolding of |G| plus its squared F-norm."""
    grid = G.grid
    N, M = grid.N, grid.M
    chunk = max(1, _GRAM_CHUNK_BYTES // (N * N * 8))
    gram = np.zeros((N, N))
    frob2 = 0.0
    for lo in range(0, M, chunk):
        hi = min(lo + chunk, M)
        block = G.abs_slices(lo, hi)
        if not np.all(np.isfinite(block)):
            raise InvalidParameterError("normalized bispectrum tensor has non-finite entries")
        # rank-k update C += block^T block on the upper triangle
        gram = dsyrk(1.0, block, beta=1.0, c=gram, trans=1, lower=0, overwrite_c=1)
        frob2 += float(np.einsum("ij,ij->", block, block))
    gram = np.triu(gram) + np.triu(gram, 1).T
    return gram, frob2


def fit_pod(G: NormalizedBispectrumTensor, s_pure: np.ndarray, n_q: int,
            time_indices=None) -> PodModel:
    """Fit the reduced model with ``n_q`` retained components.

    ``time_indices`` restricts the projected amplitudes a and b to a subset of
    time slices (diagnostics at probe times); such a model cannot drive the
    simulators, which need every slice.
    """
    return PodFactorization(G, s_pure).model(n_q, time_indices)


@dataclass(frozen=True)
class PodDiagnostics:
    """Closed-form moment contributions of a fitted model, per time index.

    var_pure  = 2 dw  sum_q a_q^2(t)
    var_inter = dw^2  sum_{r,s} |b_rs(t)|^2
    m3        = 6 dw^2 sum_{r,s} |b_rs(t)| a_r(t) a_s(t) cos(gamma_rs(t))
    """

    t: np.ndarray
    var_pure: np.ndarray
    var_inter: np.ndarray
    var_total: np.ndarray
    m3: np.ndarray
    skew: np.ndarray


def pod_diagnostics(model: PodModel) -> PodDiagnostics:
    dw = model.grid.dw
    var_pure = 2.0 * dw * np.sum(model.a**2, axis=0)
    var_inter = dw**2 * np.sum(model.b_abs**2, axis=(0, 1))
    m3 = 6.0 * dw**2 * np.einsum(
        "rst,rt,st->t", model.b_abs * np.cos(model.gamma), model.a, model.a
    )
    var_total = var_pure + var_inter
    skew = np.zeros_like(var_total)
    mask = var_total > 0
    skew[mask] = m3[mask] / var_total[mask] ** 1.5
    return PodDiagnostics(
        t=model.times, var_pure=var_pure, var_inter=var_inter,
        var_total=var_total, m3=m3, skew=skew,
    )
