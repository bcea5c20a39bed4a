"""Shared fixtures and independent reference implementations.

The reference evaluators here are deliberately written as plain loops straight
from the defining formulas, so they share no code path with the vectorized
library internals they check.
"""

import numpy as np
import pytest

from evospec import (EvolutionaryBispectrum, EvolutionarySpectrum,
                     fft_compatible_cutoff, make_grid)


def fft_grid(N: int, M: int, T: float | None = None):
    """An exactly FFT-compatible grid (dw*dt equals 2*pi/M bitwise)."""
    T = float(M) if T is None else T
    return make_grid(N, M, fft_compatible_cutoff(N, T), T)


def random_spectrum(grid, rng, lo=0.5, hi=1.5) -> EvolutionarySpectrum:
    vals = rng.uniform(lo, hi, size=(grid.M, grid.N))
    vals[:, 0] = 0.0
    return EvolutionarySpectrum(grid, vals)


def random_bispectrum(grid, rng, scale=0.05, complex_valued=True) -> EvolutionaryBispectrum:
    """Small random triangle entries; scale keeps the kernel feasible."""
    pairs = grid.pairs
    ent = np.zeros((grid.M, pairs.n_full), dtype=np.complex128)
    act = pairs.j >= 1
    re = rng.standard_normal((grid.M, int(act.sum())))
    im = rng.standard_normal((grid.M, int(act.sum()))) if complex_valued else 0.0
    ent[:, act] = scale * (re + 1j * im)
    return EvolutionaryBispectrum(grid, entries=ent)


def brute_force_kernel(S, B, eps_denom=1e-30):
    """Literal per-point recursion for the pure spectrum and bicoherence.

    Returns (s_pure, bp, beta) with bp/beta as dense (M, N, N) arrays indexed
    [m, i, j] on the ordered triangle.
    """
    grid = S.grid
    M, N = grid.M, grid.N
    dw = grid.dw
    sp = np.zeros((M, N))
    bp = np.zeros((M, N, N))
    beta = np.zeros((M, N, N))
    for m in range(M):
        for k in range(N):
            total = 0.0
            for j in range(1, k // 2 + 1):
                i = k - j
                denom = sp[m, i] * sp[m, j] * S.values[m, k]
                if denom >= eps_denom:
                    Bv = B.value(m, i, j)
                    bp2 = abs(Bv) ** 2 * dw / denom
                    bp[m, i, j] = np.sqrt(bp2)
                    if bp2 > 0:
                        beta[m, i, j] = np.arctan2(Bv.imag, Bv.real)
                    total += bp2
            sp[m, k] = S.values[m, k] * max(1.0 - total, 0.0)
    return sp, bp, beta


def naive_direct3(S, kernel, phases):
    """Loop evaluation of the third-order cosine-sum expansion."""
    grid = S.grid
    dw = grid.dw
    x = np.zeros(grid.M)
    bp = kernel.bicoh
    beta = kernel.biphase
    pairs = grid.pairs
    for m in range(grid.M):
        t = grid.times[m]
        tot = 0.0
        for k in range(grid.N):
            tot += np.sqrt(kernel.s_pure[m, k] * dw) * np.cos(grid.freqs[k] * t
                                                              + phases.phases[k])
        for p in range(pairs.n_active):
            i, j, k = pairs.act_i[p], pairs.act_j[p], pairs.act_k[p]
            tot += (np.sqrt(S.values[m, k] * dw) * bp[m, p]
                    * np.cos(grid.freqs[k] * t + phases.phases[i] + phases.phases[j]
                             + beta[m, p]))
        x[m] = 2.0 * tot
    return x


def naive_pod_expansion(model, phases):
    """Loop evaluation of the reduced-model cosine expansion."""
    grid = model.grid
    pairs = grid.pairs
    dw = grid.dw
    ph = phases.phases
    x = np.zeros(grid.M)
    for mi in range(grid.M):
        t = grid.times[mi]
        tot = 0.0
        for q in range(model.n_q):
            for k in range(grid.N):
                tot += (model.a[q, mi] * model.basis[q, k] * np.sqrt(dw)
                        * np.cos(grid.freqs[k] * t - ph[q, k]))
        for p in range(pairs.n_active):
            i, j, k = pairs.act_i[p], pairs.act_j[p], pairs.act_k[p]
            for r in range(model.n_q):
                for s in range(model.n_q):
                    tot += (model.b_abs[r, s, mi] * model.basis[r, i]
                            * model.basis[s, j] * dw
                            * np.cos(grid.freqs[k] * t - ph[r, i] - ph[s, j]
                                     + model.gamma[r, s, mi]))
        x[mi] = 2.0 * tot
    return x


def random_pod_model(grid, n_q, rng, b_scale=1.0):
    """A synthetic but valid reduced model: orthonormal basis, symmetric b."""
    from evospec.pod import PodModel

    Q, _ = np.linalg.qr(rng.standard_normal((grid.N, n_q)))
    basis = np.ascontiguousarray(Q.T)
    a = rng.standard_normal((n_q, grid.M))
    raw = rng.standard_normal((n_q, n_q, grid.M)) + 1j * rng.standard_normal(
        (n_q, n_q, grid.M))
    b = b_scale * 0.5 * (raw + raw.transpose(1, 0, 2))
    gamma = np.angle(b)
    gamma[gamma == -np.pi] = np.pi
    return PodModel(grid=grid, n_q=n_q, basis=basis, a=a, b=b, b_abs=np.abs(b),
                    gamma=gamma, singular_values=np.zeros(grid.N))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
