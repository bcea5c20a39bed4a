"""Direct cosine-summation simulators and deterministic batch generation.

These evaluate the expansion term by term and serve as the correctness oracle
for the FFT-accelerated path. Second order:

    x(t) = 2 sum_k sqrt(S(t, wk) dw) cos(wk t + phi_k)

(the coefficient-2 form; sqrt(2) * sqrt(2 S dw) collapses to 2 sqrt(S dw)).
Third order adds, for every active pair (i, j), i + j = k, i >= j >= 1,

    2 sqrt(S(t, wk) dw) bp(t, wi, wj) cos(wk t + phi_i + phi_j + beta(t, wi, wj))

while the pure term's amplitude becomes sqrt(Sp) in place of sqrt(S). Cost is
O(M N) per sample at second order and O(M N^2) at third.

Reproducibility contract
------------------------
Sample s of a batch draws its phases from the 64-bit seed
``mix_seed(base_seed, s)``, a SplitMix64 step of
``base_seed + (s + 1) * 0x9E3779B97F4A7C15 mod 2^64``, feeding
``numpy.random.default_rng`` (PCG64). Uniform angles are
``2 * pi * rng.random(...)``, i.e. 53-bit mantissa scaling into [0, 2*pi).
Each sample depends only on (base_seed, s), so batches are identical for any
worker count and execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .grid import SimulationGrid
from .kernel import ThirdOrderKernel, require_kernel_grid
from .spectra import EvolutionarySpectrum, require_same_grid

_GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1

# pair-axis chunk for the third-order inner product, bounds temp memory
_PAIR_CHUNK = 1 << 21


def mix_seed(base_seed: int, sample_index: int) -> int:
    """Derive the per-sample 64-bit seed (SplitMix64 output mixing)."""
    z = (int(base_seed) + (sample_index + 1) * _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


@dataclass(frozen=True)
class PhaseDraw:
    """N i.i.d. uniform [0, 2*pi) phase angles plus the seed they came from."""

    seed: int
    phases: np.ndarray

    @classmethod
    def from_seed(cls, seed: int, N: int) -> "PhaseDraw":
        rng = np.random.default_rng(seed)
        phases = 2.0 * np.pi * rng.random(N)
        phases.flags.writeable = False
        return cls(seed=seed, phases=phases)


@dataclass(frozen=True)
class SamplePath:
    """One realization of the process on the time grid."""

    grid: SimulationGrid
    x: np.ndarray


def simulate2_direct(S: EvolutionarySpectrum, phases: PhaseDraw) -> SamplePath:
    """Second-order sample by direct cosine summation."""
    grid = S.grid
    if phases.phases.shape != (grid.N,):
        raise InvalidParameterError(
            f"phase draw must have length N={grid.N}, got {phases.phases.shape}"
        )
    amp = 2.0 * np.sqrt(S.values * grid.dw)                   # (M, N)
    ang = np.outer(grid.times, grid.freqs) + phases.phases    # (M, N)
    x = np.einsum("mn,mn->m", amp, np.cos(ang))
    return SamplePath(grid, x)


def _pure_sum(s_pure: np.ndarray, grid: SimulationGrid, phases: np.ndarray) -> np.ndarray:
    amp = 2.0 * np.sqrt(s_pure * grid.dw)
    ang = np.outer(grid.times, grid.freqs) + phases
    return np.einsum("mn,mn->m", amp, np.cos(ang))


class _Direct3Workspace:
    """Sample-independent tables for third-order direct simulation.

    Hoists the amplitude weights 2*sqrt(S(t, wk) dw) * bp and the deterministic
    angle part wk * t_m + beta so a batch pays for them once.
    """

    def __init__(self, S: EvolutionarySpectrum, kernel: ThirdOrderKernel):
        require_same_grid(S, kernel, "spectrum and kernel")
        grid = S.grid
        pairs = grid.pairs
        self.grid = grid
        self.s_pure = kernel.s_pure
        # (M, P) weights and deterministic angles over active pairs
        self.weight = 2.0 * np.sqrt(S.values[:, pairs.act_k] * grid.dw) * kernel.bicoh
        self.base_angle = np.outer(grid.times, grid.freqs[pairs.act_k])
        if kernel.has_biphase:
            self.base_angle = self.base_angle + kernel.biphase
        self.pair_phase_idx = (pairs.act_i, pairs.act_j)

    def simulate(self, phases: PhaseDraw) -> SamplePath:
        grid = self.grid
        if phases.phases.shape != (grid.N,):
            raise InvalidParameterError(
                f"phase draw must have length N={grid.N}, got {phases.phases.shape}"
            )
        x = _pure_sum(self.s_pure, grid, phases.phases)
        ii, jj = self.pair_phase_idx
        pair_phase = phases.phases[ii] + phases.phases[jj]
        n_pairs = pair_phase.size
        step = max(1, _PAIR_CHUNK // max(1, grid.M))
        for lo in range(0, n_pairs, step):
            sl = slice(lo, lo + step)
            x += np.einsum(
                "mp,mp->m", self.weight[:, sl], np.cos(self.base_angle[:, sl] + pair_phase[sl])
            )
        return SamplePath(grid, x)


def simulate3_direct(S: EvolutionarySpectrum, kernel: ThirdOrderKernel,
                     phases: PhaseDraw) -> SamplePath:
    """Third-order sample by direct cosine summation over the pair triangle."""
    require_kernel_grid(kernel, S, "spectrum")
    return _Direct3Workspace(S, kernel).simulate(phases)


# ----------------------------------------------------------------------------
# Batch generation
# ----------------------------------------------------------------------------

# fork inheritance hands the prepared simulator to worker processes
_BATCH_CTX: dict = {}


def _batch_worker(span):
    sim, n_q = _BATCH_CTX["sim"], _BATCH_CTX["n_q"]
    base_seed = _BATCH_CTX["base_seed"]
    lo, hi = span
    return lo, [_one_sample(sim, n_q, base_seed, s) for s in range(lo, hi)]


def _one_sample(sim, n_q, base_seed, s):
    seed = mix_seed(base_seed, s)
    if n_q is None:
        return sim.simulate(PhaseDraw.from_seed(seed, sim.grid.N)).x
    from .fftsim import PhaseMatrix

    return sim.simulate(PhaseMatrix.from_seed(seed, n_q, sim.grid.N)).x


class _Direct2Simulator:
    def __init__(self, S: EvolutionarySpectrum):
        self.S = S
        self.grid = S.grid

    def simulate(self, phases: PhaseDraw) -> SamplePath:
        return simulate2_direct(self.S, phases)


def _make_simulator(S, *, order, method, kernel=None, pod_model=None, n_q=None):
    from . import fftsim

    if method == "direct":
        if order == 2:
            return _Direct2Simulator(S), None
        return _Direct3Workspace(S, kernel), None
    if method == "pod":
        if order == 2:
            if n_q is None:
                raise InvalidParameterError("POD method needs n_q")
            return fftsim.Pod2Simulator(S, n_q), n_q
        if pod_model is None:
            raise InvalidParameterError("third-order POD method needs a fitted model")
        return fftsim.Pod3Simulator(S, kernel, pod_model), pod_model.n_q
    raise InvalidParameterError(f"unknown method {method!r}")


def simulate_batch(S: EvolutionarySpectrum, *, order: int = 3, method: str = "direct",
                   kernel: ThirdOrderKernel | None = None, pod_model=None,
                   n_q: int | None = None, n_samples: int, base_seed: int,
                   workers: int = 1) -> np.ndarray:
    """Generate an ensemble, shape (n_samples, M), deterministically seeded.

    Sample s uses the phase seed ``mix_seed(base_seed, s)``; the result is
    byte-identical for any ``workers`` count. Workers are forked processes
    (sample simulation is ufunc-heavy, so threads would serialize on the GIL).
    """
    if n_samples < 1:
        raise InvalidParameterError("n_samples must be >= 1")
    if order not in (2, 3):
        raise InvalidParameterError(f"order must be 2 or 3, got {order}")
    if order == 3 and kernel is None:
        raise InvalidParameterError("third-order simulation needs a kernel")
    sim, nq = _make_simulator(S, order=order, method=method, kernel=kernel,
                              pod_model=pod_model, n_q=n_q)
    out = np.empty((n_samples, S.grid.M))

    if workers <= 1 or n_samples == 1:
        for s in range(n_samples):
            out[s] = _one_sample(sim, nq, base_seed, s)
        return out

    import multiprocessing as mp

    chunk = max(1, -(-n_samples // (workers * 4)))
    spans = [(lo, min(lo + chunk, n_samples)) for lo in range(0, n_samples, chunk)]
    _BATCH_CTX.update(sim=sim, n_q=nq, base_seed=base_seed)
    try:
        ctx = mp.get_context("fork")
        with ctx.Pool(processes=workers) as pool:
            for lo, rows in pool.imap_unordered(_batch_worker, spans):
                out[lo:lo + len(rows)] = rows
    finally:
        _BATCH_CTX.clear()
    return out
