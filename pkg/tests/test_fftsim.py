import numpy as np
import pytest

from evospec import (EvolutionarySpectrum, build_kernel, fit_pod,
                     make_grid, normalized_bispectrum_tensor,
                     empirical_moments, simulate2_pod_fft, simulate_batch)
from evospec.errors import GridCompatibilityError, InvalidParameterError
from evospec.fftsim import (PhaseMatrix, Pod3Simulator,
                            assemble_pair_coefficients, simulate3_pod_fft)

from conftest import (fft_grid, naive_pod_expansion, random_bispectrum,
                      random_pod_model, random_spectrum)


def test_phase_matrix_contract():
    pm = PhaseMatrix.from_seed(9, 3, 16)
    assert pm.phases.shape == (3, 16)
    assert np.all((pm.phases >= 0) & (pm.phases < 2 * np.pi))
    assert np.array_equal(pm.phases, PhaseMatrix.from_seed(9, 3, 16).phases)


def test_requires_fft_compatible_grid(rng):
    grid = make_grid(8, 16, 1.0, 16.0)  # wrong cutoff, product misses 2pi/M
    assert not grid.fft_compatible
    S = random_spectrum(grid, rng)
    with pytest.raises(GridCompatibilityError):
        simulate2_pod_fft(S, 2, PhaseMatrix.from_seed(0, 2, grid.N))


def test_pair_assembly_matches_loops(rng):
    # triangle assembly E_rs[k], checked entry by entry against its sum,
    # under symmetrization in (r, s)
    grid = fft_grid(9, 18)
    n_q = 3
    basis = np.linalg.qr(rng.standard_normal((grid.N, n_q)))[0].T
    ph = PhaseMatrix.from_seed(4, n_q, grid.N)
    E = assemble_pair_coefficients(basis, ph.phases, grid)
    pairs = grid.pairs
    u = basis * np.exp(-1j * ph.phases)
    for r in range(n_q):
        for s in range(n_q):
            for k in range(grid.N):
                blk = pairs.act_block(k)
                want = grid.dw * sum(
                    u[r, pairs.act_i[p]] * u[s, pairs.act_j[p]]
                    for p in range(blk.start, blk.stop)
                )
                sym = 0.5 * (want + grid.dw * sum(
                    u[s, pairs.act_i[p]] * u[r, pairs.act_j[p]]
                    for p in range(blk.start, blk.stop)
                ))
                assert E[r, s, k] == pytest.approx(sym, abs=1e-13)
    # diagonal components: symmetrization is the identity, so the triangle
    # convention (each i > j once, diagonal once) is reproduced exactly
    for r in range(n_q):
        for k in range(grid.N):
            blk = pairs.act_block(k)
            want = grid.dw * sum(
                u[r, pairs.act_i[p]] * u[r, pairs.act_j[p]]
                for p in range(blk.start, blk.stop)
            )
            assert E[r, r, k] == pytest.approx(want, abs=1e-13)


@pytest.mark.parametrize("seed", range(4))
def test_fft_matches_naive_expansion(seed):
    rng = np.random.default_rng(seed)
    grid = fft_grid(8, 16)
    model = random_pod_model(grid, n_q=2, rng=rng)
    S = random_spectrum(grid, rng)
    kernel = build_kernel(S, random_bispectrum(grid, rng, scale=0.03))
    ph = PhaseMatrix.from_seed(100 + seed, 2, grid.N)
    fast = Pod3Simulator(S, kernel, model).simulate(ph).x
    slow = naive_pod_expansion(model, ph)
    assert np.abs(fast - slow).max() <= 1e-9 * np.abs(slow).max()


def test_second_order_component_oracle(rng):
    # the per-component transform equals the plain cosine sum at every t
    grid = fft_grid(12, 24)
    S = random_spectrum(grid, rng)
    n_q = 3
    ph = PhaseMatrix.from_seed(8, n_q, grid.N)
    x = simulate2_pod_fft(S, n_q, ph)
    U, sv, Vt = np.linalg.svd(np.sqrt(S.values), full_matrices=False)
    idx = np.argmax(np.abs(Vt), axis=1)
    sgn = np.sign(Vt[np.arange(Vt.shape[0]), idx])
    want = np.zeros(grid.M)
    for mi, t in enumerate(grid.times):
        tot = 0.0
        for q in range(n_q):
            aq = sv[q] * U[mi, q] * sgn[q]
            for k in range(grid.N):
                tot += 2 * aq * Vt[q, k] * sgn[q] * np.sqrt(grid.dw) * np.cos(
                    grid.freqs[k] * t - ph.phases[q, k])
        want[mi] = tot
    assert np.abs(x.x - want).max() <= 1e-9 * np.abs(want).max()


def test_second_order_rank1_stationary(rng):
    # constant-in-time spectrum: sqrt(S) has rank one, a single component
    # reproduces the target variance
    grid = fft_grid(16, 64)
    row = rng.uniform(0.5, 1.5, grid.N)
    row[0] = 0.0
    S = EvolutionarySpectrum(grid, np.tile(row, (grid.M, 1)))
    n = 4000
    ens = simulate_batch(S, order=2, method="pod", n_q=1, n_samples=n, base_seed=5)
    emp = empirical_moments(ens, grid)
    target = 2 * grid.dw * row.sum()
    # pointwise Monte Carlo agreement at ~4 sigma
    assert np.abs(emp.var / target - 1).max() < 4.5 * np.sqrt(2.0 / n)


def test_zero_interactions_give_symmetric_ensemble(rng):
    grid = fft_grid(8, 16)
    S = random_spectrum(grid, rng)
    model = random_pod_model(grid, n_q=2, rng=rng, b_scale=0.0)
    kernel = build_kernel(S, random_bispectrum(grid, rng, scale=0.0))
    n = 5000
    rows = np.empty((n, grid.M))
    sim = Pod3Simulator(S, kernel, model)
    from evospec.direct import mix_seed
    for s in range(n):
        rows[s] = sim.simulate(PhaseMatrix.from_seed(mix_seed(2, s), 2, grid.N)).x
    emp = empirical_moments(rows, grid)
    assert np.abs(emp.skew).max() < 0.1


def test_shuffled_interactive_phases_kill_third_moment():
    # reusing the pure-part phases inside the interactive terms is what
    # couples the third moment; breaking the reuse zeroes it
    rng = np.random.default_rng(17)
    grid = fft_grid(8, 16)
    S = random_spectrum(grid, rng)
    B = random_bispectrum(grid, rng, scale=0.25, complex_valued=False)
    kernel = build_kernel(S, B)
    G = normalized_bispectrum_tensor(S, B, kernel)
    model = fit_pod(G, kernel.s_pure, n_q=4)
    sim = Pod3Simulator(S, kernel, model)
    from evospec.direct import mix_seed
    n = 6000
    coupled = np.empty((n, grid.M))
    broken = np.empty((n, grid.M))
    for s in range(n):
        ph = PhaseMatrix.from_seed(mix_seed(0, s), 4, grid.N)
        other = PhaseMatrix.from_seed(mix_seed(10**6, s), 4, grid.N)
        coupled[s] = sim.simulate(ph).x
        broken[s] = sim.simulate(ph, interactive_phases=other).x
    ec, eb = empirical_moments(coupled, grid), empirical_moments(broken, grid)
    # variance unchanged within Monte Carlo tolerance, third moment collapses
    assert np.abs(eb.var / ec.var - 1).max() < 6 * np.sqrt(2.0 / n) + 0.02
    assert np.abs(ec.m3).mean() > 5 * np.abs(eb.m3).mean()


def test_model_grid_and_shape_validation(rng):
    grid = fft_grid(8, 16)
    S = random_spectrum(grid, rng)
    kernel = build_kernel(S, random_bispectrum(grid, rng, scale=0.02))
    G = normalized_bispectrum_tensor(S, random_bispectrum(grid, rng, scale=0.02),
                                     kernel)
    model = fit_pod(G, kernel.s_pure, n_q=2)
    with pytest.raises(InvalidParameterError):
        simulate3_pod_fft(S, kernel, model, PhaseMatrix.from_seed(0, 3, grid.N))
    probe_model = fit_pod(G, kernel.s_pure, n_q=2, time_indices=[0, 3])
    with pytest.raises(InvalidParameterError):
        simulate3_pod_fft(S, kernel, probe_model, PhaseMatrix.from_seed(0, 2, grid.N))
