import numpy as np
import pytest

from evospec import (EvolutionaryBispectrum, EvolutionarySpectrum,
                     InvalidParameterError, ModelDomainError, make_grid,
                     model_clough_penzien, model_separable_gaussian,
                     reference_grid)
from evospec.spectra import (clough_penzien_parameters, kanai_tajimi,
                             separable_modulation)

from conftest import random_bispectrum, random_spectrum

# 2 * integral_0^omega_u of 100*200*exp(-w^2/2) dw, adaptive quadrature,
# computed once with scipy.integrate.quad at omega_u = 2*pi*128/200
EX1_VARIANCE_T0 = 50129.663171586144


@pytest.fixture(scope="module")
def ex1():
    grid = reference_grid("example1")
    S, B = model_separable_gaussian(grid)
    return grid, S, B


@pytest.fixture(scope="module")
def ex2():
    grid = reference_grid("example2")
    S, B = model_clough_penzien(grid)
    return grid, S, B


def test_spectrum_type_invariants(rng):
    grid = make_grid(8, 12, 2.0, 6.0)
    good = random_spectrum(grid, rng)
    assert np.all(good.values >= 0) and np.all(good.values[:, 0] == 0)
    bad = good.values.copy()
    bad[3, 0] = 0.1
    with pytest.raises(InvalidParameterError):
        EvolutionarySpectrum(grid, bad)
    bad = good.values.copy()
    bad[0, 2] = -1e-9
    with pytest.raises(InvalidParameterError):
        EvolutionarySpectrum(grid, bad)


def test_bispectrum_zero_frequency_convention(rng):
    grid = make_grid(8, 12, 2.0, 6.0)
    ent = np.zeros((grid.M, grid.pairs.n_full), dtype=complex)
    ent[:, grid.pairs.full_index(3, 0)] = 1.0
    with pytest.raises(InvalidParameterError):
        EvolutionaryBispectrum(grid, entries=ent)


def test_separable_gaussian_values(ex1):
    grid, S, B = ex1
    # direct evaluation of the closed forms at a handful of grid points
    for (m, k) in [(0, 16), (10, 40), (200, 3)]:
        t, w = grid.times[m], grid.freqs[k]
        assert S.values[m, k] == pytest.approx(100.0 * (200.0 - t) * np.exp(-w**2 / 2),
                                               rel=1e-14)
    nearest = int(round(0.5 / grid.dw))
    assert S.values[0, nearest] == pytest.approx(17626.46, rel=1e-4)
    for (m, i, j) in [(0, 5, 3), (17, 40, 12), (100, 2, 2)]:
        t = grid.times[m]
        wi, wj = grid.freqs[i], grid.freqs[j]
        expect = (2000.0 / (3.0 * np.sqrt(3.0 * (wi + wj))) * (200.0 - t) ** 1.5
                  * np.exp(-0.5 * (wi**2 + wj**2 + wi * wj)))
        assert B.value(m, i, j) == pytest.approx(expect, rel=1e-12)
    # k = 0 and j = 0 conventions
    assert np.all(S.values[:, 0] == 0)
    assert B.value(0, 5, 0) == 0


def test_separable_gaussian_variance_oracle(ex1):
    grid, S, _ = ex1
    total = 2.0 * grid.dw * S.values[0].sum()
    # rectangle sum misses the (clipped) k=0 cell and half the edge cells;
    # agreement with the adaptive quadrature value is a few percent
    assert total == pytest.approx(EX1_VARIANCE_T0, rel=0.03)


def test_separable_gaussian_domain_guard():
    grid = make_grid(16, 64, 2.0, 250.0)
    with pytest.raises(ModelDomainError):
        model_separable_gaussian(grid)


def test_separability_ratios(ex1):
    grid, S, B = ex1
    # S(t, w)/S(0, w) equals (200 - t)/200 independently of frequency
    ratio = S.values[1:, 1:] / S.values[0, 1:]
    expect = ((200.0 - grid.times[1:]) / 200.0)[:, None]
    assert np.max(np.abs(ratio / expect - 1)) < 1e-12
    # bispectrum scales with the 3/2 power of the same factor
    rng = np.random.default_rng(5)
    act = np.flatnonzero(grid.pairs.j >= 1)
    row0 = B.tri_slice(0)
    for m in rng.integers(1, grid.M, size=20):
        r = B.tri_slice(int(m))[act] / row0[act]
        expect = ((200.0 - grid.times[m]) / 200.0) ** 1.5
        assert np.max(np.abs(r / expect - 1)) < 1e-10
    assert separable_modulation(grid)[0] == pytest.approx(np.sqrt(200.0))


def test_clough_penzien_parameters_at_t8():
    wg, zg, wf, zf = clough_penzien_parameters(8.0)
    assert (wg, zg, wf) == (20.0, 0.54, 2.0)
    assert zf == pytest.approx(0.054, rel=1e-15)


def test_clough_penzien_values(ex2):
    grid, S, B = ex2
    # ground resonance at t=0: Kanai-Tajimi shape equals 2 at w = wg = 30
    assert kanai_tajimi(30.0, 30.0, 0.5) == pytest.approx(2.0, rel=1e-15)
    # spectrum vanishes at w -> 0 through the correction factor (w/wf)^4
    assert np.all(S.values[:, 0] == 0)
    w1 = grid.freqs[1]
    expect = (kanai_tajimi(w1, 30.0, 0.5)
              * (w1 / 3.0) ** 4 / ((1 - (w1 / 3.0) ** 2) ** 2 + 4 * 0.05**2 * (w1 / 3.0) ** 2))
    assert S.values[0, 1] == pytest.approx(expect, rel=1e-12)
    assert S.values[0, 1] < 1e-3
    # bispectrum matches its closed form at random triangle points
    rng = np.random.default_rng(11)
    for _ in range(25):
        m = int(rng.integers(0, grid.M))
        j = int(rng.integers(1, grid.N // 2))
        i = int(rng.integers(j, grid.N - j))
        w = grid.freqs
        expect = (2.0 * np.sqrt(S.values[m, i] * S.values[m, j] * S.values[m, i + j])
                  / (3.0 * np.sqrt(3.0 * (w[i] + w[j]))))
        assert B.value(m, i, j) == pytest.approx(expect, rel=1e-12)


def test_clough_penzien_domain_guard():
    grid = make_grid(16, 64, 10.0, 25.0)
    with pytest.raises(ModelDomainError):
        model_clough_penzien(grid)


@pytest.mark.parametrize("name", ["example1", "example2"])
def test_bispectrum_symmetry(name, rng):
    grid = reference_grid(name)
    builder = {"example1": model_separable_gaussian,
               "example2": model_clough_penzien}[name]
    S, B = builder(grid)
    assert np.all(S.values >= 0)
    for _ in range(100):
        m = int(rng.integers(0, grid.M))
        j = int(rng.integers(0, grid.N // 2))
        i = int(rng.integers(j, grid.N - j))
        bij, bji = B.value(m, i, j), B.value(m, j, i)
        assert bij == bji  # symmetric extension is exact by construction


def test_lazy_materialize_round_trip(ex1):
    grid, _, B = ex1
    dense = B.materialize()
    for m in (0, 7, grid.M - 1):
        assert np.array_equal(dense.tri_slice(m), B.tri_slice(m))
    sq = B.square_slice(3)
    assert np.array_equal(sq, sq.T)
