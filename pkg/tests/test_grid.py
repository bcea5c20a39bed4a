import math

import numpy as np
import pytest

from evospec import InvalidParameterError, fft_compatible_cutoff, make_grid
from evospec.grid import triangle_pairs

from conftest import fft_grid


def test_derived_quantities():
    g = make_grid(128, 256, 4.02, 200.0)
    assert g.dw == pytest.approx(0.0314, rel=1e-2)
    assert g.dt == 0.78125
    assert g.freq(3) == 3 * g.dw
    assert g.time(5) == 5 * g.dt
    assert g.freqs.shape == (128,) and g.times.shape == (256,)


def test_fft_compatibility_predicate():
    # exact cutoffs from the two reference setups satisfy the pairing
    for (N, M, T) in [(128, 256, 200.0), (400, 800, 20.0)]:
        g = make_grid(N, M, fft_compatible_cutoff(N, T), T)
        assert g.fft_compatible
        assert abs(g.dw * g.dt - 2 * math.pi / M) <= 1e-12 * (2 * math.pi / M)
    # the two-decimal cutoff values the setups are usually quoted with
    # miss the pairing by ~3e-4 relative, far beyond the tolerance
    assert not make_grid(128, 256, 4.02, 200.0).fft_compatible
    # M < 2N fails even with a matching product
    assert not make_grid(4, 4, 1.0, 10.0).fft_compatible
    g = make_grid(8, 8, fft_compatible_cutoff(8, 8.0), 8.0)
    assert not g.fft_compatible


@pytest.mark.parametrize("args", [
    (0, 4, 1.0, 1.0), (4, 0, 1.0, 1.0), (4, 4, 0.0, 1.0), (4, 4, 1.0, -1.0),
    (1, 8, 1.0, 1.0), (2.5, 8, 1.0, 1.0),
])
def test_invalid_parameters(args):
    with pytest.raises(InvalidParameterError):
        make_grid(*args)


def test_triangle_enumeration_matches_loops():
    N = 13
    pairs = triangle_pairs(N)
    expected = [(k - j, j, k) for k in range(N) for j in range(0, k // 2 + 1)]
    got = list(zip(pairs.i.tolist(), pairs.j.tolist(), pairs.k.tolist()))
    assert got == expected
    # ordered, inside the support
    assert np.all(pairs.i >= pairs.j)
    assert np.all(pairs.i + pairs.j <= N - 1)
    # block offsets point at k-sorted runs
    for k in range(N):
        blk = pairs.k[pairs.start[k]:pairs.start[k + 1]]
        assert np.all(blk == k)


def test_active_pairs_drop_zero_frequency():
    pairs = triangle_pairs(9)
    assert np.all(pairs.act_j >= 1)
    assert pairs.n_active == pairs.n_full - 9
    for k in range(9):
        blk = pairs.act_block(k)
        expect = [(k - j, j) for j in range(1, k // 2 + 1)]
        got = list(zip(pairs.act_i[blk].tolist(), pairs.act_j[blk].tolist()))
        assert got == expect
    # full-square multiplicity: 2 off the diagonal, 1 on it
    assert np.all(pairs.act_weight[pairs.act_i == pairs.act_j] == 1.0)
    assert np.all(pairs.act_weight[pairs.act_i != pairs.act_j] == 2.0)


def test_full_index_round_trip():
    pairs = triangle_pairs(11)
    for p in range(pairs.n_full):
        assert pairs.full_index(int(pairs.i[p]), int(pairs.j[p])) == p
    with pytest.raises(InvalidParameterError):
        pairs.full_index(6, 5)  # i + j == N


def test_fft_grid_helper_exact():
    g = fft_grid(8, 16)
    assert g.fft_compatible
    assert g.dw * g.dt == 2 * math.pi / 16
