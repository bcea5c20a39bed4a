"""Time-frequency discretization shared by every simulator.

The frequency axis holds N intervals of width dw = omega_u / N with grid
points w_k = k*dw, k = 0..N-1 (the cutoff itself is excluded). The time axis
holds M points t_m = m*dt with dt = T / M.

A grid is *FFT compatible* when dw*dt matches 2*pi/M to machine-level
precision and M >= 2N. Under that pairing w_k * t_m = 2*pi*k*m/M, so a cosine
sum over the frequency grid is exactly one length-M inverse DFT and the
highest retained frequency stays below the Nyquist bin of the time grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import InvalidParameterError

_FFT_RELTOL = 1e-12


@dataclass(frozen=True)
class SimulationGrid:
    """Discretization of the time and frequency axes.

    Attributes
    ----------
    N : number of frequency intervals (grid points k = 0..N-1).
    M : number of time points (m = 0..M-1).
    omega_u : upper cutoff frequency in rad/s.
    T : total duration in seconds.
    """

    N: int
    M: int
    omega_u: float
    T: float

    @property
    def dw(self) -> float:
        return self.omega_u / self.N

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def fft_compatible(self) -> bool:
        target = 2.0 * math.pi / self.M
        return abs(self.dw * self.dt - target) < _FFT_RELTOL * target and self.M >= 2 * self.N

    def freq(self, k: int) -> float:
        return k * self.dw

    def time(self, m: int) -> float:
        return m * self.dt

    @cached_property
    def freqs(self) -> np.ndarray:
        """All frequency grid points w_k, shape (N,). Read-only."""
        w = self.dw * np.arange(self.N)
        w.flags.writeable = False
        return w

    @cached_property
    def times(self) -> np.ndarray:
        """All time grid points t_m, shape (M,). Read-only."""
        t = self.dt * np.arange(self.M)
        t.flags.writeable = False
        return t

    @cached_property
    def pairs(self) -> "TrianglePairs":
        return triangle_pairs(self.N)

    def same_as(self, other: "SimulationGrid") -> bool:
        return (
            self.N == other.N
            and self.M == other.M
            and self.omega_u == other.omega_u
            and self.T == other.T
        )


def make_grid(N: int, M: int, omega_u: float, T: float) -> SimulationGrid:
    """Validate parameters and build a :class:`SimulationGrid`.

    Raises
    ------
    InvalidParameterError
        If any argument is non-positive, N/M are not integral, or N < 2 / M < 2.
    """
    if int(N) != N or int(M) != M:
        raise InvalidParameterError("N and M must be integers")
    N, M = int(N), int(M)
    if N < 2:
        raise InvalidParameterError(f"N must be >= 2, got {N}")
    if M < 2:
        raise InvalidParameterError(f"M must be >= 2, got {M}")
    if not (omega_u > 0):
        raise InvalidParameterError(f"omega_u must be positive, got {omega_u}")
    if not (T > 0):
        raise InvalidParameterError(f"T must be positive, got {T}")
    return SimulationGrid(N=N, M=M, omega_u=float(omega_u), T=float(T))


def fft_compatible_cutoff(N: int, T: float) -> float:
    """Cutoff frequency for which dw*dt = 2*pi/M holds exactly: 2*pi*N/T.

    The two reference ground-motion setups quote cutoffs rounded to two
    decimals (4.02, 125.66); this returns the unrounded values they stand for.
    """
    return 2.0 * math.pi * N / T


class TrianglePairs:
    """Canonical enumeration of the frequency-pair triangle for one grid size.

    Pairs (i, j) with i >= j >= 0 and i + j <= N - 1 are stored sorted by sum
    index k = i + j, then by ascending j. Within each k-block the j = 0 pair
    comes first; the *active* view drops those, since spectral conventions
    force every quantity at w_0 to zero. All arrays are read-only.

    Attributes
    ----------
    i, j, k : int arrays over the full triangle, length ``n_full``.
    start : block offsets into the full arrays; block k is start[k]:start[k+1].
    act_i, act_j, act_k : the j >= 1 subset, length ``n_active``, also k-sorted.
    act_start : block offsets into the active arrays.
    act_weight : full-square multiplicity of each active pair (2 off-diagonal,
        1 on the diagonal i == j).
    """

    def __init__(self, N: int):
        if N < 2:
            raise InvalidParameterError(f"triangle needs N >= 2, got {N}")
        self.N = N
        i_list, j_list, k_list = [], [], []
        start = [0]
        for k in range(N):
            for j in range(0, k // 2 + 1):
                i_list.append(k - j)
                j_list.append(j)
                k_list.append(k)
            start.append(len(i_list))
        self.i = np.asarray(i_list, dtype=np.intp)
        self.j = np.asarray(j_list, dtype=np.intp)
        self.k = np.asarray(k_list, dtype=np.intp)
        self.start = np.asarray(start, dtype=np.intp)

        active = self.j >= 1
        self.act_i = self.i[active]
        self.act_j = self.j[active]
        self.act_k = self.k[active]
        # each k-block loses exactly its leading j = 0 element
        self.act_start = self.start[:-1] - np.arange(N)
        self.act_start = np.append(self.act_start, self.act_i.size)
        self.act_weight = np.where(self.act_i == self.act_j, 1.0, 2.0)
        for arr in (self.i, self.j, self.k, self.start, self.act_i, self.act_j,
                    self.act_k, self.act_start, self.act_weight):
            arr.flags.writeable = False

    @property
    def n_full(self) -> int:
        return self.i.size

    @property
    def n_active(self) -> int:
        return self.act_i.size

    def act_block(self, k: int) -> slice:
        """Slice of the active arrays holding the pairs with i + j == k."""
        return slice(self.act_start[k], self.act_start[k + 1])

    def full_index(self, i: int, j: int) -> int:
        """Flat position of pair (i, j) in the full-triangle ordering."""
        k = i + j
        if not (0 <= j <= i and k <= self.N - 1):
            raise InvalidParameterError(f"pair ({i}, {j}) outside triangle for N={self.N}")
        return int(self.start[k]) + j


@lru_cache(maxsize=32)
def triangle_pairs(N: int) -> TrianglePairs:
    return TrianglePairs(N)
