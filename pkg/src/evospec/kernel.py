"""Derived third-order quantities: pure spectrum, partial bicoherence, biphase.

For each time slice, frequencies are processed in increasing order k = 0..N-1.
Every pair (i, j) with i + j = k and i >= j >= 1 satisfies i, j < k, so the
pure spectral density at lower frequencies is already known when the pair's
partial bicoherence

    bp^2(t, wi, wj) = |B(t, wi, wj)|^2 dw / (Sp(t, wi) Sp(t, wj) S(t, wk))

is formed, and the recursion

    Sp(t, wk) = S(t, wk) * (1 - sum_{i+j=k, i>=j>=1} bp^2(t, wi, wj))

is well founded. The residual 1 - sum bp^2 measures feasibility: a negative
value means the prescribed bispectrum carries more phase-coupled power at wk
than the spectrum provides. Small negative residuals (float undershoot) are
clamped to zero and counted; residuals below -feas_tol raise
:class:`InfeasibleSkewnessError`.

Pairs whose denominator Sp*Sp*S falls below ``eps_denom`` are dropped (bp = 0,
beta = 0); they sit in spectral tails and carry negligible power, and the
guard avoids 0/0 at frequencies where the spectrum vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridCompatibilityError, InfeasibleSkewnessError
from .grid import SimulationGrid
from .spectra import EvolutionaryBispectrum, EvolutionarySpectrum, require_same_grid

EPS_DENOM_DEFAULT = 1e-30
FEAS_TOL_DEFAULT = 1e-9


@dataclass(frozen=True)
class FeasibilityReport:
    """Feasibility diagnostics of a built kernel.

    min_residual : per-time-slice minimum of 1 - sum bp^2 over k, shape (M,).
    clamped : number of (m, k) points whose residual was clamped to zero.
    max_bicoherence : largest partial bicoherence magnitude encountered.
    interactive_fraction : per-slice fraction of spectral power carried by
        pair interactions, sum_k (S - Sp) / sum_k S, shape (M,).
    total_interactive_fraction : the same fraction pooled over all slices.
    """

    min_residual: np.ndarray
    clamped: int
    max_bicoherence: float
    interactive_fraction: np.ndarray
    total_interactive_fraction: float


class ThirdOrderKernel:
    """Immutable container for Sp, bp and beta on the active pair triangle.

    ``s_pure`` has shape (M, N); ``bicoh`` and ``biphase`` have shape
    (M, n_active) in the canonical active-pair ordering of the grid's
    :class:`~evospec.grid.TrianglePairs`. For purely real bispectra the
    biphase is identically zero and stored implicitly.
    """

    def __init__(self, grid: SimulationGrid, s_pure: np.ndarray, bicoh: np.ndarray,
                 biphase: np.ndarray | None, report: FeasibilityReport):
        self.grid = grid
        self.s_pure = s_pure
        self.bicoh = bicoh
        self._biphase = biphase
        self.report = report
        for arr in (s_pure, bicoh) + (() if biphase is None else (biphase,)):
            arr.flags.writeable = False

    @property
    def has_biphase(self) -> bool:
        return self._biphase is not None

    @property
    def biphase(self) -> np.ndarray:
        if self._biphase is None:
            out = np.zeros_like(self.bicoh)
            out.flags.writeable = False
            return out
        return self._biphase


def _slice_recursion(S_row, B_row, pairs, dw, eps_denom, feas_tol, m, stats):
    """One time slice of the recursion. Returns (s_pure_row, bp_row, beta_row)."""
    N = S_row.size
    sp = np.empty(N)
    bp = np.zeros(pairs.n_active)
    beta = np.zeros(pairs.n_active)
    min_resid = 1.0
    for k in range(N):
        blk = pairs.act_block(k)
        if blk.start == blk.stop:
            sp[k] = S_row[k]
            continue
        denom = sp[pairs.act_i[blk]] * sp[pairs.act_j[blk]] * S_row[k]
        # skip the leading j = 0 entry of the full-triangle block
        Bv = B_row[pairs.start[k] + 1: pairs.start[k + 1]]
        ok = denom >= eps_denom
        bp2 = np.zeros(denom.size)
        np.divide(np.abs(Bv) ** 2 * dw, denom, out=bp2, where=ok)
        resid = 1.0 - bp2.sum()
        if resid < -feas_tol:
            raise InfeasibleSkewnessError(m, k, -resid)
        if resid < min_resid:
            min_resid = resid
        if resid < 0.0:
            stats["clamped"] += 1
            resid = 0.0
        bp[blk] = np.sqrt(bp2)
        beta[blk] = np.where(bp2 > 0, np.arctan2(Bv.imag, Bv.real), 0.0)
        sp[k] = S_row[k] * resid
    stats["min_resid"] = min_resid
    return sp, bp, beta


def iter_kernel_slices(S: EvolutionarySpectrum, B: EvolutionaryBispectrum,
                       eps_denom: float = EPS_DENOM_DEFAULT,
                       feas_tol: float = FEAS_TOL_DEFAULT):
    """Yield (m, s_pure_row, bp_row, beta_row) without storing the kernel.

    Streaming form of :func:`build_kernel` for consumers that reduce over
    slices (tensor assembly, projections). Slice values are bit-identical to
    the stored kernel's rows.
    """
    require_same_grid(S, B, "spectrum and bispectrum")
    pairs = S.grid.pairs
    dw = S.grid.dw
    stats = {"clamped": 0, "min_resid": 1.0}
    for m in range(S.grid.M):
        sp, bp, beta = _slice_recursion(
            S.values[m], B.tri_slice(m), pairs, dw, eps_denom, feas_tol, m, stats
        )
        yield m, sp, bp, beta


def build_kernel(S: EvolutionarySpectrum, B: EvolutionaryBispectrum,
                 eps_denom: float = EPS_DENOM_DEFAULT,
                 feas_tol: float = FEAS_TOL_DEFAULT) -> ThirdOrderKernel:
    """Run the increasing-frequency recursion over every time slice.

    Time slices are independent; for dense bispectra the recursion is
    vectorized across all slices per frequency, otherwise slices stream
    through :func:`iter_kernel_slices`. Both paths produce identical values.

    Raises
    ------
    InfeasibleSkewnessError
        If 1 - sum bp^2 < -feas_tol at any (m, k); the error names the first
        offending frequency index and the smallest time index there.
    """
    require_same_grid(S, B, "spectrum and bispectrum")
    grid = S.grid
    if not B.is_dense:
        return _build_streamed(S, B, eps_denom, feas_tol)

    pairs = grid.pairs
    M, N = grid.M, grid.N
    dw = grid.dw
    Sv = S.values
    sp = np.empty((M, N))
    bp = np.zeros((M, pairs.n_active))
    # non-negative real entries all carry zero biphase; negative real ones
    # carry pi, so they need the phase array like any complex bispectrum
    zero_phase = bool(np.all(B.entries.imag == 0) and np.all(B.entries.real >= 0))
    beta = None if zero_phase else np.zeros((M, pairs.n_active))
    clamped = 0
    min_resid = np.full(M, 1.0)

    for k in range(N):
        blk = pairs.act_block(k)
        if blk.start == blk.stop:
            sp[:, k] = Sv[:, k]
            continue
        ii = pairs.act_i[blk]
        jj = pairs.act_j[blk]
        Bv = B.entries[:, pairs.start[k] + 1: pairs.start[k + 1]]
        denom = sp[:, ii] * sp[:, jj] * Sv[:, k:k + 1]
        ok = denom >= eps_denom
        bp2 = np.zeros_like(denom)
        np.divide(np.abs(Bv) ** 2 * dw, denom, out=bp2, where=ok)
        resid = 1.0 - bp2.sum(axis=1)
        bad = resid < -feas_tol
        if np.any(bad):
            m_bad = int(np.flatnonzero(bad)[0])
            raise InfeasibleSkewnessError(m_bad, k, float(-resid[m_bad]))
        np.minimum(min_resid, resid, out=min_resid)
        neg = resid < 0.0
        clamped += int(neg.sum())
        resid[neg] = 0.0
        bp[:, blk] = np.sqrt(bp2)
        if beta is not None:
            ang = np.where(bp2 > 0, np.arctan2(Bv.imag, Bv.real), 0.0)
            beta[:, blk] = ang
        sp[:, k] = Sv[:, k] * resid

    report = _make_report(Sv, sp, bp, min_resid, clamped)
    return ThirdOrderKernel(grid, sp, bp, beta, report)


def _build_streamed(S, B, eps_denom, feas_tol) -> ThirdOrderKernel:
    grid = S.grid
    pairs = grid.pairs
    sp = np.empty((grid.M, grid.N))
    bp = np.empty((grid.M, pairs.n_active))
    beta = np.empty((grid.M, pairs.n_active))
    min_resid = np.empty(grid.M)
    stats = {"clamped": 0, "min_resid": 1.0}
    clamped = 0
    for m in range(grid.M):
        sp[m], bp[m], beta[m] = _slice_recursion(
            S.values[m], B.tri_slice(m), pairs, grid.dw, eps_denom, feas_tol, m, stats
        )
        min_resid[m] = stats["min_resid"]
        clamped = stats["clamped"]
    if np.all(beta == 0):
        beta = None
    report = _make_report(S.values, sp, bp, min_resid, clamped)
    return ThirdOrderKernel(grid, sp, bp, beta, report)


def _make_report(Sv, sp, bp, min_resid, clamped) -> FeasibilityReport:
    power = Sv.sum(axis=1)
    inter = power - sp.sum(axis=1)
    frac = np.divide(inter, power, out=np.zeros_like(power), where=power > 0)
    total = float(inter.sum() / power.sum()) if power.sum() > 0 else 0.0
    return FeasibilityReport(
        min_residual=min_resid,
        clamped=int(clamped),
        max_bicoherence=float(bp.max()) if bp.size else 0.0,
        interactive_fraction=frac,
        total_interactive_fraction=total,
    )


def kernel_report(kernel: ThirdOrderKernel) -> FeasibilityReport:
    """Feasibility diagnostics recorded while the kernel was built."""
    return kernel.report


def require_kernel_grid(kernel: ThirdOrderKernel, other, what: str = "kernel input") -> None:
    if not kernel.grid.same_as(other.grid):
        raise GridCompatibilityError(f"{what} grid does not match the kernel grid")
