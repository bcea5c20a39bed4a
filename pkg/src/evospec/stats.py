"""Ensemble estimators and closed-form moment targets.

Closed forms on the grid (one-sided convention):

    E[X^2(t)] = 2 dw  sum_k S(t, w_k)
    E[X^3(t)] = 12 dw^2 sum_k sum_{i+j=k, i>=j>=1} Re B(t, w_i, w_j)

The third-moment sum runs over the ordered pair triangle. For comparisons
against reduced-model diagnostics (which sum over the full component square)
the reference targets of :func:`pod_reference_targets` weight off-diagonal
pairs twice and diagonal pairs once, so that at full rank the reduced model
reproduces them to round-off.

Empirical estimators use central moments with divisor n; the process is
zero-mean by construction, so centering only matters at small n. The skewness
ratio is guarded by a variance floor of 1e-12 times the curve's maximum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .kernel import ThirdOrderKernel, build_kernel, require_kernel_grid
from .pod import PodFactorization, normalized_bispectrum_tensor, pod_diagnostics
from .spectra import EvolutionaryBispectrum, EvolutionarySpectrum, require_same_grid

VAR_FLOOR_REL = 1e-12


@dataclass(frozen=True)
class MomentCurves:
    """Time-resolved first three moments and skewness."""

    t: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    m3: np.ndarray
    skew: np.ndarray
    n_samples: int | None
    flavor: str  # "empirical" | "theoretical"


def _guarded_skew(m3: np.ndarray, var: np.ndarray) -> np.ndarray:
    floor = VAR_FLOOR_REL * var.max() if var.size else 0.0
    out = np.zeros_like(var)
    mask = var > floor
    out[mask] = m3[mask] / var[mask] ** 1.5
    return out


def empirical_moments(ensemble: np.ndarray, grid) -> MomentCurves:
    """Per-time mean, central variance, central third moment of an ensemble.

    ``ensemble`` has shape (n_samples, M), one row per sample path.
    """
    ensemble = np.asarray(ensemble)
    if ensemble.ndim != 2 or ensemble.shape[0] < 2:
        raise InvalidParameterError("ensemble must be (n_samples >= 2, M)")
    if ensemble.shape[1] != grid.M:
        raise InvalidParameterError(
            f"ensemble has {ensemble.shape[1]} time points, grid expects {grid.M}"
        )
    n = ensemble.shape[0]
    mean = ensemble.mean(axis=0)
    dev = ensemble - mean
    var = np.einsum("sm,sm->m", dev, dev) / n
    m3 = np.einsum("sm,sm,sm->m", dev, dev, dev) / n
    return MomentCurves(
        t=grid.times, mean=mean, var=var, m3=m3, skew=_guarded_skew(m3, var),
        n_samples=n, flavor="empirical",
    )


def theoretical_moments(S: EvolutionarySpectrum, B: EvolutionaryBispectrum) -> MomentCurves:
    """Closed-form moment curves from the prescribed spectrum and bispectrum."""
    require_same_grid(S, B, "spectrum and bispectrum")
    grid = S.grid
    var = S.total_variance()
    act = grid.pairs.j >= 1
    m3 = np.empty(grid.M)
    for m in range(grid.M):
        m3[m] = 12.0 * grid.dw**2 * B.tri_slice(m)[act].real.sum()
    return MomentCurves(
        t=grid.times, mean=np.zeros(grid.M), var=var, m3=m3,
        skew=_guarded_skew(m3, var), n_samples=None, flavor="theoretical",
    )


def theoretical_autocorrelation(S: EvolutionarySpectrum, B: EvolutionaryBispectrum,
                                kernel: ThirdOrderKernel, t_index: int,
                                tau_indices) -> np.ndarray:
    """Closed-form two-point correlation R2(t, t + tau) on grid lags.

    R2 = 2 sum_k [ sqrt(Sp(t, wk) Sp(t+tau, wk)) dw cos(wk tau)
         + sum_{i+j=k, i>=j>=1} sqrt(S(t, wk) S(t+tau, wk))
           bp(t) bp(t+tau) dw cos(wk tau + beta(t+tau) - beta(t)) ]

    At tau = 0 this reduces exactly to the theoretical variance.
    """
    require_same_grid(S, B, "spectrum and bispectrum")
    require_kernel_grid(kernel, S, "spectrum")
    grid = S.grid
    tau_indices = np.asarray(tau_indices, dtype=np.intp)
    if not (0 <= t_index < grid.M):
        raise InvalidParameterError(f"t_index {t_index} off grid")
    if np.any(tau_indices + t_index >= grid.M) or np.any(tau_indices + t_index < 0):
        raise InvalidParameterError("a lag index falls off the time grid")

    pairs = grid.pairs
    w = grid.freqs
    wk_pair = w[pairs.act_k]
    sp_t = kernel.s_pure[t_index]
    bp_t = kernel.bicoh[t_index]
    beta_t = kernel.biphase[t_index] if kernel.has_biphase else 0.0
    S_t = S.values[t_index]
    out = np.empty(tau_indices.size)
    for n, ti in enumerate(tau_indices):
        m2 = t_index + int(ti)
        tau = grid.times[m2] - grid.times[t_index]
        pure = np.sum(np.sqrt(sp_t * kernel.s_pure[m2]) * grid.dw * np.cos(w * tau))
        bp_2 = kernel.bicoh[m2]
        dbeta = (kernel.biphase[m2] - beta_t) if kernel.has_biphase else 0.0
        inter = np.sum(
            np.sqrt(S_t[pairs.act_k] * S.values[m2, pairs.act_k])
            * bp_t * bp_2 * grid.dw * np.cos(wk_pair * tau + dbeta)
        )
        out[n] = 2.0 * (pure + inter)
    return out


# ----------------------------------------------------------------------------
# Reduced-model convergence study
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    """One (n_q, probe time) record of the convergence study."""

    n_q: int
    t: float
    varp_pod: float
    vari_pod: float
    var_pod: float
    m3_pod: float
    skew_pod: float
    varp_ref: float
    vari_ref: float
    var_ref: float
    m3_ref: float
    skew_ref: float


def pod_reference_targets(S: EvolutionarySpectrum, kernel: ThirdOrderKernel,
                          time_indices) -> dict:
    """Grid-formula targets in the full-square pair convention.

    varp = 2 dw sum_k Sp;   vari = dw^2 sum_square |B|^2 / (Sp_i Sp_j);
    m3 = 6 dw^2 sum_square Re B. Off-diagonal pairs count twice. The effective
    |B| is reconstructed from the kernel (bp sqrt(Sp_i Sp_j S_k / dw)), so
    pairs dropped by the denominator guard are excluded on both sides of any
    comparison. At full rank the reduced-model diagnostics reproduce these to
    round-off.
    """
    require_kernel_grid(kernel, S, "spectrum")
    grid = S.grid
    pairs = grid.pairs
    idx = np.asarray(time_indices, dtype=np.intp)
    dw = grid.dw
    wgt = pairs.act_weight
    varp = 2.0 * dw * kernel.s_pure[idx].sum(axis=1)
    # |G|^2 = bp^2 * S_k / dw on every kept pair
    g2 = kernel.bicoh[idx] ** 2 * S.values[idx][:, pairs.act_k] / dw
    vari = dw**2 * (g2 * wgt).sum(axis=1)
    amp = kernel.bicoh[idx] * np.sqrt(
        kernel.s_pure[idx][:, pairs.act_i] * kernel.s_pure[idx][:, pairs.act_j]
        * S.values[idx][:, pairs.act_k] / dw
    )
    if kernel.has_biphase:
        re_b = amp * np.cos(kernel.biphase[idx])
    else:
        re_b = amp
    m3 = 6.0 * dw**2 * (re_b * wgt).sum(axis=1)
    var = varp + vari
    return {
        "varp": varp, "vari": vari, "var": var, "m3": m3,
        "skew": _guarded_skew(m3, var),
    }


def convergence_study(S: EvolutionarySpectrum, B: EvolutionaryBispectrum,
                      n_q_list, t_probe_indices,
                      kernel: ThirdOrderKernel | None = None) -> list[ConvergenceRow]:
    """Reduced-model diagnostics vs grid targets for each retained rank.

    One decomposition serves every n_q (truncations of one orthonormal basis
    are nested), so the study costs a single eigensolve plus cheap
    projections at the probe times.
    """
    require_same_grid(S, B, "spectrum and bispectrum")
    if kernel is None:
        kernel = build_kernel(S, B)
    probes = np.asarray(t_probe_indices, dtype=np.intp)
    G = normalized_bispectrum_tensor(S, B, kernel)
    fact = PodFactorization(G, kernel.s_pure)
    ref = pod_reference_targets(S, kernel, probes)
    rows: list[ConvergenceRow] = []
    for n_q in n_q_list:
        model = fact.model(int(n_q), time_indices=probes)
        diag = pod_diagnostics(model)
        for p in range(probes.size):
            rows.append(ConvergenceRow(
                n_q=int(n_q), t=float(S.grid.times[probes[p]]),
                varp_pod=float(diag.var_pure[p]), vari_pod=float(diag.var_inter[p]),
                var_pod=float(diag.var_total[p]), m3_pod=float(diag.m3[p]),
                skew_pod=float(diag.skew[p]),
                varp_ref=float(ref["varp"][p]), vari_ref=float(ref["vari"][p]),
                var_ref=float(ref["var"][p]), m3_ref=float(ref["m3"][p]),
                skew_ref=float(ref["skew"][p]),
            ))
    return rows
