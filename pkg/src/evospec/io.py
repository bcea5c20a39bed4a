"""File formats: spectra, bispectra, ensembles, statistics, model bundles.

Spectrum file (CSV)
    header ``EPS,N,M,omega_u,T`` then M rows of N comma-separated
    non-negative decimals; row m is the time slice t_m.

Bispectrum file (CSV)
    header ``EBS,N,M,omega_u,T`` then lines ``m,i,j,re,im`` restricted to the
    triangle 0 <= j <= i, i + j <= N - 1. Absent entries are zero; entries at
    j = 0 must be zero if present.

Floats are written with ``repr`` (shortest round-trip form), so export
followed by load reproduces arrays bit for bit.

Ensemble files
    ``samples.csv`` with header ``t,s0,s1,...`` and one row per time point,
    or a raw little-endian float64 matrix of shape (M, n_samples) behind a
    24-byte header: 8 magic bytes ``EVOSPENS`` then uint64 M and n_samples.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FormatError
from .grid import SimulationGrid, make_grid
from .spectra import EvolutionaryBispectrum, EvolutionarySpectrum, require_same_grid

ENSEMBLE_MAGIC = b"EVOSPENS"


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_header(line: str, tag: str, path, ln: int = 1) -> SimulationGrid:
    parts = line.strip().split(",")
    if len(parts) != 5 or parts[0] != tag:
        raise FormatError(f"{path}: line {ln}: expected header '{tag},N,M,omega_u,T'")
    try:
        N, M = int(parts[1]), int(parts[2])
        omega_u, T = float(parts[3]), float(parts[4])
    except ValueError as exc:
        raise FormatError(f"{path}: line {ln}: malformed header field: {exc}") from None
    try:
        return make_grid(N, M, omega_u, T)
    except Exception as exc:
        raise FormatError(f"{path}: line {ln}: invalid grid parameters: {exc}") from None


def write_spectrum_csv(S: EvolutionarySpectrum, path) -> None:
    grid = S.grid
    with open(path, "w") as fh:
        fh.write(f"EPS,{grid.N},{grid.M},{_fmt(grid.omega_u)},{_fmt(grid.T)}\n")
        for m in range(grid.M):
            fh.write(",".join(_fmt(v) for v in S.values[m]) + "\n")


def read_spectrum_csv(path) -> EvolutionarySpectrum:
    with open(path) as fh:
        grid = _parse_header(fh.readline(), "EPS", path)
        values = np.empty((grid.M, grid.N))
        for m in range(grid.M):
            ln = m + 2
            line = fh.readline()
            if not line:
                raise FormatError(f"{path}: line {ln}: expected {grid.M} data rows")
            fields = line.strip().split(",")
            if len(fields) != grid.N:
                raise FormatError(
                    f"{path}: line {ln}: expected {grid.N} values, got {len(fields)}"
                )
            try:
                row = np.array([float(f) for f in fields])
            except ValueError as exc:
                raise FormatError(f"{path}: line {ln}: bad value: {exc}") from None
            if np.any(row < 0):
                raise FormatError(f"{path}: line {ln}: negative spectral density")
            if row[0] != 0.0:
                raise FormatError(f"{path}: line {ln}: value at k=0 must be zero")
            values[m] = row
        if fh.readline().strip():
            raise FormatError(f"{path}: line {grid.M + 2}: trailing data")
    return EvolutionarySpectrum(grid, values)


def write_bispectrum_csv(B: EvolutionaryBispectrum, path) -> None:
    """Write non-zero triangle entries; absent entries mean zero."""
    grid = B.grid
    pairs = grid.pairs
    with open(path, "w") as fh:
        fh.write(f"EBS,{grid.N},{grid.M},{_fmt(grid.omega_u)},{_fmt(grid.T)}\n")
        for m in range(grid.M):
            row = B.tri_slice(m)
            for p in np.flatnonzero(row != 0):
                v = row[p]
                fh.write(f"{m},{pairs.i[p]},{pairs.j[p]},{_fmt(v.real)},{_fmt(v.imag)}\n")


def read_bispectrum_csv(path) -> EvolutionaryBispectrum:
    with open(path) as fh:
        grid = _parse_header(fh.readline(), "EBS", path)
        pairs = grid.pairs
        entries = np.zeros((grid.M, pairs.n_full), dtype=np.complex128)
        seen = set()
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != 5:
                raise FormatError(f"{path}: line {ln}: expected 'm,i,j,re,im'")
            try:
                m, i, j = int(fields[0]), int(fields[1]), int(fields[2])
                re, im = float(fields[3]), float(fields[4])
            except ValueError as exc:
                raise FormatError(f"{path}: line {ln}: bad field: {exc}") from None
            if not (0 <= m < grid.M):
                raise FormatError(f"{path}: line {ln}: time index {m} out of range")
            if not (0 <= j <= i):
                raise FormatError(f"{path}: line {ln}: pair ({i},{j}) not ordered i >= j >= 0")
            if i + j > grid.N - 1 or i > grid.N - 1:
                raise FormatError(
                    f"{path}: line {ln}: pair ({i},{j}) outside triangular support"
                )
            if j == 0 and (re != 0.0 or im != 0.0):
                raise FormatError(f"{path}: line {ln}: entries at j=0 must be zero")
            if (m, i, j) in seen:
                raise FormatError(f"{path}: line {ln}: duplicate entry ({m},{i},{j})")
            seen.add((m, i, j))
            entries[m, pairs.full_index(i, j)] = complex(re, im)
    return EvolutionaryBispectrum(grid, entries=entries)


def export_spectrum_files(S: EvolutionarySpectrum, B: EvolutionaryBispectrum,
                          spectrum_path, bispectrum_path) -> None:
    require_same_grid(S, B, "spectrum and bispectrum")
    write_spectrum_csv(S, spectrum_path)
    write_bispectrum_csv(B, bispectrum_path)


def load_spectrum_files(spectrum_path, bispectrum_path):
    """Load and validate a spectrum/bispectrum file pair on a shared grid."""
    S = read_spectrum_csv(spectrum_path)
    B = read_bispectrum_csv(bispectrum_path)
    if not S.grid.same_as(B.grid):
        raise FormatError(
            f"{spectrum_path} and {bispectrum_path} declare different grids"
        )
    return S, B


# ----------------------------------------------------------------------------
# Ensembles
# ----------------------------------------------------------------------------

def write_samples_csv(ensemble: np.ndarray, grid: SimulationGrid, path) -> None:
    """Columns t, s0, s1, ...; one row per time point."""
    n = ensemble.shape[0]
    with open(path, "w") as fh:
        fh.write("t," + ",".join(f"s{s}" for s in range(n)) + "\n")
        for m in range(grid.M):
            fh.write(_fmt(grid.times[m]) + ","
                     + ",".join(_fmt(v) for v in ensemble[:, m]) + "\n")


def read_samples_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Returns (times, ensemble) with ensemble shaped (n_samples, M)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "t":
            raise FormatError(f"{path}: line 1: expected header 't,s0,...'")
        n = len(header) - 1
        times, cols = [], []
        for ln, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.strip().split(",")
            if len(fields) != n + 1:
                raise FormatError(f"{path}: line {ln}: expected {n + 1} values")
            times.append(float(fields[0]))
            cols.append([float(f) for f in fields[1:]])
    return np.asarray(times), np.asarray(cols).T


def write_samples_raw(ensemble: np.ndarray, path) -> None:
    """24-byte header (magic, M, n_samples) then (M, n_samples) float64 LE."""
    n, M = ensemble.shape
    with open(path, "wb") as fh:
        fh.write(ENSEMBLE_MAGIC)
        fh.write(np.array([M, n], dtype="<u8").tobytes())
        fh.write(np.ascontiguousarray(ensemble.T, dtype="<f8").tobytes())


def read_samples_raw(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != ENSEMBLE_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        M, n = np.frombuffer(fh.read(16), dtype="<u8")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != M * n:
        raise FormatError(f"{path}: truncated payload")
    return data.reshape(int(M), int(n)).T.copy()


# ----------------------------------------------------------------------------
# Statistics and convergence tables
# ----------------------------------------------------------------------------

STATS_COLUMNS = "t,mean_emp,var_emp,var_th,m3_emp,m3_th,skew_emp,skew_th"
CONVERGENCE_COLUMNS = ("nq,t,varp_pod,vari_pod,var_pod,m3_pod,skew_pod,"
                       "varp_ref,vari_ref,var_ref,m3_ref,skew_ref")


def write_stats_csv(empirical, theoretical, path) -> None:
    with open(path, "w") as fh:
        fh.write(STATS_COLUMNS + "\n")
        for m in range(empirical.t.size):
            fh.write(",".join(_fmt(v) for v in (
                empirical.t[m], empirical.mean[m], empirical.var[m],
                theoretical.var[m], empirical.m3[m], theoretical.m3[m],
                empirical.skew[m], theoretical.skew[m],
            )) + "\n")


def write_convergence_csv(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write(CONVERGENCE_COLUMNS + "\n")
        for r in rows:
            fh.write(f"{r.n_q}," + ",".join(_fmt(v) for v in (
                r.t, r.varp_pod, r.vari_pod, r.var_pod, r.m3_pod, r.skew_pod,
                r.varp_ref, r.vari_ref, r.var_ref, r.m3_ref, r.skew_ref,
            )) + "\n")


# ----------------------------------------------------------------------------
# Reduced-model bundle
# ----------------------------------------------------------------------------

def export_pod_model(model, out_dir) -> None:
    """Write basis.csv (N x n_q), a.csv (n_t x n_q), b.csv (r,s,m,re,im)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "basis.csv", "w") as fh:
        for k in range(model.grid.N):
            fh.write(",".join(_fmt(model.basis[q, k]) for q in range(model.n_q)) + "\n")
    with open(out / "a.csv", "w") as fh:
        for col in range(model.a.shape[1]):
            fh.write(",".join(_fmt(model.a[q, col]) for q in range(model.n_q)) + "\n")
    with open(out / "b.csv", "w") as fh:
        for r in range(model.n_q):
            for s in range(model.n_q):
                for col in range(model.b.shape[2]):
                    v = model.b[r, s, col]
                    fh.write(f"{r},{s},{col},{_fmt(v.real)},{_fmt(v.imag)}\n")


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
