"""Command-line front end: simulate, bench, convergence, export, verify.

Configuration is a flat JSON document whose keys are the RunConfig fields;
command-line flags override file values, and the fully resolved configuration
is echoed into the run manifest so any artifact directory can be reproduced
exactly (``evospec verify <dir>`` re-runs and diffs).

Exit codes: 0 success, 2 configuration error, 3 infeasible model,
4 I/O error. ``EVOSPEC_THREADS`` provides the default worker count.

Benchmark accounting mirrors the reference tables: each method is timed end
to end from the tabulated spectra, so the direct path's total includes the
third-order kernel construction it cannot avoid, while the POD path's total
splits into decomposition (kernel + tensor factorization + projections) and
per-sample FFT simulation. Timed regions wrap compute only, never file I/O.
Cells with sample counts <= 100 report the median of 3 repetitions.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import io as eio
from .direct import PhaseDraw, _Direct3Workspace, mix_seed, simulate2_direct, simulate_batch
from .errors import (EvoSpecError, FormatError, InfeasibleSkewnessError,
                     InvalidParameterError)
from .fftsim import PhaseMatrix, Pod2Simulator, Pod3Simulator
from .grid import make_grid
from .kernel import build_kernel
from .pod import PodFactorization, fit_pod, normalized_bispectrum_tensor
from .spectra import (EXAMPLE_SETUPS, build_model, fft_compatible_cutoff,
                      reference_grid, zero_bispectrum)
from .stats import convergence_study, empirical_moments, theoretical_moments

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

_EMIT_CHOICES = ("samples", "raw", "stats", "manifest")


@dataclass
class RunConfig:
    """Fully explicit run description; serializable to and from JSON."""

    model: str = "example1"
    spectrum_path: str | None = None
    bispectrum_path: str | None = None
    order: int = 3
    method: str = "direct"
    N: int | None = None
    M: int | None = None
    omega_u: float | None = None
    T: float | None = None
    n_q: int | None = None
    n_samples: int = 1
    seed: int = 0
    out_dir: str = "evospec-out"
    emit: list = field(default_factory=lambda: ["samples", "stats", "manifest"])
    workers: int = field(
        default_factory=lambda: int(os.environ.get("EVOSPEC_THREADS", "1"))
    )

    def validate(self) -> None:
        if self.model not in ("example1", "example2", "files"):
            raise InvalidParameterError(
                "field 'model': must be one of example1, example2, files"
            )
        if self.model == "files" and not (self.spectrum_path and self.bispectrum_path):
            raise InvalidParameterError(
                "field 'spectrum_path'/'bispectrum_path': required when model=files"
            )
        if self.order not in (2, 3):
            raise InvalidParameterError("field 'order': must be 2 or 3")
        if self.method not in ("direct", "pod"):
            raise InvalidParameterError("field 'method': must be direct or pod")
        if self.method == "pod" and (self.n_q is None or self.n_q < 1):
            raise InvalidParameterError("field 'n_q': must be a positive count for method=pod")
        if self.n_samples < 1:
            raise InvalidParameterError("field 'n_samples': must be >= 1")
        if self.workers < 1:
            raise InvalidParameterError("field 'workers': must be >= 1")
        for item in self.emit:
            if item not in _EMIT_CHOICES:
                raise InvalidParameterError(
                    f"field 'emit': unknown artifact {item!r} (choices {_EMIT_CHOICES})"
                )

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            data = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def resolve_inputs(cfg: RunConfig):
    """Build (grid, spectrum, bispectrum) from a validated config."""
    if cfg.model == "files":
        S, B = eio.load_spectrum_files(cfg.spectrum_path, cfg.bispectrum_path)
        return S.grid, S, B
    N, M, T = EXAMPLE_SETUPS[cfg.model]
    N = cfg.N if cfg.N is not None else N
    M = cfg.M if cfg.M is not None else M
    T = cfg.T if cfg.T is not None else T
    omega_u = cfg.omega_u if cfg.omega_u is not None else fft_compatible_cutoff(N, T)
    grid = make_grid(N, M, omega_u, T)
    S, B = build_model(cfg.model, grid)
    if cfg.order == 2:
        B = zero_bispectrum(grid)
    return grid, S, B


def _grid_dict(grid) -> dict:
    return {
        "N": grid.N, "M": grid.M, "omega_u": grid.omega_u, "T": grid.T,
        "dw": grid.dw, "dt": grid.dt, "fft_compatible": grid.fft_compatible,
    }


# ----------------------------------------------------------------------------
# simulate
# ----------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig) -> int:
    cfg.validate()
    grid, S, B = resolve_inputs(cfg)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    kernel = build_kernel(S, B) if cfg.order == 3 else None
    timings["setup_s"] = time.perf_counter() - t0

    pod_model = None
    t0 = time.perf_counter()
    if cfg.method == "pod" and cfg.order == 3:
        G = normalized_bispectrum_tensor(S, B, kernel)
        pod_model = fit_pod(G, kernel.s_pure, cfg.n_q)
    timings["decompose_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ensemble = simulate_batch(
        S, order=cfg.order, method=cfg.method, kernel=kernel, pod_model=pod_model,
        n_q=cfg.n_q, n_samples=cfg.n_samples, base_seed=cfg.seed, workers=cfg.workers,
    )
    timings["simulate_s"] = time.perf_counter() - t0

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = []
    t0 = time.perf_counter()
    if "samples" in cfg.emit:
        eio.write_samples_csv(ensemble, grid, out / "samples.csv")
        artifacts.append("samples.csv")
    if "raw" in cfg.emit:
        eio.write_samples_raw(ensemble, out / "samples.bin")
        artifacts.append("samples.bin")
    if "stats" in cfg.emit:
        emp = empirical_moments(ensemble, grid) if cfg.n_samples >= 2 else None
        th = theoretical_moments(S, B)
        if emp is not None:
            eio.write_stats_csv(emp, th, out / "stats.csv")
            artifacts.append("stats.csv")
    timings["write_s"] = time.perf_counter() - t0

    if "manifest" in cfg.emit:
        eio.write_json({
            "config": asdict(cfg),
            "grid": _grid_dict(grid),
            "version": __version__,
            "method": cfg.method, "order": cfg.order, "n_q": cfg.n_q,
            "seed": cfg.seed, "workers": cfg.workers,
            "timings": timings,
            "artifacts": artifacts,
        }, out / "manifest.json")
    print(f"wrote {', '.join(artifacts) or 'nothing'} to {out}")
    return EXIT_OK


# ----------------------------------------------------------------------------
# bench
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchRecord:
    """One timing cell; decomposition is zero for the direct method."""

    method: str
    order: int
    n_samples: int
    t_decompose: float
    t_simulate: float
    t_total: float


def _bench_direct(S, B, order, n, base_seed):
    t0 = time.perf_counter()
    if order == 3:
        kernel = build_kernel(S, B)
        sim = _Direct3Workspace(S, kernel)
        run = lambda ph: sim.simulate(ph)
    else:
        run = lambda ph: simulate2_direct(S, ph)
    t1 = time.perf_counter()
    for s in range(n):
        run(PhaseDraw.from_seed(mix_seed(base_seed, s), S.grid.N))
    t2 = time.perf_counter()
    return BenchRecord("direct", order, n, 0.0, t2 - t1, t2 - t0)


def _bench_pod(S, B, order, n, n_q, base_seed):
    t0 = time.perf_counter()
    if order == 3:
        kernel = build_kernel(S, B)
        G = normalized_bispectrum_tensor(S, B, kernel)
        model = PodFactorization(G, kernel.s_pure).model(n_q)
        sim = Pod3Simulator(S, kernel, model)
    else:
        sim = Pod2Simulator(S, n_q)
    t1 = time.perf_counter()
    for s in range(n):
        sim.simulate(PhaseMatrix.from_seed(mix_seed(base_seed, s), n_q, S.grid.N))
    t2 = time.perf_counter()
    return BenchRecord("pod", order, n, t1 - t0, t2 - t1, t2 - t0)


def run_bench(cfg: RunConfig, sample_counts) -> list[BenchRecord]:
    """Time both methods at each sample count; medians of 3 at counts <= 100."""
    cfg.validate()
    counts = sorted(sample_counts)
    if counts != list(sample_counts):
        raise InvalidParameterError("sample counts must be ascending")
    _, S, B = resolve_inputs(cfg)
    n_q = cfg.n_q if cfg.n_q is not None else 10
    records = []
    for n in counts:
        for which in ("direct", "pod"):
            reps = 3 if n <= 100 else 1
            cells = []
            for _ in range(reps):
                if which == "direct":
                    cells.append(_bench_direct(S, B, cfg.order, n, cfg.seed))
                else:
                    cells.append(_bench_pod(S, B, cfg.order, n, n_q, cfg.seed))
            cells.sort(key=lambda r: r.t_total)
            records.append(cells[reps // 2])
    return records


def write_bench_csv(records, path) -> None:
    with open(path, "w") as fh:
        fh.write("method,order,n_samples,t_decompose,t_simulate,t_total\n")
        for r in records:
            fh.write(f"{r.method},{r.order},{r.n_samples},"
                     f"{r.t_decompose!r},{r.t_simulate!r},{r.t_total!r}\n")


def cmd_bench(cfg: RunConfig, sample_counts) -> int:
    records = run_bench(cfg, sample_counts)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_bench_csv(records, out / "bench.csv")
    for r in records:
        print(f"{r.method:6s} order={r.order} n={r.n_samples:<6d} "
              f"decompose={r.t_decompose:.4f}s simulate={r.t_simulate:.4f}s "
              f"total={r.t_total:.4f}s")
    return EXIT_OK


# ----------------------------------------------------------------------------
# convergence
# ----------------------------------------------------------------------------

def cmd_convergence(cfg: RunConfig, n_q_list, probe_times) -> int:
    cfg.validate()
    grid, S, B = resolve_inputs(cfg)
    probes = [int(round(t / grid.dt)) for t in probe_times]
    for t, m in zip(probe_times, probes):
        if not (0 <= m < grid.M):
            raise InvalidParameterError(f"probe time {t} falls off the grid")
    rows = convergence_study(S, B, n_q_list, probes)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    eio.write_convergence_csv(rows, out / "convergence.csv")
    print(f"wrote convergence.csv ({len(rows)} rows) to {out}")
    return EXIT_OK


# ----------------------------------------------------------------------------
# export
# ----------------------------------------------------------------------------

def cmd_export(cfg: RunConfig) -> int:
    cfg.validate()
    if cfg.model == "files":
        raise InvalidParameterError("field 'model': export needs a built-in model")
    grid, S, B = resolve_inputs(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # stage then rename so a failure leaves no partial artifacts
    spec_tmp = out / "spectrum.csv.tmp"
    bisp_tmp = out / "bispectrum.csv.tmp"
    try:
        eio.export_spectrum_files(S, B, spec_tmp, bisp_tmp)
        os.replace(spec_tmp, out / "spectrum.csv")
        os.replace(bisp_tmp, out / "bispectrum.csv")
    finally:
        for tmp in (spec_tmp, bisp_tmp):
            if tmp.exists():
                tmp.unlink()
    print(f"wrote spectrum.csv, bispectrum.csv to {out}")
    return EXIT_OK


# ----------------------------------------------------------------------------
# verify
# ----------------------------------------------------------------------------

def cmd_verify(run_dir) -> int:
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise FormatError(f"{manifest_path}: missing manifest")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    cfg = RunConfig(**manifest["config"])
    sample_artifacts = [a for a in manifest.get("artifacts", [])
                        if a in ("samples.csv", "samples.bin")]
    if not sample_artifacts:
        print("nothing to verify: run emitted no ensemble files")
        return EXIT_OK
    check_dir = run_dir / "_verify"
    cfg = replace(cfg, out_dir=str(check_dir),
                  emit=[e for e in cfg.emit if e in ("samples", "raw")])
    code = cmd_simulate(cfg)
    if code != EXIT_OK:
        return code
    ok = True
    for name in sample_artifacts:
        a = (run_dir / name).read_bytes()
        b = (check_dir / name).read_bytes()
        same = a == b
        ok = ok and same
        print(f"{name}: {'identical' if same else 'MISMATCH'}")
    return EXIT_OK if ok else 1


# ----------------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--model", choices=["example1", "example2", "files"])
    p.add_argument("--spectrum-path")
    p.add_argument("--bispectrum-path")
    p.add_argument("--order", type=int, choices=[2, 3])
    p.add_argument("--method", choices=["direct", "pod"])
    p.add_argument("-N", type=int, dest="N")
    p.add_argument("-M", type=int, dest="M")
    p.add_argument("--omega-u", type=float, dest="omega_u")
    p.add_argument("-T", type=float, dest="T")
    p.add_argument("--n-q", type=int, dest="n_q")
    p.add_argument("--n-samples", type=int, dest="n_samples")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--emit", type=lambda s: s.split(","),
                   help="comma list from samples,raw,stats,manifest")


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {}
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            overrides[f.name] = val
    return replace(cfg, **overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evospec",
        description="Simulate non-stationary skewed processes from evolutionary spectra",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate an ensemble and statistics")
    _add_config_flags(p)

    p = sub.add_parser("bench", help="time direct vs POD methods")
    _add_config_flags(p)
    p.add_argument("--counts", type=_int_list, default=[1, 10, 100],
                   help="ascending sample counts, e.g. 1,10,100")

    p = sub.add_parser("convergence", help="reduced-model convergence table")
    _add_config_flags(p)
    p.add_argument("--nq-list", type=_int_list, default=[1, 2, 4, 8, 16])
    p.add_argument("--probes", type=_float_list, default=[5.0, 10.0, 15.0],
                   help="probe times in seconds")

    p = sub.add_parser("export", help="write built-in model spectra to CSV")
    _add_config_flags(p)

    p = sub.add_parser("verify", help="re-run a manifest and diff ensemble files")
    p.add_argument("run_dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(_config_from_args(args))
        if args.command == "bench":
            return cmd_bench(_config_from_args(args), args.counts)
        if args.command == "convergence":
            return cmd_convergence(_config_from_args(args), args.nq_list, args.probes)
        if args.command == "export":
            return cmd_export(_config_from_args(args))
        if args.command == "verify":
            return cmd_verify(args.run_dir)
        raise InvalidParameterError(f"unknown command {args.command}")
    except InfeasibleSkewnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidParameterError, EvoSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
