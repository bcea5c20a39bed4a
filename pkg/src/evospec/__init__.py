"""evospec: ensembles of non-stationary, skewed random processes.

Generates sample paths whose time-varying second- and third-order statistics
match a prescribed evolutionary power spectrum and evolutionary bispectrum,
either by direct cosine summation or through an FFT-accelerated reduced
(POD/Tucker) model.
"""

__version__ = "0.1.0"

from .errors import (EvoSpecError, FormatError, GridCompatibilityError,
                     InfeasibleSkewnessError, InvalidParameterError,
                     ModelDomainError)
from .grid import SimulationGrid, TrianglePairs, fft_compatible_cutoff, make_grid
from .spectra import (EvolutionaryBispectrum, EvolutionarySpectrum,
                      build_model, model_clough_penzien,
                      model_separable_gaussian, reference_grid,
                      zero_bispectrum)
from .kernel import (FeasibilityReport, ThirdOrderKernel, build_kernel,
                     iter_kernel_slices, kernel_report)
from .direct import (PhaseDraw, SamplePath, mix_seed, simulate2_direct,
                     simulate3_direct, simulate_batch)
from .pod import (NormalizedBispectrumTensor, PodDiagnostics, PodModel,
                  fit_pod, normalized_bispectrum_tensor, pod_diagnostics)
from .fftsim import PhaseMatrix, simulate2_pod_fft, simulate3_pod_fft
from .stats import (ConvergenceRow, MomentCurves, convergence_study,
                    empirical_moments, pod_reference_targets,
                    theoretical_autocorrelation, theoretical_moments)
from .io import export_spectrum_files, load_spectrum_files

__all__ = [name for name in dir() if not name.startswith("_")]
