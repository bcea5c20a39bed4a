"""Exception hierarchy for evospec.

All library errors derive from :class:`EvoSpecError` so callers can catch one
base class. The CLI maps subclasses to distinct exit codes.
"""


class EvoSpecError(Exception):
    """Base class for all evospec errors."""


class InvalidParameterError(EvoSpecError, ValueError):
    """A parameter or configuration value is out of its allowed range."""


class ModelDomainError(EvoSpecError, ValueError):
    """A built-in spectral model was requested outside its domain of validity."""


class GridCompatibilityError(EvoSpecError, ValueError):
    """Grids of two objects disagree, or an FFT method was requested on a
    grid that does not satisfy the FFT time-frequency pairing."""


class FormatError(EvoSpecError, ValueError):
    """A spectrum/bispectrum/ensemble file violates its declared format.

    The message names the offending line number where applicable.
    """


class InfeasibleSkewnessError(EvoSpecError, ValueError):
    """The prescribed bispectrum is too large for the spectrum: the pure
    spectral density would become negative beyond tolerance.

    Attributes
    ----------
    time_index, freq_index : grid location (m, k) of the first violation.
    overshoot : how far the partial-bicoherence budget exceeds 1.
    """

    def __init__(self, time_index: int, freq_index: int, overshoot: float):
        self.time_index = int(time_index)
        self.freq_index = int(freq_index)
        self.overshoot = float(overshoot)
        super().__init__(
            f"infeasible skewness prescription at time index m={time_index}, "
            f"frequency index k={freq_index}: sum of squared partial "
            f"bicoherences exceeds 1 by {overshoot:.3e}"
        )
