"""Exception hierarchy shared across the package."""


class StoplightError(Exception):
    """Base class for all package errors."""


class ConfigError(StoplightError, ValueError):
    """Invalid or inconsistent configuration."""


class FitError(StoplightError, RuntimeError):
    """A least-squares fit failed to converge or produced unphysical output."""


class AmbiguousFitError(FitError):
    """The data do not identify a unique parameter set."""


class DegenerateEllipseError(StoplightError, ValueError):
    """Polarization ellipse collapsed to a line (perfectly linear output)."""


class ScheduleError(StoplightError, ValueError):
    """A waveform or timing specification cannot be realized."""


class SolverError(StoplightError, RuntimeError):
    """Numerical failure inside the Maxwell-Bloch integrator."""


class BoundaryContaminationError(SolverError):
    """An envelope reached the medium boundary during a centroid measurement."""


class EventFormatError(StoplightError, ValueError):
    """Malformed or inconsistent photon-event records.

    Parameters
    ----------
    message : str
        Summary line.
    diagnostics : list of str, optional
        One entry per offending record.
    """

    def __init__(self, message, diagnostics=None):
        self.diagnostics = list(diagnostics or [])
        detail = "\n".join(self.diagnostics[:20])
        if len(self.diagnostics) > 20:
            detail += f"\n... ({len(self.diagnostics) - 20} more)"
        super().__init__(message if not detail else f"{message}\n{detail}")


class EventRangeError(EventFormatError):
    """Timestamps outside the measurement sequence."""


class AnalysisError(StoplightError, ValueError):
    """The count-analysis pipeline cannot produce a result."""
