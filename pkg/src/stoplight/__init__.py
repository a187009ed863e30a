"""Slow, stored and stationary light in a fiber-confined Lambda ensemble.

Modules
-------
jones      birefringent-fiber Jones model, DOP and parameter fits
eit        closed-form EIT susceptibility, windows and group velocity
schedule   control-field envelopes and measurement timing
solver     1D Maxwell-Bloch solver for forward and backward probes
counts     photon-count binning, background subtraction and fits
synthetic  seeded detection-event generation from simulated fluxes
config     TOML configuration with explicit units
cli        ``stoplight`` command line
"""

__version__ = "0.1.0"

from .eit import AtomicMedium, ControlFieldSpec  # noqa: E402
from .jones import JonesParameters  # noqa: E402
from .schedule import ControlSchedule, MeasurementTiming  # noqa: E402
from .solver import SolverConfig, evolve  # noqa: E402

__all__ = [
    "__version__",
    "AtomicMedium",
    "ControlFieldSpec",
    "JonesParameters",
    "ControlSchedule",
    "MeasurementTiming",
    "SolverConfig",
    "evolve",
]
