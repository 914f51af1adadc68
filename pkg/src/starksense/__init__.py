"""AC Stark shifts of a driven transmon qudit and their use as a drive sensor.

Submodules
----------
qudit
    Analytic displaced-frame model and perturbative level energies.
transmon
    Exact charge-basis eigenstructure of the transmon.
dynamics
    Lindblad master-equation spectroscopy sweeps and peak extraction.
sensing
    Inversion of measured lines into drive amplitude and frequency.
"""

__version__ = "0.1.0"

from .errors import (
    AllCornersFailed,
    ConfigError,
    ConvergenceWarning,
    DegeneratePerturbation,
    IllConditionedWarning,
    InconsistentInput,
    InvalidParams,
    NegativeDetuning,
    NoConvergence,
    StarkSenseError,
    StepSizeFailure,
    WindowTooShort,
)
from .qudit import (
    CircuitParams,
    DriveTone,
    LevelSolution,
    ProbeTone,
    bare_lines,
    detuning,
    dispersive_shift,
    enumerate_alpha_roots,
    lab_transitions,
    mixed_photon_lines,
    rotating_energies,
    solve_alpha,
)
from .transmon import (
    CooperPairBoxParams,
    EigenSpectrum,
    LadderOperators,
    analytic_circuit,
    bound_levels,
    diagonalize,
    fit_from_transitions,
)
from .dynamics import (
    DensityState,
    DrivenQudit,
    SimulationConfig,
    SpectrumGrid,
    averaged_population,
    build_collapse_operators,
    evolve,
    find_peaks,
    normalize_columns,
    sweep_spectrum,
)
from .sensing import (
    SensingEstimate,
    SensingInput,
    calibration_curve,
    forward_observables,
    invert_fixed,
    invert_free,
    photon_number_from_amplitude,
    photon_number_from_feedline_power,
    propagate_uncertainty,
)
