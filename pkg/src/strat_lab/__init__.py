"""Linear stability toolkit for stably stratified Couette flow.

Per-mode solvers for the shear-advected (k != 0) and streak (k = 0) Fourier
modes of the linearized Boussinesq system, the energy functional and decay
envelopes, norm aggregation over a vertical-frequency grid, and a sweep
harness with a command-line front end.
"""

from .errors import (
    DegenerateModeError,
    InsufficientSamplingError,
    ParameterGateError,
    ParseError,
    QuadratureError,
    StepSizeUnderflow,
    StratLabError,
    SymmetryViolationError,
    ValidationError,
)
from .harness import ReportRow, ScenarioConfig, emit_report, parse_config, parse_report, run_sweep
from .nonzero import IntegratorConfig, Trajectory, integrate_mode
from .pipeline import EtaGrid, GaussianProfile, InitialConditionSpec, NormReport
from .streaks import StreakState, liftup_baseline, propagate_streak
from .symbols import ModeIndex, PhysParams, RateConstants, rate_constants
from .symmetrization import NonzeroModeState, SymmetricState

__version__ = "0.1.0"
