"""Numerical laboratory for de Broglie-Bohm arrival times and detector models."""

__version__ = "0.1.0"

from .errors import (
    BohmError,
    GridMismatch,
    NodalPoint,
    OverlapError,
    PreconditionError,
    QuadratureError,
    SamplingBoxError,
    StepFailure,
)
from .fields import (
    DENSITY_FLOOR,
    H_FD,
    BackflowPair,
    DoubleSlit,
    FieldSample,
    GaussianPacket,
    PlaneWave,
    SpinVector,
    Spinor,
    Superposition,
    WaveField,
    WaveguideSpinField,
    backflow_pair,
    continuity_residual,
    evaluate_field,
    backflow_wavevectors,
    pauli_current,
    quantum_potential,
)
from .guidance import (
    CrossingEvent,
    Disk,
    PlaneX,
    PlaneZ,
    Trajectory,
    detect_crossings,
    first_arrival,
    integrate_ensemble,
    integrate_trajectory,
    sample_initial,
)
from .arrivals import (
    ArrivalHistogram,
    DDParams,
    dd_analytic,
    full_signal_distribution,
    ideal_flux_distribution,
    mc_first_arrival,
    which_path,
)
from .povm import (
    OperatorFamily,
    PointerModel,
    check_povm,
    construct_pointer_povm,
    current_povm_counterexample,
    gtz_sum_test,
)
