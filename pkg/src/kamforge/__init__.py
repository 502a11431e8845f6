"""Renormalization-group construction of KAM invariant tori on truncated Fourier-Taylor series."""
from .certificate import Certificate, Check, check_initial, check_step
from .config import RunConfig, parse_config
from .diophantine import FrequencyVector, estimate_C0, small_divisor
from .driver import (
    DriverConfig,
    IterationState,
    IterationTrace,
    StopReason,
    TorusEmbedding,
    certify,
    check_superexponential,
    compose_maps,
    rescale,
    run,
    schedule,
    trace_to_csv,
)
from .errors import *  # noqa: F401,F403
from .series import FourierTaylorSeries, PolydiskDomain, SeriesNorms
from .step import (
    CanonicalMap,
    Hamiltonian,
    StepReport,
    Tolerances,
    build_action_map,
    build_generating,
    invert_angle_map,
    kolmogorov_step,
    pushforward,
    solve_shift,
    step_diagnostics,
    verify_cancellation,
)
from .verifier import (
    DefectReport,
    flow_conjugacy_test,
    invariance_defect,
    oracle_newton_torus,
    rotation_vector,
)

__version__ = "0.1.0"
