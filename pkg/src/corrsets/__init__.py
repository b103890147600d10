"""Correlation bounds and probabilistic invariant sets for linear systems
driven by correlated disturbances."""

from .corrbound import (
    CorrelationBound,
    CorrelationModel,
    compute_bound,
    compute_bound_shaped,
    compute_bound_scalar,
    satisfies_definition,
    verify_bound_empirically,
)
from .disturbance import (
    ConstantGenerator,
    FilteredNoiseGenerator,
    IIDGenerator,
    decay_rate,
    empirical_corr,
    stationary_cov,
)
from .errors import ConfigError, CorrsetsError, InfeasibleError, NumericalError, StageError
from .harness import ExperimentConfig, ViolationReport, run_pipeline, run_violation_study
from .invariance import (
    InvariantEllipsoid,
    ViolationSpec,
    inclusion_implies_lyapunov,
    level_for_violation,
    synth_invariant,
    synth_invariant_robust,
)
from .probsets import Ellipsoid, ReachTube, chebyshev_level, chi2_cdf, chi2_inv, contains, reach_tube
from .symmat import dlyap, max_gen_eig, psd_leq

__all__ = [
    "ConfigError", "ConstantGenerator", "CorrelationBound", "CorrelationModel", "CorrsetsError",
    "Ellipsoid", "ExperimentConfig", "FilteredNoiseGenerator", "IIDGenerator", "InfeasibleError",
    "InvariantEllipsoid", "NumericalError", "ReachTube", "StageError", "ViolationReport",
    "ViolationSpec", "chebyshev_level", "chi2_cdf", "chi2_inv", "compute_bound",
    "compute_bound_scalar", "compute_bound_shaped", "contains", "decay_rate", "dlyap",
    "empirical_corr", "inclusion_implies_lyapunov", "level_for_violation", "max_gen_eig",
    "psd_leq", "reach_tube", "run_pipeline", "run_violation_study", "satisfies_definition",
    "stationary_cov", "synth_invariant", "synth_invariant_robust", "verify_bound_empirically",
]
