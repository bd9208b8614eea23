"""Permutation ciphers followed by rate-distortion coding, with exact leakage analysis."""

from .cipher import (
    FixedPermutationCipher,
    ModuloSumCipher,
    SecretKey,
    TypeICipher,
    TypeIICipher,
    build_cipher,
    load_cipher,
    save_cipher,
)
from .concentration import DeviationExperiment, chebyshev_bound, chernoff_bound, deviation_tail_estimate
from .config import ExperimentConfig
from .core import BudgetExceeded, DistortionMeasure, SourceModel, ValidationError
from .leakage import (
    asymptotic_settings,
    exact_leakage_given_type,
    leakage_given_type_marginal,
    leakage_bound,
    best_cipher_search,
    total_leakage_decomposition_check,
)
from .pipeline import compare_systems, run_conventional_pipeline, run_reversed_pipeline
from .rd import Codebook, ConvergenceError, RateDistortionCodec, blahut_arimoto, rd_point_at_distortion, rd_sweep
from .typeclass import TypeComposition, enumerate_type_class, type_class_size, type_of

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded", "Codebook", "ConvergenceError", "DeviationExperiment", "DistortionMeasure",
    "ExperimentConfig", "FixedPermutationCipher", "ModuloSumCipher", "RateDistortionCodec", "SecretKey",
    "SourceModel", "TypeComposition", "TypeICipher", "TypeIICipher", "ValidationError", "asymptotic_settings",
    "blahut_arimoto", "build_cipher", "chebyshev_bound", "chernoff_bound", "compare_systems",
    "deviation_tail_estimate", "enumerate_type_class", "exact_leakage_given_type", "leakage_given_type_marginal",
    "leakage_bound", "load_cipher", "rd_point_at_distortion", "rd_sweep", "run_conventional_pipeline",
    "run_reversed_pipeline", "save_cipher", "best_cipher_search", "total_leakage_decomposition_check",
    "type_class_size", "type_of",
]
