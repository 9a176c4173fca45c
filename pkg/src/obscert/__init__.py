"""Observability certificates for compactly perturbed self-adjoint systems.

Verifies, at finite truncation, gap/spectral/frequency-domain observability
tests for z' = iAz, y = Cz and their survival under a symmetric non-negative
perturbation A -> A + K, producing machine-readable certificates and
sequence data.
"""

__version__ = "0.1.0"

from .eig import (
    CompressionResult,
    Eigendecomposition,
    compress_and_maximize,
    eig_sym,
    minmax_upper_bound_check,
    resolvent_apply,
)
from .model import (
    ObservationMap,
    Perturbation,
    Scenario,
    ScenarioError,
    SpectralOperator,
    build_dirichlet_laplacian,
    build_mode_annihilator,
    build_perturbation,
    build_window_observation,
    custom_operator_from_matrix,
    load_scenario,
    scenario_from_dict,
)
from .observability import (
    check_gap,
    hautus_scan,
    observability_gramian,
    spectral_obs_test,
    verdict_unperturbed,
)
from .perturbation import (
    commutator_diagnostics,
    fit_condition_one,
    necessary_condition_sequence,
    perturbed_spectrum,
    sandwich_sequences,
)
from .riesz import (
    Certificate,
    assemble_certificate,
    lemma_identity_check,
    residue_sanity,
    riesz_project,
    tail_bound_check,
)
from .runner import AnalysisResult, analyze, emit_plot_data, run_analyze, run_sweep

__all__ = [
    "__version__",
    "AnalysisResult",
    "Certificate",
    "CompressionResult",
    "Eigendecomposition",
    "ObservationMap",
    "Perturbation",
    "Scenario",
    "ScenarioError",
    "SpectralOperator",
    "analyze",
    "assemble_certificate",
    "build_dirichlet_laplacian",
    "build_mode_annihilator",
    "build_perturbation",
    "build_window_observation",
    "check_gap",
    "commutator_diagnostics",
    "compress_and_maximize",
    "custom_operator_from_matrix",
    "eig_sym",
    "emit_plot_data",
    "fit_condition_one",
    "hautus_scan",
    "lemma_identity_check",
    "load_scenario",
    "minmax_upper_bound_check",
    "necessary_condition_sequence",
    "observability_gramian",
    "perturbed_spectrum",
    "residue_sanity",
    "resolvent_apply",
    "riesz_project",
    "run_analyze",
    "run_sweep",
    "sandwich_sequences",
    "scenario_from_dict",
    "spectral_obs_test",
    "tail_bound_check",
    "verdict_unperturbed",
]
