"""Version-specific treatment effects under latent multiple versions of treatment.

Fits, per treatment arm, a mixture of linear-Gaussian experts with softmax
gating by EM, estimates version-specific effects by plug-in inverse-probability
weighting, and ships a Monte Carlo harness, a percentile bootstrap, and a small
preprocessing pipeline for delimited data files.
"""

from .backend import backend_name
from .data import (
    Dataset,
    MixtureParams,
    ModelParams,
    PropensityPair,
    TreatmentSlice,
    VersionStructure,
    add_intercept,
)
from .em import (
    EmConfig,
    EmTrace,
    canonicalize,
    e_step,
    em_fit,
    em_run,
    initial_params,
    m_step_expert,
    m_step_gating,
    observed_loglik,
)
from .errors import (
    BootstrapFailureError,
    CollapsedComponentError,
    DegenerateClassError,
    FitFailureError,
    InputError,
    InternalError,
    MixipwError,
    NumericalError,
    ParameterError,
    ParseError,
    PositivityError,
)
from .estimators import (
    BootstrapResult,
    EstimandReport,
    attach_intervals,
    bootstrap,
    build_report,
    contrast,
    ht_psi,
    percentile_interval,
    psi_treatment,
    version_shares,
)
from .ingest import ColumnRoles, PreprocessReport, RawTable, ingest, preprocess, read_roles
from .logit import LogitFit, SoftLabelProblem, fit_multinomial_logit, logit_grad_hess, logit_objective
from .models import (
    expert_logdensity,
    gating_prob_matrix,
    gating_probs,
    propensity_pair,
    treatment_prob_matrix,
    treatment_probs,
)
from .pipeline import PipelineFit, fit_pipeline
from .simulation import (
    MonteCarloResult,
    SimConfig,
    SimDraw,
    SimTruth,
    build_truth,
    monte_carlo,
    oracle_fit,
    simulate_dataset,
    truth_as_params,
    write_metrics_csv,
    write_replicates_csv,
)
from .reports import emit_report, load_report

__version__ = "0.1.0"
