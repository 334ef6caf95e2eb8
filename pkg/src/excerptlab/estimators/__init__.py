"""Two-way fixed-effects, event-study, dose-response and synthetic DiD estimators."""

from .did import did_m, dose_response, event_study, interaction_did
from .fe import within_transform
from .ols import DesignMatrix, cluster_robust_vcov, fit, treatment_indicator, twfe_ols
from .results import EstimateResult, emit_event_study_table
from .sdid import SdidWeights, simplex_weights, synthetic_did

__all__ = [
    "DesignMatrix",
    "EstimateResult",
    "SdidWeights",
    "cluster_robust_vcov",
    "did_m",
    "dose_response",
    "emit_event_study_table",
    "event_study",
    "fit",
    "interaction_did",
    "simplex_weights",
    "synthetic_did",
    "treatment_indicator",
    "twfe_ols",
    "within_transform",
]
