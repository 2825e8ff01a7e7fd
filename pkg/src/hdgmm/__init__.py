"""Desparsified two-step Lasso-GMM inference for high-dimensional IV models."""

from .clime import ClimeResult, clime_full, clime_mu, clime_row, sigma_hat
from .inference import (
    InferenceResult,
    WeightMatrix,
    confidence_intervals,
    coordinate_variances,
    debias,
    desparsified_gmm,
    normal_ppf,
    t_statistic,
    two_step_pipeline,
    variance_estimate,
    weight_matrix,
)
from .lasso_gmm import (
    CvConfig,
    GmmDesign,
    LassoFit,
    build_design,
    cross_validate,
    default_lambda_grid,
    lasso_path,
    lasso_solve,
)
from .lp import LpProblem, lp_solve
from .panel import PanelData, StackedGmm, instrument_count, panel_to_gmm, simulate_panel
from .simulate import DesignSpec, SummaryTable, generate_dataset, run_design

__version__ = "0.1.0"
