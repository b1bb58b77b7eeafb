"""Penalized functional bilinear regression for two-way functional covariates."""

from .bilinear import (
    FblrConfig,
    FblrFit,
    PenaltyForms,
    PenaltyMode,
    RankRFit,
    build_forms,
    fblr_fit,
    igcv_fit,
    init_ridge_svd,
    normalize_pair,
    objective,
    penalty_j,
    predict,
    predict_rank_r,
    rank_r_fit,
    step_penalty_quadform,
    tilde_x,
)
from .covariance import (
    GammaSequence,
    SeparableCov,
    excess_risk_oracle,
    flipflop_estimate,
    flipflop_factors,
    gamma_sequence,
    pair_delta,
    seminorm0_quadform,
)
from .flr import (
    FlrFit,
    default_lambda_grid,
    flr_fit_representer,
    flr_fit_ridge_form,
    gcv_score,
    ridge_gcv,
    select_lambda,
)
from .grids import (
    Func1D,
    Grid1D,
    QuadForm,
    TwoWayDataset,
    bilinear_batch,
    bilinear_functional,
    center_dataset,
    combine_quadforms,
    make_uniform_grid,
    quad_inner,
)
from .kernels import (
    CustomGram,
    KernelSpec,
    PeriodicBernoulli,
    SecondDerivRoughness,
    SimBernoulli,
    SpectralModel,
    bernoulli_b4,
    cosine_covariance,
    kernel_gram,
    rkhs_quadform,
)
from .simulate import (
    BenchmarkResult,
    CoefficientTruth,
    SettingSpec,
    blr_fit,
    coefficients_for_setting,
    cv2d_fit,
    field_from_vec,
    fit_rate_slope,
    flr_vec_fit,
    generate_response,
    make_setting_data,
    mix_seed,
    ridge_vec_fit,
    run_benchmark,
    sample_gp_separable,
    vectorize,
)

__version__ = "0.1.0"
