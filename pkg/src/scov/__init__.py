"""Variance lower bounds and estimators for sparse diagonalizable covariance
models, with a deterministic Monte Carlo sweep driver."""

from .bounds import (
    BoundRequest,
    BoundResult,
    MeanSpec,
    corollary_index_set,
    corollary_unbiased_bound,
    theorem_bound,
    unbiased_mean_spec,
)
from .estimators import (
    Estimator,
    beta,
    ht_estimate,
    ht_mean,
    ht_mean_deriv,
    ml_estimate,
    naive_estimate,
    oracle_estimate,
    s1_mvu_estimate,
)
from .kernel import (
    KernelContext,
    coord_deriv_factor,
    kernel_general,
    kernel_sdcm,
    q_factor,
    unit_multi,
    zero_multi,
)
from .model import (
    SdcmModel,
    covariance_tilde,
    in_domain,
    in_sparse_set,
    make_model,
    model_from_dict,
    restrict_support,
    support,
    validate_model,
    xi_and_j0,
)
from .simulate import (
    McConfig,
    McReport,
    mc_mean,
    mc_mean_variance,
    mean_derivative_fd,
    sample_observation,
)
from .sweep import (
    SweepConfig,
    SweepRow,
    estimator_bound,
    load_sweep_config,
    rows_to_csv,
    run_sweep,
    sweep_config_from_dict,
)

__version__ = "0.1.0"
