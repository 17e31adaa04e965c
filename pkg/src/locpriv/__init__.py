"""Minimax theory and estimators for locally private estimation.

The pieces fit together in layers: divergences and channels give the
primitives, contraction and information quantify what privatization
costs, bounds turns that into risk floors via the modulus of continuity,
estimators provides procedures that attain the matching rates, and
harness/cli run seeded experiments end to end.
"""
from .divergences import (
    INF,
    DiscreteDistribution,
    chi_affinity,
    chi_square,
    fk_divergence,
    hellinger,
    is_inf,
    kl,
    mixture,
    product,
    renyi,
    tv_distance,
)
from .channels import (
    FiniteChannel,
    LaplaceVectorMechanism,
    RandomizedResponseBit,
    analytic_log_ratio_bound,
    laplace_privatize,
    push_forward,
    rr_privatize,
    rr_privatize_many,
    verify_chi2,
    verify_fk,
    verify_ldp,
    verify_renyi,
)
from .contraction import (
    ContractionReport,
    PackingFamily,
    big_tensor_bound,
    check_fk_contraction,
    check_tensorized_chi,
    complexity_c2,
    complexity_cinf,
    dobrushin_coefficient,
    fk_contraction_sweep,
    hypercube_mean_packing,
    kl_tensor_bound,
    logreg_complexity_bound,
    product_channel,
    sparse_logistic_packing,
    tensorization_sweep,
    uniform_joint_reference,
)
from .information import (
    ScoreModel,
    bernoulli_score_model,
    fisher_info,
    generic_private_lb,
    l1_dual_norm,
    l1_info,
    one_param_info_bound,
)
from .bounds import (
    LossSpec,
    ModulusCurve,
    achievable_upper,
    bernoulli_grid_family,
    bernoulli_lower,
    constrained_risk,
    delta_epsilon,
    family_modulus,
    growth_check,
    highdim_mean_lower,
    le_cam_private,
    logistic_pred_lower,
    logistic_tv,
    lossdist,
    mean_mixture_family,
    mis_expfam_lower,
    modulus_curve,
    modulus_search,
    sparse_logistic_lower,
    superefficiency_floor,
    theorem1_lower,
)
from .estimators import (
    ExpFamily1D,
    GlmLogistic,
    MultiExpFamily,
    expfam_asymptotic_variance,
    expfam_onestep,
    glm_onestep,
    glm_onestep_coords,
    glm_variance,
    grad_astar,
    mis_expfam_onestep,
    mis_expfam_variance,
    mle_logistic,
    private_sgd,
    rr_bernoulli_estimate,
    rr_bernoulli_variance,
    two_point_test,
)
from .harness import (
    SyntheticPopulation,
    TrialReport,
    emit,
    experiment_glm,
    make_population,
    run_trials,
    trial_seed,
    variance_check,
)

__version__ = "0.1.0"
