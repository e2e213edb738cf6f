"""Generalized Bayesian density-density regression.

Regresses distribution-valued responses on distribution-valued predictors
through sliced-Wasserstein generalized likelihoods, simulates the posterior
with Langevin-plus-Gibbs updates under horseshoe shrinkage, and discovers
directed graphs between distributional nodes under posterior FDR control.
"""

from .graph import (
    EdgePosterior,
    EdgeSpec,
    GraphDecision,
    edge_rpe_weights,
    epsilon_inclusion_prob,
    fdr_fnr,
    mlr_inclusion_chain,
    select_epsilon,
)
from .mcmc import (
    Chain,
    DivergentStepError,
    MalaConfig,
    MLRState,
    ProjectionPolicy,
    chain_summary,
    horseshoe_gibbs_sweep,
    mala_step,
    mean_rpe,
    run_ddr_chain,
    run_mlr_chain,
    run_reference_chain,
    sample_inverse_gamma,
)
from .model import (
    DDRDataset,
    GenLikConfig,
    HorseshoeState,
    LinearMapParams,
    MapKind,
    grad_log_prior,
    grad_neg_log_gen_likelihood,
    log_prior,
    neg_log_gen_likelihood,
    pushforward,
    sw2_terms,
)
from .ot import (
    EmpiricalDistribution,
    ProjectionSet,
    TransportPlan,
    lp_wasserstein_pp,
    sample_projections,
    sliced_wasserstein_pp,
    wasserstein1d_pp,
)
from .sim import (
    CoefficientPool,
    Scenario,
    ScenarioConfig,
    build_coefficient_pools,
    gen_scenario,
    gen_semi_sim,
    param_error,
)

__version__ = "0.1.0"
