//! Schedule calculators and confidence-boosting drivers.

pub mod driver;
pub mod plan;

pub use driver::{
    boost_constrained_with, boost_mogda, boost_saa, boost_saa_c, proximal_boost, rde_baseline,
    rde_function_gap, rde_robust_pairs, BoostOutcome, BoostSaaConfig, FinalCtx, InnerPolicy,
    LedgerCheck, RoundCtx, RoundOut, RoundRecord, Telemetry,
};
pub use plan::{
    gap_multipliers, mogda_final_targets, mogda_round_targets, plan_geometric,
    rde_constrained_params, rde_unconstrained_params, saa_c_oracle_size, saa_c_round_sizes,
    saa_final_sizes, saa_round_sizes, saa_size_for_weak_gap, LastRound, PbsspPlan, PlanMode,
    PlanOverrides,
};
