//! Regime-wise metrics, hindsight benchmarks and diagnostics over completed runs.

mod diagnostics;
mod hindsight;
mod metrics;
mod report;
mod theory;

pub use diagnostics::{
    iterate_norm_summary, residual_correlation, weight_buckets, BucketEdges, BucketMass,
    IterateNormSummary, ResidualCorrelation,
};
pub use hindsight::{
    combine, cumulative_expert_losses, cumulative_regret_curve, hindsight_best_expert,
    hindsight_static_convex, project_simplex, StaticFit, STATIC_MAX_ITER, STATIC_TOL,
};
pub use metrics::{
    regime_slices, rmse, rmse_by_regime, rmse_series, rte_regimes, RegimeRmse, RegimeSpec, OVERALL,
};
pub use report::{
    Diagnostics, EvalReport, MethodRow, PsiReport, PsiRow, RegimeBuckets, RegimeLength,
};
pub use theory::{balancing_scale, path_length, psi_h, tradeoff, PsiConstants, PsiInputs};
