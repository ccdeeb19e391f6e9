//! Model-X knockoff filter over the polynomial features.

mod lasso;
mod model;
mod stats;

pub use lasso::{kkt_violation, lambda_max, lasso_cd, lasso_cd_warm, LassoSettings};
pub use model::{fit_knockoff_model, sample_knockoffs, KnockoffModel, LAMBDA_MIN_FLOOR};
pub use stats::{
    knockoff_select, knockoff_stats_lcd, knockoff_threshold, weighted_scores, weko, KnockoffStats,
    LambdaRule, WekoOptions, WekoScores,
};
