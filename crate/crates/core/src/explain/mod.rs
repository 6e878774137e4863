//! Attributions, importance rankings and recommendations.

pub mod consensus;
pub mod importance;
pub mod recommend;
pub mod shap;

pub use consensus::{consensus_rank, ConsensusRanking, MethodRanks};
pub use importance::{
    impurity_importance, permutation_importance, ranking_csv_rows, shap_importance, ImportanceRanking,
    PermutationMetric,
};
pub use recommend::{recommend, Recommendation};
pub use shap::{tree_shap, ShapExplainer, ShapExplanation};
