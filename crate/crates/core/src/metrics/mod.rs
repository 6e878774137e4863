//! Classification metrics and cross-validated stability.

pub mod confusion;
pub mod cv;
pub mod ranking;

pub use confusion::{confusion, ordinal_confusion, threshold_labels, ConfusionMatrix, ConfusionSummary, OrdinalConfusion};
pub use cv::{cross_validate, CvReport, Stability};
pub use ranking::{pr_metrics, roc_auc, roc_auc_trapezoid, roc_curve, PrMetrics};
