//! Identification (CMC, Rank-k) and verification (ROC, AUC, TAR@FAR) metrics.
//!
//! Tie handling is pessimistic throughout: a wrong identity scoring equal to
//! the true one outranks it, and the ROC accepts a pair when its score is
//! `>=` the threshold. Curves are exact: every observed score is a threshold.

mod cmc;
mod report;
mod roc;

use thiserror::Error;

pub use cmc::{cmc, probe_ranks, CmcCurve};
pub use report::{report, MetricsReport, PairCounts, FAR_1E3, FAR_1E4};
pub use roc::{
    auc, roc, roc_from_scores, split_pairs, tar_at_far, OperatingPoint, RocCurve, RocPoint,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("score matrix has no probes")]
    NoProbes,
    #[error("score matrix has an empty gallery")]
    EmptyGallery,
    #[error(
        "ROC needs at least one genuine and one impostor pair (have {genuine} and {impostor})"
    )]
    DegeneratePairs { genuine: usize, impostor: usize },
    #[error("requested FAR {0} outside (0, 1]")]
    InvalidFar(f64),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;
