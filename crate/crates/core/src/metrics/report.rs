use serde::{Deserialize, Serialize};

use super::{auc, cmc, roc, tar_at_far, CmcCurve, OperatingPoint, Result, RocCurve};
use crate::templates::ScoreMatrix;

pub const FAR_1E3: f64 = 1e-3;
pub const FAR_1E4: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub probes: usize,
    pub gallery: usize,
    pub genuine: u64,
    pub impostor: u64,
}

/// The five scalar columns of a results table plus the curves behind them.
///
/// `rank20` saturates at the final CMC value when the gallery has fewer than
/// 20 identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub tar_at_far_1e3: f64,
    pub tar_at_far_1e4: f64,
    pub rank1: f64,
    pub rank20: f64,
    pub operating_points: Vec<OperatingPoint>,
    pub counts: PairCounts,
    pub cmc: CmcCurve,
    pub roc: RocCurve,
}

impl MetricsReport {
    /// `[AUC, TAR@1e-3, TAR@1e-4, Rank-1, Rank-20]`.
    pub fn scalars(&self) -> [f64; 5] {
        [
            self.auc,
            self.tar_at_far_1e3,
            self.tar_at_far_1e4,
            self.rank1,
            self.rank20,
        ]
    }

    /// The scalars rounded to four decimals, as printed in results tables.
    pub fn table_row(&self) -> String {
        self.scalars()
            .iter()
            .map(|v| format!("{v:.4}"))
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

pub fn report(m: &ScoreMatrix) -> Result<MetricsReport> {
    let curve = cmc(m)?;
    let roc = roc(m)?;
    let op3 = tar_at_far(&roc, FAR_1E3)?;
    let op4 = tar_at_far(&roc, FAR_1E4)?;
    Ok(MetricsReport {
        auc: auc(&roc),
        tar_at_far_1e3: op3.tar,
        tar_at_far_1e4: op4.tar,
        rank1: curve.rank(1),
        rank20: curve.rank(20),
        operating_points: vec![op3, op4],
        counts: PairCounts {
            probes: m.n_probes(),
            gallery: m.n_gallery(),
            genuine: roc.genuine,
            impostor: roc.impostor,
        },
        cmc: curve,
        roc,
    })
}
