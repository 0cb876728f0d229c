use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};
use crate::templates::ScoreMatrix;

/// `values[k-1]` is the fraction of probes whose true identity ranks in the top `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmcCurve {
    pub values: Vec<f64>,
}

impl CmcCurve {
    /// Identification rate at rank `k` (1-based). Ranks past the gallery size
    /// return the final value.
    pub fn rank(&self, k: usize) -> f64 {
        assert!(k >= 1, "ranks are 1-based");
        self.values[(k - 1).min(self.values.len() - 1)]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `rank,identification_rate` lines with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,identification_rate\n");
        for (k, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", k + 1, v));
        }
        out
    }
}

/// 1-based rank of each probe's true identity. Wrong identities scoring equal
/// to the true one count against the probe.
pub fn probe_ranks(m: &ScoreMatrix) -> Vec<usize> {
    (0..m.n_probes())
        .into_par_iter()
        .map(|i| {
            let t = m.true_column(i);
            let genuine = m.row(i)[t];
            1 + m
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, &s)| j != t && s >= genuine)
                .count()
        })
        .collect()
}

pub fn cmc(m: &ScoreMatrix) -> Result<CmcCurve> {
    if m.n_probes() == 0 {
        return Err(MetricsError::NoProbes);
    }
    if m.n_gallery() == 0 {
        return Err(MetricsError::EmptyGallery);
    }
    let mut hist = vec![0usize; m.n_gallery()];
    for r in probe_ranks(m) {
        hist[r - 1] += 1;
    }
    let n = m.n_probes() as f64;
    let mut cumulative = 0usize;
    let values = hist
        .into_iter()
        .map(|h| {
            cumulative += h;
            cumulative as f64 / n
        })
        .collect();
    Ok(CmcCurve { values })
}
