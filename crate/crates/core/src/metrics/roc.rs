use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};
use crate::templates::ScoreMatrix;

/// One operating point. `threshold: None` is the accept-nothing point (+∞).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: Option<f64>,
    pub far: f64,
    pub tar: f64,
    pub false_accepts: u64,
    pub true_accepts: u64,
}

/// Points ordered by descending threshold, hence ascending FAR and TAR.
/// The first point is (0, 0) at +∞ and the last is (1, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub genuine: u64,
    pub impostor: u64,
}

impl RocCurve {
    /// `threshold,far,tar` lines with header; the +∞ point prints `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,far,tar\n");
        for p in &self.points {
            let t = p
                .threshold
                .map_or_else(|| "inf".to_string(), |t| t.to_string());
            out.push_str(&format!("{t},{},{}\n", p.far, p.tar));
        }
        out
    }
}

/// Genuine pairs are (probe, own template); every other cell is an impostor pair.
pub fn split_pairs(m: &ScoreMatrix) -> (Vec<f64>, Vec<f64>) {
    let mut genuine = Vec::with_capacity(m.n_probes());
    let mut impostor = Vec::with_capacity(m.n_probes() * m.n_gallery().saturating_sub(1));
    for i in 0..m.n_probes() {
        let t = m.true_column(i);
        for (j, &s) in m.row(i).iter().enumerate() {
            if j == t {
                genuine.push(s);
            } else {
                impostor.push(s);
            }
        }
    }
    (genuine, impostor)
}

pub fn roc(m: &ScoreMatrix) -> Result<RocCurve> {
    let (g, i) = split_pairs(m);
    roc_from_scores(&g, &i)
}

/// Sweeps every distinct observed score as a threshold (accept if `score >= t`).
pub fn roc_from_scores(genuine: &[f64], impostor: &[f64]) -> Result<RocCurve> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(MetricsError::DegeneratePairs {
            genuine: genuine.len(),
            impostor: impostor.len(),
        });
    }
    let mut all: Vec<(f64, bool)> = genuine
        .iter()
        .map(|&s| (s, true))
        .chain(impostor.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (ng, ni) = (genuine.len() as u64, impostor.len() as u64);
    let mut points = vec![RocPoint {
        threshold: None,
        far: 0.0,
        tar: 0.0,
        false_accepts: 0,
        true_accepts: 0,
    }];
    let (mut ta, mut fa) = (0u64, 0u64);
    let mut k = 0;
    while k < all.len() {
        let t = all[k].0;
        while k < all.len() && all[k].0 == t {
            if all[k].1 {
                ta += 1;
            } else {
                fa += 1;
            }
            k += 1;
        }
        points.push(RocPoint {
            threshold: Some(t),
            far: fa as f64 / ni as f64,
            tar: ta as f64 / ng as f64,
            false_accepts: fa,
            true_accepts: ta,
        });
    }
    Ok(RocCurve {
        points,
        genuine: ng,
        impostor: ni,
    })
}

/// Trapezoidal area under the curve.
///
/// Accumulated in integer counts, so it equals the Mann-Whitney statistic
/// P(genuine > impostor) + ½·P(tie) up to one final division.
pub fn auc(roc: &RocCurve) -> f64 {
    let twice_area: u128 = roc
        .points
        .windows(2)
        .map(|w| {
            let dfa = u128::from(w[1].false_accepts - w[0].false_accepts);
            dfa * u128::from(w[0].true_accepts + w[1].true_accepts)
        })
        .sum();
    twice_area as f64 / (2.0 * roc.genuine as f64 * roc.impostor as f64)
}

/// A conservative operating point: the highest TAR among points whose FAR
/// does not exceed the request. No interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub requested_far: f64,
    pub achieved_far: f64,
    pub tar: f64,
    pub threshold: Option<f64>,
}

pub fn tar_at_far(roc: &RocCurve, far: f64) -> Result<OperatingPoint> {
    if !(far > 0.0 && far <= 1.0) {
        return Err(MetricsError::InvalidFar(far));
    }
    // FAR and TAR are both non-decreasing, so the last admissible point wins.
    let p = roc
        .points
        .iter()
        .rev()
        .find(|p| p.far <= far)
        .expect("the +inf point has FAR 0");
    Ok(OperatingPoint {
        requested_far: far,
        achieved_far: p.far,
        tar: p.tar,
        threshold: p.threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(c: &RocCurve) -> Vec<(f64, f64)> {
        c.points.iter().map(|p| (p.far, p.tar)).collect()
    }

    #[test]
    fn perfect_separation() {
        let c = roc_from_scores(&[0.9; 4], &[0.1; 6]).unwrap();
        assert!(pts(&c).contains(&(0.0, 1.0)));
        assert_eq!(auc(&c), 1.0);
        assert_eq!(tar_at_far(&c, 1e-3).unwrap().tar, 1.0);
    }

    #[test]
    fn single_genuine_between_two_impostors() {
        let c = roc_from_scores(&[0.5], &[0.4, 0.6]).unwrap();
        assert_eq!(
            pts(&c),
            vec![(0.0, 0.0), (0.5, 0.0), (0.5, 1.0), (1.0, 1.0)]
        );
        assert_eq!(auc(&c), 0.5);
    }

    #[test]
    fn identical_distributions() {
        let scores = [0.1, 0.2, 0.3, 0.4];
        let c = roc_from_scores(&scores, &scores).unwrap();
        for p in &c.points {
            assert_eq!(p.far, p.tar);
        }
        assert_eq!(auc(&c), 0.5);
    }

    #[test]
    fn one_impostor_above_every_genuine() {
        let genuine: Vec<f64> = (0..50).map(|i| 0.5 + i as f64 * 1e-3).collect();
        let mut impostor = vec![0.0; 999];
        impostor.push(0.99);
        let c = roc_from_scores(&genuine, &impostor).unwrap();
        let op = tar_at_far(&c, 1e-4).unwrap();
        assert_eq!(op.achieved_far, 0.0);
        assert_eq!(op.tar, 0.0);
        assert_eq!(op.threshold, None);
        // at 1e-3 the lone high impostor is affordable, so all genuine thresholds are too
        let op3 = tar_at_far(&c, 1e-3).unwrap();
        assert_eq!(op3.achieved_far, 1e-3);
        assert_eq!(op3.tar, 1.0);
    }

    #[test]
    fn far_one_accepts_everything() {
        let c = roc_from_scores(&[0.2, 0.7], &[0.1, 0.9, 0.3]).unwrap();
        let op = tar_at_far(&c, 1.0).unwrap();
        assert_eq!(op.tar, 1.0);
        assert_eq!(op.achieved_far, 1.0);
    }

    #[test]
    fn invalid_far_and_degenerate_pairs() {
        let c = roc_from_scores(&[0.2], &[0.1]).unwrap();
        assert_eq!(tar_at_far(&c, 0.0), Err(MetricsError::InvalidFar(0.0)));
        assert_eq!(tar_at_far(&c, 1.5), Err(MetricsError::InvalidFar(1.5)));
        assert!(matches!(
            roc_from_scores(&[], &[0.1]),
            Err(MetricsError::DegeneratePairs { .. })
        ));
        let single = ScoreMatrix::from_labels(&["a"], &["a"], vec![vec![0.3]]).unwrap();
        assert!(matches!(
            roc(&single),
            Err(MetricsError::DegeneratePairs {
                genuine: 1,
                impostor: 0
            })
        ));
    }

    #[test]
    fn csv_marks_infinite_threshold() {
        let c = roc_from_scores(&[0.5], &[0.25]).unwrap();
        assert_eq!(
            c.to_csv(),
            "threshold,far,tar\ninf,0,0\n0.5,0,1\n0.25,1,1\n"
        );
    }
}
