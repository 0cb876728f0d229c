use serde::{Deserialize, Serialize};

use super::mining::TripletIndices;
use super::{Result, TrainerError};
use crate::linalg::{self, Matrix};

/// Triplet loss value, gradient with respect to the embeddings, and the
/// statistics logged per batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletLoss {
    pub loss: f64,
    pub grad: Matrix,
    pub active: usize,
    pub triplets: usize,
    pub mean_pos_dist: f64,
    pub mean_neg_dist: f64,
}

/// Mean over triplets of `max(0, d(a,p) - d(a,n) + margin)` with Euclidean `d`.
///
/// The derivative of `d` at zero distance is taken as 0.
pub fn triplet_loss_and_grad(
    emb: &Matrix,
    triplets: &TripletIndices,
    margin: f64,
) -> Result<TripletLoss> {
    let n = emb.rows();
    for t in &triplets.triplets {
        if t.anchor >= n || t.positive >= n || t.negative >= n {
            return Err(TrainerError::Shape(format!(
                "triplet {t:?} outside batch of {n}"
            )));
        }
    }
    let mut grad = Matrix::zeros(n, emb.cols());
    let count = triplets.len();
    if count == 0 {
        return Ok(TripletLoss {
            loss: 0.0,
            grad,
            active: 0,
            triplets: 0,
            mean_pos_dist: 0.0,
            mean_neg_dist: 0.0,
        });
    }
    let scale = 1.0 / count as f64;
    let mut loss = linalg::CompensatedSum::new();
    let (mut sum_ap, mut sum_an) = (0.0, 0.0);
    let mut active = 0;
    for t in &triplets.triplets {
        let (a, p, ng) = (emb.row(t.anchor), emb.row(t.positive), emb.row(t.negative));
        let d_ap = linalg::squared_distance(a, p).sqrt();
        let d_an = linalg::squared_distance(a, ng).sqrt();
        sum_ap += d_ap;
        sum_an += d_an;
        let hinge = d_ap - d_an + margin;
        if hinge <= 0.0 {
            continue;
        }
        active += 1;
        loss.add(hinge);
        // ∂d(x,y)/∂x = (x - y) / d
        for c in 0..emb.cols() {
            let gp = if d_ap > 0.0 {
                (a[c] - p[c]) / d_ap * scale
            } else {
                0.0
            };
            let gn = if d_an > 0.0 {
                (a[c] - ng[c]) / d_an * scale
            } else {
                0.0
            };
            let ga = grad.get(t.anchor, c) + gp - gn;
            grad.set(t.anchor, c, ga);
            let gpv = grad.get(t.positive, c) - gp;
            grad.set(t.positive, c, gpv);
            let gnv = grad.get(t.negative, c) + gn;
            grad.set(t.negative, c, gnv);
        }
    }
    Ok(TripletLoss {
        loss: loss.value() * scale,
        grad,
        active,
        triplets: count,
        mean_pos_dist: sum_ap * scale,
        mean_neg_dist: sum_an * scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconLoss {
    pub loss: f64,
    pub grad: Matrix,
}

/// Mean squared error over all `N = rows * cols` entries; the gradient is
/// `2 (pred - true) / N`.
pub fn linguistic_recon_loss_and_grad(pred: &Matrix, target: &Matrix) -> Result<ReconLoss> {
    if pred.shape() != target.shape() {
        return Err(TrainerError::Shape(format!(
            "predicted descriptors {:?} vs targets {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.data().len().max(1) as f64;
    let diff: Vec<f64> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| p - t)
        .collect();
    let loss = diff
        .iter()
        .map(|d| d * d)
        .collect::<linalg::CompensatedSum>()
        .value()
        / n;
    let grad = Matrix::from_vec(
        pred.rows(),
        pred.cols(),
        diff.iter().map(|d| 2.0 * d / n).collect(),
    );
    Ok(ReconLoss { loss, grad })
}
