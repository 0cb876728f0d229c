use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Result, TrainerError};
use crate::linalg::{self, Matrix};

/// How the positive for each anchor is chosen. The negative is always the
/// closest wrong-identity batch member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositiveMining {
    #[default]
    Hardest,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Mined triplets plus the anchors that had no same-identity partner.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletIndices {
    pub triplets: Vec<Triplet>,
    pub skipped: Vec<usize>,
}

impl TripletIndices {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }
}

/// Squared Euclidean distances between every pair of rows.
pub fn pairwise_squared(emb: &Matrix) -> Matrix {
    let n = emb.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = linalg::squared_distance(emb.row(i), emb.row(j));
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    d
}

fn check_labels<L: PartialEq>(emb: &Matrix, labels: &[L]) -> Result<()> {
    if labels.len() != emb.rows() {
        return Err(TrainerError::Shape(format!(
            "{} labels for {} embeddings",
            labels.len(),
            emb.rows()
        )));
    }
    if labels.iter().all(|l| *l == labels[0]) {
        return Err(TrainerError::SingleIdentity);
    }
    Ok(())
}

/// Batch-hard mining: farthest positive, nearest negative. Ties go to the
/// lowest batch index.
pub fn batch_hard_mine<L: PartialEq>(emb: &Matrix, labels: &[L]) -> Result<TripletIndices> {
    check_labels(emb, labels)?;
    let d = pairwise_squared(emb);
    Ok(mine_with(&d, labels, |a, positives| {
        let mut best = positives[0];
        for &p in &positives[1..] {
            if d.get(a, p) > d.get(a, best) {
                best = p;
            }
        }
        best
    }))
}

/// As [`batch_hard_mine`] but with the positive drawn uniformly from the
/// anchor's same-identity batch members.
pub fn mine_triplets<L: PartialEq, R: Rng + ?Sized>(
    emb: &Matrix,
    labels: &[L],
    positive: PositiveMining,
    rng: &mut R,
) -> Result<TripletIndices> {
    match positive {
        PositiveMining::Hardest => batch_hard_mine(emb, labels),
        PositiveMining::Random => {
            check_labels(emb, labels)?;
            let d = pairwise_squared(emb);
            Ok(mine_with(&d, labels, |_, positives| {
                positives[rng.random_range(0..positives.len())]
            }))
        }
    }
}

fn mine_with<L: PartialEq>(
    d: &Matrix,
    labels: &[L],
    mut pick_positive: impl FnMut(usize, &[usize]) -> usize,
) -> TripletIndices {
    let n = labels.len();
    let mut out = TripletIndices::default();
    let mut positives = Vec::new();
    for a in 0..n {
        positives.clear();
        positives.extend((0..n).filter(|&j| j != a && labels[j] == labels[a]));
        if positives.is_empty() {
            out.skipped.push(a);
            continue;
        }
        let positive = pick_positive(a, &positives);
        let mut negative: Option<usize> = None;
        for j in (0..n).filter(|&j| labels[j] != labels[a]) {
            if negative.is_none_or(|b| d.get(a, j) < d.get(a, b)) {
                negative = Some(j);
            }
        }
        out.triplets.push(Triplet {
            anchor: a,
            positive,
            negative: negative.expect("at least two identities"),
        });
    }
    out
}
