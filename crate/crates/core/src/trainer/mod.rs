//! Metric learning of embedding heads on precomputed backbone features.
//!
//! Each step draws a P×K batch, re-mines batch-hard triplets from the current
//! embeddings, and applies Adam with decoupled weight decay to the summed
//! triplet and (optionally) descriptor-reconstruction losses.

mod adam;
mod checkpoint;
mod head;
mod loss;
mod mining;
mod sampler;

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;

pub use adam::{adam_step, AdamState, ParamSet, BETA1, BETA2, EPSILON};
pub use checkpoint::{load_head, read_head, save_head, write_head, HEAD_MAGIC, HEAD_VERSION};
pub use head::{
    BottleneckDims, ForwardCache, HeadKind, HeadOutput, HeadParams, Layer, DEFAULT_DESCRIPTORS,
};
pub use loss::{linguistic_recon_loss_and_grad, triplet_loss_and_grad, ReconLoss, TripletLoss};
pub use mining::{
    batch_hard_mine, mine_triplets, pairwise_squared, PositiveMining, Triplet, TripletIndices,
};
pub use sampler::{pk_sample, PkSampler};

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("forward cache does not belong to this head")]
    CacheMismatch,
    #[error("batch holds a single identity; no negatives exist")]
    SingleIdentity,
    #[error("need {needed} identities with at least two records, only {eligible} eligible")]
    NotEnoughIdentities { needed: usize, eligible: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("auxiliary loss weight is positive but no descriptor targets were given")]
    MissingDescriptors,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TrainerError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub margin: f64,
    pub p: usize,
    pub k: usize,
    pub epochs: usize,
    pub aux_weight: f64,
    pub head_kind: HeadKind,
    pub seed: u64,
    pub embed_dim: usize,
    pub positive_mining: PositiveMining,
    /// Bottleneck widths; scaled from the input width when absent.
    pub bottleneck: Option<BottleneckDims>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            weight_decay: 1e-6,
            margin: 0.3,
            p: 8,
            k: 4,
            epochs: 50,
            aux_weight: 0.0,
            head_kind: HeadKind::Projection,
            seed: 0,
            embed_dim: 256,
            positive_mining: PositiveMining::Hardest,
            bottleneck: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(TrainerError::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail("weight_decay must be non-negative");
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return fail("margin must be non-negative");
        }
        if self.p < 2 {
            return fail("P must be at least 2");
        }
        if self.k < 2 {
            return fail("K must be at least 2");
        }
        if !(self.aux_weight >= 0.0 && self.aux_weight.is_finite()) {
            return fail("aux_weight must be non-negative");
        }
        if self.embed_dim == 0 {
            return fail("embed_dim must be positive");
        }
        Ok(())
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            margin: self.margin,
            aux_weight: self.aux_weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub margin: f64,
    pub aux_weight: f64,
}

/// Per-batch loss terms and mining statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BatchStats {
    pub loss: f64,
    pub triplet_loss: f64,
    pub recon_loss: f64,
    pub triplets: usize,
    pub active: usize,
    pub skipped: usize,
    pub mean_pos_dist: f64,
    pub mean_neg_dist: f64,
}

/// Total loss `triplet + λ·recon` on one batch and its gradients with respect
/// to every head parameter. The reconstruction term is only present for the
/// bottleneck head with `λ > 0`.
pub fn loss_and_grads<L: PartialEq>(
    head: &HeadParams,
    features: &Matrix,
    labels: &[L],
    descriptors: Option<&Matrix>,
    triplets: &TripletIndices,
    cfg: &LossConfig,
) -> Result<(BatchStats, HeadParams)> {
    if labels.len() != features.rows() {
        return Err(TrainerError::Shape(format!(
            "{} labels for {} rows",
            labels.len(),
            features.rows()
        )));
    }
    let (out, cache) = head.forward(features)?;
    let t = triplet_loss_and_grad(&out.embeddings, triplets, cfg.margin)?;
    let mut stats = BatchStats {
        loss: t.loss,
        triplet_loss: t.loss,
        recon_loss: 0.0,
        triplets: t.triplets,
        active: t.active,
        skipped: triplets.skipped.len(),
        mean_pos_dist: t.mean_pos_dist,
        mean_neg_dist: t.mean_neg_dist,
    };
    let mut d_desc = None;
    if let (Some(pred), true) = (&out.descriptors, cfg.aux_weight > 0.0) {
        let target = descriptors.ok_or(TrainerError::MissingDescriptors)?;
        let r = linguistic_recon_loss_and_grad(pred, target)?;
        stats.recon_loss = r.loss;
        stats.loss += cfg.aux_weight * r.loss;
        let mut g = r.grad;
        g.data_mut().iter_mut().for_each(|x| *x *= cfg.aux_weight);
        d_desc = Some(g);
    }
    let grads = head.backward(&cache, &t.grad, d_desc.as_ref())?;
    Ok((stats, grads))
}

/// Scalar loss only, for finite-difference checks.
pub fn loss_value<L: PartialEq>(
    head: &HeadParams,
    features: &Matrix,
    labels: &[L],
    descriptors: Option<&Matrix>,
    triplets: &TripletIndices,
    cfg: &LossConfig,
) -> Result<f64> {
    Ok(
        loss_and_grads(head, features, labels, descriptors, triplets, cfg)?
            .0
            .loss,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub batches: usize,
    pub mean_loss: f64,
    pub mean_triplet_loss: f64,
    pub mean_recon_loss: f64,
    pub active_fraction: f64,
    pub mean_pos_dist: f64,
    pub mean_neg_dist: f64,
    pub skipped_anchors: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("log records serialize") + "\n")
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let epochs = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                serde_json::from_str(l)
                    .map_err(|e| TrainerError::Checkpoint(format!("training log: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { epochs })
    }
}

const INIT_STREAM: u64 = 0;
const SAMPLE_STREAM: u64 = 1;

/// The head `train` starts from for this config and input width.
pub fn init_head(d_in: usize, n_desc: usize, cfg: &TrainConfig) -> HeadParams {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(INIT_STREAM);
    match cfg.head_kind {
        HeadKind::Projection => HeadParams::projection(d_in, cfg.embed_dim, &mut rng),
        HeadKind::LinguisticBottleneck => {
            let dims = cfg
                .bottleneck
                .unwrap_or_else(|| BottleneckDims::scaled(d_in, n_desc));
            HeadParams::bottleneck(d_in, cfg.embed_dim, dims, &mut rng)
        }
    }
}

/// Trains a fresh head. An epoch is `ceil(records / (P·K))` batches.
pub fn train<L: Ord + Clone>(
    features: &Matrix,
    labels: &[L],
    descriptors: Option<&Matrix>,
    cfg: &TrainConfig,
) -> Result<(HeadParams, TrainLog)> {
    cfg.validate()?;
    if labels.len() != features.rows() {
        return Err(TrainerError::Shape(format!(
            "{} labels for {} rows",
            labels.len(),
            features.rows()
        )));
    }
    let n_desc = descriptors.map_or(DEFAULT_DESCRIPTORS, |d| d.cols());
    if let Some(d) = descriptors {
        if d.rows() != features.rows() {
            return Err(TrainerError::Shape(format!(
                "{} descriptor rows for {} feature rows",
                d.rows(),
                features.rows()
            )));
        }
    }
    if cfg.head_kind == HeadKind::LinguisticBottleneck
        && cfg.aux_weight > 0.0
        && descriptors.is_none()
    {
        return Err(TrainerError::MissingDescriptors);
    }
    let mut head = init_head(features.cols(), n_desc, cfg);
    if let (Some(d), Some(nd)) = (descriptors, head.descriptor_dim()) {
        if d.cols() != nd {
            return Err(TrainerError::Shape(format!(
                "{} descriptor columns, head reconstructs {nd}",
                d.cols()
            )));
        }
    }
    let mut log = TrainLog::default();
    if cfg.epochs == 0 {
        return Ok((head, log));
    }

    let sampler = PkSampler::from_labels(labels);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SAMPLE_STREAM);
    let mut adam = AdamState::new(&head);
    let lc = cfg.loss_config();
    let batch = cfg.p * cfg.k;
    let batches = features.rows().div_ceil(batch).max(1);

    for epoch in 1..=cfg.epochs {
        let mut acc = BatchStats::default();
        for _ in 0..batches {
            let idx = sampler.sample(cfg.p, cfg.k, &mut rng)?;
            let x = features.select_rows(&idx);
            let y: Vec<L> = idx.iter().map(|&i| labels[i].clone()).collect();
            let d = descriptors.map(|d| d.select_rows(&idx));
            let emb = head.embed(&x)?;
            let trip = mine_triplets(&emb, &y, cfg.positive_mining, &mut rng)?;
            let (s, g) = loss_and_grads(&head, &x, &y, d.as_ref(), &trip, &lc)?;
            adam_step(
                &mut head,
                &g,
                &mut adam,
                cfg.learning_rate,
                cfg.weight_decay,
            )?;
            acc.loss += s.loss;
            acc.triplet_loss += s.triplet_loss;
            acc.recon_loss += s.recon_loss;
            acc.triplets += s.triplets;
            acc.active += s.active;
            acc.skipped += s.skipped;
            acc.mean_pos_dist += s.mean_pos_dist;
            acc.mean_neg_dist += s.mean_neg_dist;
        }
        let nb = batches as f64;
        log.epochs.push(EpochLog {
            epoch,
            batches,
            mean_loss: acc.loss / nb,
            mean_triplet_loss: acc.triplet_loss / nb,
            mean_recon_loss: acc.recon_loss / nb,
            active_fraction: if acc.triplets == 0 {
                0.0
            } else {
                acc.active as f64 / acc.triplets as f64
            },
            mean_pos_dist: acc.mean_pos_dist / nb,
            mean_neg_dist: acc.mean_neg_dist / nb,
            skipped_anchors: acc.skipped,
        });
    }
    Ok((head, log))
}
